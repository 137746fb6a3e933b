use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ecm_core::{load_trace, synth_markov_trace, PredictorSpec, SyntheticTraceSpec, ThroughputTrace};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "ecm", version, about = "Throughput prediction experiments for live video uplinks")]
pub struct Cli {
    /// File of `key=value` lines, one flag per line (`fps=10`). Flags given
    /// on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the uplink simulator over a grid of predictors, frame rates and
    /// minimum frame sizes.
    Simulate(SimulateArgs),
    /// Train ECM on the head of a trace and score interval coverage on the rest.
    Coverage(CoverageArgs),
    /// Print one row of a saved transition-count matrix.
    DumpRow(DumpRowArgs),
    /// Write a synthetic Markov-modulated bandwidth trace.
    Synth(SynthArgs),
}

pub const SUBCOMMANDS: &[&str] = &["simulate", "coverage", "dump-row", "synth"];

#[derive(Debug, Args)]
pub struct SynthSpecArgs {
    /// Number of synthetic states; checked against `--bandwidths` when given.
    #[arg(long)]
    pub states: Option<usize>,
    /// Per-state bandwidths, comma separated.
    #[arg(long, value_name = "B1,B2,..")]
    pub bandwidths: Option<String>,
    /// Row-stochastic transition matrix; rows separated by `;`.
    #[arg(long, value_name = "P11,P12;P21,P22")]
    pub transitions: Option<String>,
    /// Seconds between samples.
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    /// Trace length in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub duration: f64,
    /// Half-width of the multiplicative uniform noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthSpecArgs {
    pub fn to_spec(&self) -> anyhow::Result<SyntheticTraceSpec> {
        let bandwidths = self
            .bandwidths
            .as_deref()
            .ok_or_else(|| UsageError("synthetic traces need --bandwidths".into()))?;
        let state_bandwidths = parse_list(bandwidths, "--bandwidths")?;
        let n = state_bandwidths.len();
        if let Some(states) = self.states {
            if states != n {
                return Err(UsageError(format!("--states {states} but {n} bandwidths given")).into());
            }
        }
        let transition_matrix = match self.transitions.as_deref() {
            Some(text) => text
                .split(';')
                .map(|row| parse_list(row, "--transitions"))
                .collect::<anyhow::Result<Vec<_>>>()?,
            None if n == 1 => vec![vec![1.0]],
            None => return Err(UsageError("--transitions is required with more than one state".into()).into()),
        };
        Ok(SyntheticTraceSpec {
            state_bandwidths,
            transition_matrix,
            sample_interval: self.interval,
            duration: self.duration,
            noise_fraction: self.noise,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Trace CSV (`time,bandwidth` per line). Without it the synthetic flags
    /// describe the trace.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,

    #[command(flatten)]
    pub synth: SynthSpecArgs,
}

impl TraceArgs {
    pub fn load(&self) -> anyhow::Result<ThroughputTrace> {
        match &self.trace {
            Some(path) => Ok(load_trace(path)?),
            None if self.synth.bandwidths.is_some() => Ok(synth_markov_trace(&self.synth.to_spec()?)?),
            None => Err(UsageError("give --trace or synthetic trace flags (--bandwidths ...)".into()).into()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub trace: TraceArgs,

    /// Predictors to compare: `am:M` or `ecm:K,Ms` (`Ms` may be `inf`).
    /// Repeatable.
    #[arg(long = "predictor", value_name = "SPEC", default_values_t = [String::from("am:16"), String::from("ecm:32,inf")])]
    pub predictors: Vec<String>,

    /// Frame rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "25")]
    pub fps: Vec<f64>,

    #[arg(long = "smin-start", default_value_t = 0.0)]
    pub smin_start: f64,
    /// Defaults to `--smin-start` (a single value).
    #[arg(long = "smin-stop")]
    pub smin_stop: Option<f64>,
    #[arg(long = "smin-step")]
    pub smin_step: Option<f64>,

    /// Leading fraction of the trace used as warm-up; metrics are reported
    /// on the remainder. 0 reports the whole run.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,

    /// Forecast used before the first measurement. Defaults to the first
    /// trace sample's bandwidth.
    #[arg(long)]
    pub initial: Option<f64>,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Per-frame event log. With several runs, `.run<N>` is inserted before
    /// the extension.
    #[arg(long = "frame-log", value_name = "PATH")]
    pub frame_log: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn smin_values(&self) -> anyhow::Result<Vec<f64>> {
        let start = self.smin_start;
        let stop = self.smin_stop.unwrap_or(start);
        if stop < start {
            return Err(UsageError("--smin-stop is below --smin-start".into()).into());
        }
        if stop == start {
            return Ok(vec![start]);
        }
        let step = self
            .smin_step
            .filter(|s| *s > 0.0)
            .ok_or_else(|| UsageError("--smin-step must be positive for a sweep".into()))?;
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    }
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub trace: TraceArgs,

    /// ECM configuration `ecm:K,Ms`.
    #[arg(long, value_name = "SPEC", default_value = "ecm:32,inf")]
    pub predictor: String,

    /// Significance levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,

    /// Fraction of observations used for training.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Also write the trained matrix snapshot here.
    #[arg(long = "save-state", value_name = "PATH")]
    pub save_state: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpRowArgs {
    /// Matrix snapshot written by `coverage --save-state`.
    #[arg(long, value_name = "PATH")]
    pub state: PathBuf,

    /// Row (conditioning bin), 0-based.
    #[arg(long)]
    pub row: usize,

    /// Binning range; when both are given the bin edges are emitted.
    #[arg(long)]
    pub lower: Option<f64>,
    #[arg(long)]
    pub upper: Option<f64>,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub spec: SynthSpecArgs,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

fn parse_list(text: &str, flag: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("{flag}: `{}` is not a number", v.trim())).into())
        })
        .collect()
}

/// Parses `am:M`, `ecm:K`, `ecm:K,Ms` or `ecm:K,inf`.
pub fn parse_predictor(text: &str) -> anyhow::Result<PredictorSpec> {
    let bad = || UsageError(format!("bad predictor `{text}`; expected am:M or ecm:K,Ms"));
    let (kind, params) = text.split_once(':').ok_or_else(bad)?;
    match kind.trim() {
        "am" => {
            let window = params.trim().parse().map_err(|_| bad())?;
            Ok(PredictorSpec::Am { window })
        }
        "ecm" => {
            let mut parts = params.split(',').map(str::trim);
            let bins = parts.next().and_then(|k| k.parse().ok()).ok_or_else(bad)?;
            let cap = match parts.next() {
                None | Some("inf") => None,
                Some(c) => Some(c.parse().map_err(|_| bad())?),
            };
            if parts.next().is_some() {
                return Err(bad().into());
            }
            Ok(PredictorSpec::Ecm { bins, cap })
        }
        _ => Err(bad().into()),
    }
}
