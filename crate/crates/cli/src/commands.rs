use std::fs;

use anyhow::Context;
use ecm_core::{
    fit_binning, interval_coverage, run_simulation, summarize, synth_markov_trace, BinningScheme, ContingencyMatrix,
    EcmPredictor, Error, FrameOutcome, MetricRow, PredictorSpec, SimConfig, SimulationResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{parse_predictor, CoverageArgs, DumpRowArgs, SimulateArgs, SynthArgs};
use crate::output::{csv_bytes, numbered_path, write_atomic};
use crate::UsageError;

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let trace = args.trace.load()?;
    let predictors = args
        .predictors
        .iter()
        .map(|p| parse_predictor(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let smins = args.smin_values()?;
    if args.fps.is_empty() {
        return Err(UsageError("--fps needs at least one value".into()).into());
    }
    let initial = args.initial.unwrap_or(trace.samples()[0].bandwidth);

    let mut grid = Vec::new();
    for predictor in &predictors {
        for &fps in &args.fps {
            for &smin in &smins {
                let config = SimConfig::new(fps, smin, initial, predictor.clone()).with_warmup(args.split);
                config.validate()?;
                grid.push(config);
            }
        }
    }

    // Output order follows the grid, not completion order.
    let runs: Vec<(MetricRow, SimulationResult)> = grid
        .par_iter()
        .enumerate()
        .map(|(run_id, config)| {
            let result = run_simulation(&trace, config)?;
            Ok((metric_row(run_id, config, &result), result))
        })
        .collect::<anyhow::Result<_>>()?;

    if let Some(log) = &args.frame_log {
        for (run_id, (_, result)) in runs.iter().enumerate() {
            let path = if runs.len() == 1 { log.clone() } else { numbered_path(log, run_id) };
            write_atomic(&path, &csv_bytes(&frame_log_rows(result))?)?;
        }
    }
    let rows: Vec<MetricRow> = runs.into_iter().map(|(row, _)| row).collect();
    write_atomic(&args.out, &csv_bytes(&rows)?)
}

fn metric_row(run_id: usize, config: &SimConfig, result: &SimulationResult) -> MetricRow {
    let summary = summarize(result);
    let (window, m) = match &summary.evaluation {
        Some(eval) => ("eval", eval),
        None => ("whole", &summary.whole),
    };
    let (am_window, bins, cap) = match &config.predictor {
        PredictorSpec::Am { window } => (Some(*window), None, None),
        PredictorSpec::Ecm { bins, cap } => (None, Some(*bins), Some(*cap)),
        PredictorSpec::EcmPretrained(p) => (None, Some(p.binning().bin_count()), Some(p.matrix().cap())),
    };
    MetricRow {
        run_id,
        predictor: config.predictor.label(),
        m: am_window,
        k: bins,
        ms: cap.map(|c| c.map_or_else(|| "inf".to_string(), |c| c.to_string())),
        fps: config.fps,
        s_min: config.min_frame_size,
        window: window.to_string(),
        generated: m.generated,
        sent: m.sent,
        lost: m.lost,
        loss_rate: m.loss_rate,
        sum_frame_sizes: m.sum_frame_sizes,
        nrmse: m.nrmse,
        coverage: None,
        alpha: None,
    }
}

#[derive(Serialize)]
struct FrameLogRow {
    index: usize,
    generated_at: f64,
    outcome: &'static str,
    size: Option<f64>,
    start: Option<f64>,
    completed: Option<f64>,
    #[serde(rename = "measured_C")]
    measured: Option<f64>,
    #[serde(rename = "predicted_C")]
    predicted: Option<f64>,
}

fn frame_log_rows(result: &SimulationResult) -> Vec<FrameLogRow> {
    result
        .frames
        .iter()
        .map(|f| {
            let mut row = FrameLogRow {
                index: f.index,
                generated_at: f.generated_at,
                outcome: "lost",
                size: None,
                start: None,
                completed: None,
                measured: None,
                predicted: None,
            };
            match f.outcome {
                FrameOutcome::Sent {
                    size,
                    start,
                    completed,
                    measured_throughput,
                    predicted,
                } => {
                    row.outcome = "sent";
                    row.size = Some(size);
                    row.start = Some(start);
                    row.completed = Some(completed);
                    row.measured = Some(measured_throughput);
                    row.predicted = Some(predicted);
                }
                FrameOutcome::InFlightAtEnd { size, start, predicted } => {
                    row.outcome = "in_flight";
                    row.size = Some(size);
                    row.start = Some(start);
                    row.predicted = Some(predicted);
                }
                FrameOutcome::Lost => {}
            }
            row
        })
        .collect()
}

#[derive(Serialize)]
struct CoverageRow {
    alpha: f64,
    nominal_level: f64,
    hits: usize,
    total: usize,
    skipped: usize,
    coverage: f64,
    mean_width: f64,
    k: usize,
    ms: String,
    lower: f64,
    upper: f64,
    train: usize,
    test: usize,
}

pub fn coverage(args: &CoverageArgs) -> anyhow::Result<()> {
    let (bins, cap) = match parse_predictor(&args.predictor)? {
        PredictorSpec::Ecm { bins, cap } => (bins, cap),
        _ => return Err(UsageError("coverage needs an ecm:K,Ms predictor".into()).into()),
    };
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(UsageError("--split must lie in (0, 1)".into()).into());
    }
    if args.alpha.is_empty() {
        return Err(UsageError("--alpha needs at least one value".into()).into());
    }
    let trace = args.trace.load()?;
    let values: Vec<f64> = trace.samples().iter().map(|s| s.bandwidth).collect();
    let n_train = (values.len() as f64 * args.split).floor() as usize;
    if n_train < 2 || n_train >= values.len() {
        return Err(Error::InsufficientData(format!(
            "{} observations cannot be split {} for training",
            values.len(),
            args.split
        ))
        .into());
    }
    let (train, test) = values.split_at(n_train);

    let binning = fit_binning(train, bins)?;
    let mut model = EcmPredictor::new(binning.clone(), cap, train[0])?;
    model.train(train.iter().copied());

    let rows = args
        .alpha
        .iter()
        .map(|&alpha| {
            let mut p = model.clone();
            let mut intervals = Vec::with_capacity(test.len());
            let mut realized = Vec::with_capacity(test.len());
            let mut skipped = 0;
            for &x in test {
                match p.interval_estimate(alpha) {
                    Ok(iv) => {
                        intervals.push(iv);
                        realized.push(x);
                    }
                    Err(Error::InsufficientData(_)) => skipped += 1,
                    Err(e) => return Err(e.into()),
                }
                p.condition_on(x);
            }
            let report = interval_coverage(&intervals, &realized)?;
            let mean_width = intervals.iter().map(|iv| iv.width()).sum::<f64>() / intervals.len() as f64;
            Ok(CoverageRow {
                alpha,
                nominal_level: 1.0 - alpha,
                hits: report.hits,
                total: report.total,
                skipped,
                coverage: report.coverage,
                mean_width,
                k: bins,
                ms: cap.map_or_else(|| "inf".to_string(), |c| c.to_string()),
                lower: binning.lower(),
                upper: binning.upper(),
                train: train.len(),
                test: test.len(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    if let Some(state) = &args.save_state {
        write_atomic(state, model.matrix().to_snapshot().as_bytes())?;
    }
    write_atomic(&args.out, &csv_bytes(&rows)?)
}

#[derive(Serialize)]
struct RowEntry {
    bin: usize,
    low: Option<f64>,
    high: Option<f64>,
    count: u64,
    probability: Option<f64>,
}

pub fn dump_row(args: &DumpRowArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.state).map_err(|source| Error::Io {
        path: args.state.clone(),
        source,
    })?;
    let matrix = ContingencyMatrix::from_snapshot(&text)
        .with_context(|| format!("reading {}", args.state.display()))?;
    let k = matrix.size();
    let binning = match (args.lower, args.upper) {
        (Some(lower), Some(upper)) => Some(BinningScheme::new(lower, upper, k)?),
        (None, None) => None,
        _ => return Err(UsageError("--lower and --upper go together".into()).into()),
    };
    let distribution = match &binning {
        Some(b) => EcmPredictor::with_matrix(b.clone(), matrix.clone(), 1.0)?.row_distribution(args.row)?,
        None if args.row < k => {
            let total = matrix.row_sum(args.row);
            (total > 0).then(|| matrix.row(args.row).iter().map(|n| *n as f64 / total as f64).collect())
        }
        None => return Err(Error::Domain(format!("row {} out of range for {k} bins", args.row)).into()),
    };
    let rows: Vec<RowEntry> = matrix
        .row(args.row)
        .iter()
        .enumerate()
        .map(|(bin, &count)| RowEntry {
            bin,
            low: binning.as_ref().map(|b| b.edges()[bin]),
            high: binning.as_ref().map(|b| b.edges()[bin + 1]),
            count,
            probability: distribution.as_ref().map(|q: &Vec<f64>| q[bin]),
        })
        .collect();
    write_atomic(&args.out, &csv_bytes(&rows)?)
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let trace = synth_markov_trace(&args.spec.to_spec()?)?;
    write_atomic(&args.out, trace.to_csv().as_bytes())
}
