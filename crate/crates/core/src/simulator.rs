//! Trace-driven Stop-And-Wait uplink.
//!
//! Frames are generated every `1/fps` seconds. The sender transmits one frame
//! at a time and, whenever it becomes idle, picks the newest frame generated
//! so far; older untaken frames are lost. Each frame is sized so that it would
//! take exactly one frame interval at the predicted throughput, subject to a
//! minimum size. After each completed transfer the measured throughput
//! `size / duration` is fed back to the predictor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionPair;
use crate::predictor::{fit_binning, AmPredictor, EcmPredictor, Predictor};
use crate::trace::{ThroughputTrace, Transfer};

/// Events closer together than this are treated as simultaneous.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    Am { window: usize },
    /// ECM whose bins span the trace bandwidths seen during the warm-up
    /// window (the whole trace when there is no warm-up). The matrix starts
    /// empty and learns online.
    Ecm { bins: usize, cap: Option<u64> },
    /// ECM starting from an already trained state.
    EcmPretrained(Box<EcmPredictor>),
}

impl PredictorSpec {
    pub fn label(&self) -> String {
        match self {
            PredictorSpec::Am { window } => format!("am:{window}"),
            PredictorSpec::Ecm { bins, cap } => match cap {
                Some(c) => format!("ecm:{bins},{c}"),
                None => format!("ecm:{bins},inf"),
            },
            PredictorSpec::EcmPretrained(p) => {
                let cap = p.matrix().cap().map_or("inf".to_string(), |c| c.to_string());
                format!("ecm-pretrained:{},{cap}", p.binning().bin_count())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub fps: f64,
    pub min_frame_size: f64,
    /// Forecast used before the predictor has any observation.
    pub fallback_initial: f64,
    pub predictor: PredictorSpec,
    /// Leading fraction of the trace treated as warm-up. Metrics are also
    /// reported for frames generated after it.
    pub warmup_fraction: f64,
}

impl SimConfig {
    pub fn new(fps: f64, min_frame_size: f64, fallback_initial: f64, predictor: PredictorSpec) -> Self {
        Self {
            fps,
            min_frame_size,
            fallback_initial,
            predictor,
            warmup_fraction: 0.0,
        }
    }

    pub fn with_warmup(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return Err(Error::validation(format!("fps {} must be positive", self.fps)));
        }
        if !(self.min_frame_size >= 0.0) || !self.min_frame_size.is_finite() {
            return Err(Error::validation("minimum frame size must be non-negative"));
        }
        if !(self.fallback_initial > 0.0) || !self.fallback_initial.is_finite() {
            return Err(Error::validation("initial throughput guess must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::validation("warm-up fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn build_predictor(&self, trace: &ThroughputTrace) -> Result<Box<dyn Predictor>> {
        Ok(match &self.predictor {
            PredictorSpec::Am { window } => Box::new(AmPredictor::new(*window, self.fallback_initial)?),
            PredictorSpec::Ecm { bins, cap } => {
                let warmup_end = self.warmup_fraction * trace.end_time();
                let mut range: Vec<f64> = trace
                    .samples()
                    .iter()
                    .filter(|s| s.time < warmup_end)
                    .map(|s| s.bandwidth)
                    .collect();
                if fit_binning(&range, *bins).is_err() {
                    range = trace.samples().iter().map(|s| s.bandwidth).collect();
                }
                let binning = fit_binning(&range, *bins)?;
                Box::new(EcmPredictor::new(binning, *cap, self.fallback_initial)?)
            }
            PredictorSpec::EcmPretrained(p) => Box::new((**p).clone()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrameOutcome {
    Sent {
        size: f64,
        start: f64,
        completed: f64,
        measured_throughput: f64,
        predicted: f64,
    },
    /// Superseded by a newer frame, or never taken before the trace ended.
    Lost,
    /// Still transmitting when the trace ended.
    InFlightAtEnd { size: f64, start: f64, predicted: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub generated_at: f64,
    pub outcome: FrameOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub frames: Vec<FrameRecord>,
    pub generated_count: usize,
    pub sent_count: usize,
    pub lost_count: usize,
    pub in_flight_count: usize,
    pub sum_frame_sizes: f64,
    pub loss_rate: f64,
    /// One pair per completed transfer, in completion order.
    pub predictions: Vec<PredictionPair>,
    /// Start of the evaluation window in seconds (0 without warm-up).
    pub eval_start: f64,
    /// Forecasts that were not positive and got replaced by the size floor.
    pub clamped_predictions: usize,
}

/// Size that takes one frame interval at the predicted throughput, floored
/// at `min_frame_size`. Non-positive forecasts get the floor.
pub fn frame_size_for(predicted_throughput: f64, fps: f64, min_frame_size: f64) -> f64 {
    if predicted_throughput > 0.0 {
        (predicted_throughput / fps).max(min_frame_size)
    } else {
        min_frame_size
    }
}

/// Number of frames whose whole generation interval fits in the trace.
pub fn generated_frames(trace: &ThroughputTrace, fps: f64) -> usize {
    (trace.end_time() * fps + TIE_TOLERANCE).floor() as usize
}

pub fn run_simulation(trace: &ThroughputTrace, config: &SimConfig) -> Result<SimulationResult> {
    config.validate()?;
    let mut predictor = config.build_predictor(trace)?;
    run_with_predictor(trace, config, predictor.as_mut())
}

/// Runs the uplink with a caller-supplied predictor; `config.predictor` is
/// ignored.
pub fn run_with_predictor(
    trace: &ThroughputTrace,
    config: &SimConfig,
    predictor: &mut dyn Predictor,
) -> Result<SimulationResult> {
    config.validate()?;
    if trace.samples().is_empty() {
        return Err(Error::validation("trace is empty"));
    }
    let fps = config.fps;
    let end_time = trace.end_time();
    let count = generated_frames(trace, fps);
    let generated_at = |i: usize| i as f64 / fps;

    let mut frames: Vec<FrameRecord> = (0..count)
        .map(|index| FrameRecord {
            index,
            generated_at: generated_at(index),
            outcome: FrameOutcome::Lost,
        })
        .collect();
    let mut predictions = Vec::new();
    let mut clamped = 0;

    // Frames below `next` have been taken or superseded.
    let mut next = 0;
    let mut now = 0.0_f64;
    while next < count && now < end_time {
        let newest = newest_generated(now, fps, count);
        let Some(newest) = newest.filter(|n| *n >= next) else {
            now = generated_at(next);
            continue;
        };
        next = newest + 1;

        let predicted = predictor.predict();
        if !(predicted > 0.0) {
            clamped += 1;
        }
        let size = frame_size_for(predicted, fps, config.min_frame_size);
        if !(size > 0.0) {
            continue;
        }
        let start = now.max(generated_at(newest));
        if start >= end_time {
            break;
        }
        match trace.transfer_completion(start, size)? {
            Transfer::Completed(done) => {
                let measured = size / (done - start);
                predictor.observe(measured);
                predictions.push(PredictionPair {
                    frame: newest,
                    predicted,
                    realized: measured,
                });
                frames[newest].outcome = FrameOutcome::Sent {
                    size,
                    start,
                    completed: done,
                    measured_throughput: measured,
                    predicted,
                };
                now = done;
            }
            Transfer::Incomplete { .. } => {
                frames[newest].outcome = FrameOutcome::InFlightAtEnd { size, start, predicted };
                break;
            }
        }
    }

    let mut result = SimulationResult {
        generated_count: count,
        sent_count: 0,
        lost_count: 0,
        in_flight_count: 0,
        sum_frame_sizes: 0.0,
        loss_rate: 0.0,
        predictions,
        eval_start: config.warmup_fraction * end_time,
        clamped_predictions: clamped,
        frames,
    };
    for f in &result.frames {
        match f.outcome {
            FrameOutcome::Sent { size, .. } => {
                result.sent_count += 1;
                result.sum_frame_sizes += size;
            }
            FrameOutcome::Lost => result.lost_count += 1,
            FrameOutcome::InFlightAtEnd { .. } => result.in_flight_count += 1,
        }
    }
    if count > 0 {
        result.loss_rate = result.lost_count as f64 / count as f64;
    }
    Ok(result)
}

/// Largest frame index generated at or before `now`, if any.
fn newest_generated(now: f64, fps: f64, count: usize) -> Option<usize> {
    if count == 0 {
        return None;
    }
    let horizon = now + TIE_TOLERANCE;
    let generated = |i: usize| i as f64 / fps;
    let mut i = ((horizon * fps).floor().max(0.0) as usize).min(count - 1);
    while i + 1 < count && generated(i + 1) <= horizon {
        i += 1;
    }
    while generated(i) > horizon {
        if i == 0 {
            return None;
        }
        i -= 1;
    }
    Some(i)
}
