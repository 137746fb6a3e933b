//! Evaluation measures for predictors and simulation runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::PredictionInterval;
use crate::simulator::{FrameOutcome, SimulationResult};

/// Forecast and realized throughput for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub frame: usize,
    pub predicted: f64,
    pub realized: f64,
}

/// RMSE of the forecasts divided by the sample mean of the realized values.
pub fn nrmse<I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut n, mut sq, mut sum) = (0usize, 0.0, 0.0);
    for (predicted, realized) in pairs {
        let d = realized - predicted;
        sq += d * d;
        sum += realized;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no prediction pairs to score".into()));
    }
    let mean = sum / n as f64;
    if !(mean > 0.0) {
        return Err(Error::domain(format!("mean realized throughput {mean} is not positive")));
    }
    Ok((sq / n as f64).sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub nominal_level: f64,
    pub hits: usize,
    pub total: usize,
    pub coverage: f64,
}

/// Fraction of realized values falling in `(low, high]` of their interval.
pub fn interval_coverage(intervals: &[PredictionInterval], realized: &[f64]) -> Result<CoverageReport> {
    if intervals.len() != realized.len() {
        return Err(Error::domain(format!(
            "{} intervals but {} realized values",
            intervals.len(),
            realized.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::InsufficientData("no intervals to score".into()));
    }
    let hits = intervals
        .iter()
        .zip(realized)
        .filter(|(iv, x)| iv.contains(**x))
        .count();
    Ok(CoverageReport {
        nominal_level: intervals[0].nominal_level,
        hits,
        total: intervals.len(),
        coverage: hits as f64 / intervals.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub generated: usize,
    pub sent: usize,
    pub lost: usize,
    pub in_flight: usize,
    pub loss_rate: f64,
    pub sum_frame_sizes: f64,
    /// Absent when the window holds no completed transfer.
    pub nrmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub whole: WindowMetrics,
    /// Frames generated at or after the end of warm-up, when there is one.
    pub evaluation: Option<WindowMetrics>,
}

impl RunSummary {
    /// The evaluation window if defined, else the whole run.
    pub fn headline(&self) -> &WindowMetrics {
        self.evaluation.as_ref().unwrap_or(&self.whole)
    }
}

pub fn summarize(result: &SimulationResult) -> RunSummary {
    let whole = window_metrics(result, |_| true);
    let evaluation = (result.eval_start > 0.0).then(|| {
        let start = result.eval_start;
        window_metrics(result, |generated_at| generated_at >= start)
    });
    RunSummary { whole, evaluation }
}

fn window_metrics(result: &SimulationResult, in_window: impl Fn(f64) -> bool) -> WindowMetrics {
    let mut m = WindowMetrics {
        generated: 0,
        sent: 0,
        lost: 0,
        in_flight: 0,
        loss_rate: 0.0,
        sum_frame_sizes: 0.0,
        nrmse: None,
    };
    for f in result.frames.iter().filter(|f| in_window(f.generated_at)) {
        m.generated += 1;
        match f.outcome {
            FrameOutcome::Sent { size, .. } => {
                m.sent += 1;
                m.sum_frame_sizes += size;
            }
            FrameOutcome::Lost => m.lost += 1,
            FrameOutcome::InFlightAtEnd { .. } => m.in_flight += 1,
        }
    }
    if m.generated > 0 {
        m.loss_rate = m.lost as f64 / m.generated as f64;
    }
    let pairs = result
        .predictions
        .iter()
        .filter(|p| {
            result
                .frames
                .get(p.frame)
                .is_some_and(|f| in_window(f.generated_at))
        })
        .map(|p| (p.predicted, p.realized));
    m.nrmse = nrmse(pairs).ok();
    m
}

/// One CSV row per run. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: usize,
    pub predictor: String,
    /// AM window size.
    pub m: Option<usize>,
    /// ECM bin count.
    pub k: Option<usize>,
    /// ECM grandsum cap; `inf` when unbounded.
    pub ms: Option<String>,
    pub fps: f64,
    pub s_min: f64,
    /// `eval` or `whole`.
    pub window: String,
    pub generated: usize,
    pub sent: usize,
    pub lost: usize,
    pub loss_rate: f64,
    pub sum_frame_sizes: f64,
    pub nrmse: Option<f64>,
    pub coverage: Option<f64>,
    pub alpha: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nrmse_examples() {
        assert!((nrmse([(2.0, 1.0), (2.0, 3.0)]).unwrap() - 0.5).abs() < 1e-12);
        assert!((nrmse([(5.0, 10.0)]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(nrmse([(3.0, 3.0), (7.0, 7.0)]).unwrap(), 0.0);
    }

    #[test]
    fn nrmse_errors() {
        assert!(matches!(nrmse(std::iter::empty()), Err(Error::InsufficientData(_))));
        assert!(matches!(nrmse([(1.0, 0.0)]), Err(Error::Domain(_))));
    }

    fn iv(low: f64, high: f64) -> PredictionInterval {
        PredictionInterval {
            low,
            high,
            nominal_level: 0.9,
            retained_mass: 0.9,
        }
    }

    #[test]
    fn coverage_examples() {
        let r = interval_coverage(&[iv(0.0, 10.0); 3], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(r.coverage, 1.0);
        let r = interval_coverage(&[iv(0.0, 10.0); 2], &[5.0, 15.0]).unwrap();
        assert_eq!(r.coverage, 0.5);
        let r = interval_coverage(&[iv(0.0, 10.0)], &[10.0]).unwrap();
        assert_eq!(r.hits, 1);
        let r = interval_coverage(&[iv(0.0, 10.0)], &[0.0]).unwrap();
        assert_eq!(r.hits, 0);
    }

    #[test]
    fn coverage_length_mismatch() {
        assert!(matches!(
            interval_coverage(&[iv(0.0, 1.0)], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    fn frame(index: usize, outcome: FrameOutcome) -> crate::simulator::FrameRecord {
        crate::simulator::FrameRecord {
            index,
            generated_at: index as f64 * 0.1,
            outcome,
        }
    }

    #[test]
    fn summary_counts_and_absent_nrmse() {
        let sent = FrameOutcome::Sent {
            size: 1.0,
            start: 0.0,
            completed: 0.1,
            measured_throughput: 10.0,
            predicted: 10.0,
        };
        let mut frames: Vec<_> = (0..98).map(|i| frame(i, sent)).collect();
        frames.push(frame(98, FrameOutcome::Lost));
        frames.push(frame(99, FrameOutcome::Lost));
        let result = SimulationResult {
            frames,
            generated_count: 100,
            sent_count: 98,
            lost_count: 2,
            in_flight_count: 0,
            sum_frame_sizes: 98.0,
            loss_rate: 0.02,
            predictions: vec![],
            eval_start: 0.0,
            clamped_predictions: 0,
        };
        let s = summarize(&result);
        assert_eq!(s.whole.loss_rate, 0.02);
        assert_eq!(s.whole.sum_frame_sizes, 98.0);
        assert_eq!(s.whole.nrmse, None);
        assert!(s.evaluation.is_none());
    }
}
