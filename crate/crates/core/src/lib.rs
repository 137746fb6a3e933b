//! Throughput prediction for live video uplinks.
//!
//! Two predictors are provided: a sliding arithmetic mean ([`AmPredictor`])
//! and the empirical conditional mean ([`EcmPredictor`]), which quantizes
//! measured throughputs into bins and forecasts from the empirical
//! first-order transition distribution. A trace-driven Stop-And-Wait
//! simulator ([`simulator`]) and evaluation metrics ([`metrics`]) compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod predictor;
pub mod simulator;
pub mod trace;

pub use error::{Error, Result};
pub use metrics::{interval_coverage, nrmse, summarize, CoverageReport, MetricRow, PredictionPair, RunSummary, WindowMetrics};
pub use predictor::{
    fit_binning, AmPredictor, BinningScheme, ContingencyMatrix, EcmPredictor, PredictionInterval, Predictor,
};
pub use simulator::{
    frame_size_for, run_simulation, run_with_predictor, FrameOutcome, FrameRecord, PredictorSpec, SimConfig,
    SimulationResult,
};
pub use trace::{
    load_trace, parse_trace, synth_markov_trace, SyntheticTraceSpec, ThroughputSample, ThroughputTrace, Transfer,
};
