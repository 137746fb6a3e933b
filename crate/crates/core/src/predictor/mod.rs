//! Throughput predictors: the arithmetic-mean baseline and the empirical
//! conditional mean (ECM) model.

mod am;
mod binning;
mod ecm;
mod matrix;

pub use am::AmPredictor;
pub use binning::{fit_binning, BinningScheme};
pub use ecm::{EcmPredictor, PredictionInterval};
pub use matrix::ContingencyMatrix;

/// Online one-step-ahead throughput forecaster.
pub trait Predictor {
    /// Feeds the throughput measured for the frame that just finished.
    fn observe(&mut self, c: f64);

    /// Forecast for the next frame's throughput.
    fn predict(&self) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn observe(&mut self, c: f64) {
        (**self).observe(c);
    }

    fn predict(&self) -> f64 {
        (**self).predict()
    }
}
