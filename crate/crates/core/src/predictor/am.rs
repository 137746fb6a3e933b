use std::collections::VecDeque;

use super::Predictor;
use crate::error::{Error, Result};

/// Arithmetic mean of the last `window_size` measured throughputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AmPredictor {
    window_size: usize,
    window: VecDeque<f64>,
    fallback_initial: f64,
}

impl AmPredictor {
    pub fn new(window_size: usize, fallback_initial: f64) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::validation("AM window must hold at least one value"));
        }
        Ok(Self {
            window_size,
            window: VecDeque::with_capacity(window_size),
            fallback_initial,
        })
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    pub fn observe(&mut self, c: f64) {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(c);
    }

    /// Mean of what the window holds; a partly filled window averages the
    /// values it has.
    pub fn predict(&self) -> f64 {
        if self.window.is_empty() {
            return self.fallback_initial;
        }
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }
}

impl Predictor for AmPredictor {
    fn observe(&mut self, c: f64) {
        AmPredictor::observe(self, c);
    }

    fn predict(&self) -> f64 {
        AmPredictor::predict(self)
    }
}
