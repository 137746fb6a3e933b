use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `(lower, upper]` into `bin_count` half-open bins
/// `(edges[k], edges[k+1]]`. Values outside the range clamp to the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    lower: f64,
    upper: f64,
    edges: Vec<f64>,
}

impl BinningScheme {
    pub fn new(lower: f64, upper: f64, bin_count: usize) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::validation(format!(
                "binning range ({lower}, {upper}] is empty"
            )));
        }
        if bin_count < 2 {
            return Err(Error::validation(format!(
                "bin count {bin_count} must be at least 2"
            )));
        }
        let width = (upper - lower) / bin_count as f64;
        let mut edges: Vec<f64> = (0..=bin_count).map(|i| lower + i as f64 * width).collect();
        edges[bin_count] = upper;
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("bins too narrow to be distinguished"));
        }
        Ok(Self { lower, upper, edges })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.bin_count() as f64
    }

    /// Bin holding `value`; total on finite input through clamping.
    pub fn bin_index(&self, value: f64) -> usize {
        let last = self.bin_count() - 1;
        if value <= self.lower {
            return 0;
        }
        if value > self.upper {
            return last;
        }
        let guess = ((value - self.lower) / self.width()).ceil() as isize - 1;
        let mut k = guess.clamp(0, last as isize) as usize;
        // The division can land one bin off right at an edge.
        while k > 0 && value <= self.edges[k] {
            k -= 1;
        }
        while k < last && value > self.edges[k + 1] {
            k += 1;
        }
        k
    }

    /// Midpoint of bin `k`, used as the bin's representative value.
    pub fn representative(&self, k: usize) -> Result<f64> {
        if k >= self.bin_count() {
            return Err(Error::domain(format!(
                "bin {k} out of range for {} bins",
                self.bin_count()
            )));
        }
        Ok((self.edges[k] + self.edges[k + 1]) / 2.0)
    }
}

/// Spans `(min, max]` of the training values with `bin_count` uniform bins.
pub fn fit_binning(training: &[f64], bin_count: usize) -> Result<BinningScheme> {
    if training.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("training data contains non-finite values"));
    }
    let lower = training.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = training.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if training.len() < 2 || !(lower < upper) {
        return Err(Error::InsufficientData(
            "degenerate training data: fewer than 2 distinct values".into(),
        ));
    }
    BinningScheme::new(lower, upper, bin_count)
}
