use serde::{Deserialize, Serialize};

use super::{BinningScheme, ContingencyMatrix, Predictor};
use crate::error::{Error, Result};

/// Two-sided interval for the next throughput, built from a row of the
/// empirical transition distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub low: f64,
    pub high: f64,
    pub nominal_level: f64,
    /// Probability actually kept after whole-bin trimming; never below
    /// `nominal_level`.
    pub retained_mass: f64,
}

impl PredictionInterval {
    /// Half-open `(low, high]` membership, matching the bin convention.
    pub fn contains(&self, value: f64) -> bool {
        self.low < value && value <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Empirical conditional mean predictor.
///
/// Measured throughputs are quantized into bins; consecutive pairs feed a
/// first-order transition count matrix. The point forecast is the mean of
/// bin midpoints weighted by the empirical distribution in the row of the
/// most recent observation's bin.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmPredictor {
    binning: BinningScheme,
    matrix: ContingencyMatrix,
    last_observation: Option<f64>,
    last_bin: Option<usize>,
    fallback_initial: f64,
}

impl EcmPredictor {
    pub fn new(binning: BinningScheme, cap: Option<u64>, fallback_initial: f64) -> Result<Self> {
        let matrix = ContingencyMatrix::new(binning.bin_count(), cap)?;
        Self::with_matrix(binning, matrix, fallback_initial)
    }

    /// Wraps an existing (for example reloaded) matrix.
    pub fn with_matrix(
        binning: BinningScheme,
        matrix: ContingencyMatrix,
        fallback_initial: f64,
    ) -> Result<Self> {
        if matrix.size() != binning.bin_count() {
            return Err(Error::validation(format!(
                "matrix is {0}x{0} but binning has {1} bins",
                matrix.size(),
                binning.bin_count()
            )));
        }
        Ok(Self {
            binning,
            matrix,
            last_observation: None,
            last_bin: None,
            fallback_initial,
        })
    }

    pub fn binning(&self) -> &BinningScheme {
        &self.binning
    }

    pub fn matrix(&self) -> &ContingencyMatrix {
        &self.matrix
    }

    pub fn last_observation(&self) -> Option<f64> {
        self.last_observation
    }

    pub fn last_bin(&self) -> Option<usize> {
        self.last_bin
    }

    /// Records the transition from the previous observation (if any) to `c`.
    pub fn observe(&mut self, c: f64) {
        let bin = self.binning.bin_index(c);
        if let Some(prev) = self.last_bin {
            self.matrix.record(prev, bin);
        }
        self.last_observation = Some(c);
        self.last_bin = Some(bin);
    }

    /// Moves the conditioning state to `c` without recording a transition.
    /// Used to score a frozen model on held-out data.
    pub fn condition_on(&mut self, c: f64) {
        self.last_observation = Some(c);
        self.last_bin = Some(self.binning.bin_index(c));
    }

    pub fn train(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.observe(v);
        }
    }

    pub fn point_estimate(&self) -> f64 {
        let Some(k) = self.last_bin else {
            return self.fallback_initial;
        };
        let row = self.matrix.row(k);
        let total: u64 = row.iter().sum();
        if total == 0 {
            return self.last_observation.unwrap_or(self.fallback_initial);
        }
        let weighted: f64 = row
            .iter()
            .enumerate()
            .filter(|(_, n)| **n > 0)
            .map(|(j, n)| *n as f64 * self.midpoint(j))
            .sum();
        weighted / total as f64
    }

    fn midpoint(&self, j: usize) -> f64 {
        let e = self.binning.edges();
        (e[j] + e[j + 1]) / 2.0
    }

    /// Empirical Pr{next in bin j | current in bin k}; `None` when row `k`
    /// has no recorded transitions.
    pub fn row_distribution(&self, k: usize) -> Result<Option<Vec<f64>>> {
        if k >= self.binning.bin_count() {
            return Err(Error::domain(format!(
                "row {k} out of range for {} bins",
                self.binning.bin_count()
            )));
        }
        let row = self.matrix.row(k);
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Ok(None);
        }
        Ok(Some(row.iter().map(|n| *n as f64 / total as f64).collect()))
    }

    /// Interval for the next value at nominal level `1 - alpha`.
    ///
    /// Whole bins are trimmed from each end while the trimmed mass on that
    /// side stays within `alpha / 2`.
    pub fn interval_estimate(&self, alpha: f64) -> Result<PredictionInterval> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha {alpha} must lie in (0, 1)")));
        }
        let k = self
            .last_bin
            .ok_or_else(|| Error::InsufficientData("no observation yet".into()))?;
        let row = self.matrix.row(k);
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientData(format!("row {k} has no transitions")));
        }
        let (first, last, kept) = trim_tails(row, total, alpha);
        let edges = self.binning.edges();
        Ok(PredictionInterval {
            low: edges[first],
            high: edges[last + 1],
            nominal_level: 1.0 - alpha,
            retained_mass: kept as f64 / total as f64,
        })
    }
}

/// Returns the first and last kept bins and the kept count. A side may
/// shed a bin only if its cumulative trimmed count stays within
/// `alpha / 2 * total`; the comparison is done as `2 * trimmed <= alpha * total`.
fn trim_tails(row: &[u64], total: u64, alpha: f64) -> (usize, usize, u64) {
    let budget = alpha * total as f64;
    let within = |trimmed: u64| (2 * trimmed) as f64 <= budget;

    let mut first = 0;
    let mut left = 0;
    while first < row.len() - 1 && within(left + row[first]) {
        left += row[first];
        first += 1;
    }
    let mut last = row.len() - 1;
    let mut right = 0;
    while last > first && within(right + row[last]) {
        right += row[last];
        last -= 1;
    }
    (first, last, total - left - right)
}

impl Predictor for EcmPredictor {
    fn observe(&mut self, c: f64) {
        EcmPredictor::observe(self, c);
    }

    fn predict(&self) -> f64 {
        self.point_estimate()
    }
}
