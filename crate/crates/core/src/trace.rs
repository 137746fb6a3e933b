//! Available-bandwidth traces.
//!
//! A trace is a piecewise-constant bandwidth function: sample `k`'s bandwidth
//! holds on `[t_k, t_{k+1})` and the last sample holds until `end_time`.
//! Units are abstract data-units per second.
//!
//! The text format is one `time,bandwidth` pair per line. Lines starting with
//! `#` are comments, and a leading `time,bandwidth` header is skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub time: f64,
    pub bandwidth: f64,
}

impl ThroughputSample {
    pub fn new(time: f64, bandwidth: f64) -> Self {
        Self { time, bandwidth }
    }
}

/// Result of pushing a transfer through a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transfer {
    /// The transfer finished at this absolute time.
    Completed(f64),
    /// The trace ended first; `delivered` data-units made it through.
    Incomplete { delivered: f64 },
}

impl Transfer {
    pub fn completion(self) -> Option<f64> {
        match self {
            Transfer::Completed(t) => Some(t),
            Transfer::Incomplete { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputTrace {
    samples: Vec<ThroughputSample>,
    end_time: f64,
}

impl ThroughputTrace {
    pub fn new(samples: Vec<ThroughputSample>, end_time: f64) -> Result<Self> {
        validate_samples(&samples)?;
        let last = samples[samples.len() - 1].time;
        if !end_time.is_finite() || end_time < last {
            return Err(Error::validation(format!(
                "end time {end_time} precedes last sample at {last}"
            )));
        }
        if end_time <= 0.0 {
            return Err(Error::validation("trace has zero duration"));
        }
        Ok(Self { samples, end_time })
    }

    /// Builds a trace whose end time is the last sample time plus the median
    /// gap between samples. A single-sample trace lasts one second.
    pub fn from_samples(samples: Vec<ThroughputSample>) -> Result<Self> {
        validate_samples(&samples)?;
        let last = samples[samples.len() - 1].time;
        let end_time = last + median_gap(&samples).unwrap_or(1.0);
        Self::new(samples, end_time)
    }

    pub fn samples(&self) -> &[ThroughputSample] {
        &self.samples
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    /// Index of the segment covering `t`, i.e. the last sample with `time <= t`.
    fn segment_at(&self, t: f64) -> usize {
        self.samples.partition_point(|s| s.time <= t).saturating_sub(1)
    }

    fn segment_end(&self, idx: usize) -> f64 {
        self.samples
            .get(idx + 1)
            .map_or(self.end_time, |s| s.time)
    }

    /// Bandwidth in effect at time `t`, or `None` outside `[0, end_time)`.
    pub fn bandwidth_at(&self, t: f64) -> Option<f64> {
        if !(0.0..self.end_time).contains(&t) {
            return None;
        }
        Some(self.samples[self.segment_at(t)].bandwidth)
    }

    /// Walks the bandwidth function segment by segment from `start` until
    /// `size` data-units have been delivered.
    pub fn transfer_completion(&self, start: f64, size: f64) -> Result<Transfer> {
        if !(0.0..self.end_time).contains(&start) {
            return Err(Error::domain(format!(
                "transfer start {start} outside [0, {})",
                self.end_time
            )));
        }
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::domain(format!("transfer size {size} must be positive")));
        }

        let mut idx = self.segment_at(start);
        let mut now = start;
        let mut remaining = size;
        loop {
            let bandwidth = self.samples[idx].bandwidth;
            let seg_end = self.segment_end(idx);
            let capacity = bandwidth * (seg_end - now);
            if remaining <= capacity {
                return Ok(Transfer::Completed(now + remaining / bandwidth));
            }
            remaining -= capacity;
            now = seg_end;
            idx += 1;
            if idx == self.samples.len() {
                return Ok(Transfer::Incomplete {
                    delivered: size - remaining,
                });
            }
        }
    }

    /// Integral of bandwidth over `[from, to]`, clipped to the trace span.
    pub fn delivered_between(&self, from: f64, to: f64) -> f64 {
        let from = from.max(0.0);
        let to = to.min(self.end_time);
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        let mut idx = self.segment_at(from);
        let mut now = from;
        while now < to && idx < self.samples.len() {
            let seg_end = self.segment_end(idx).min(to);
            total += self.samples[idx].bandwidth * (seg_end - now);
            now = seg_end;
            idx += 1;
        }
        total
    }

    pub fn min_bandwidth(&self) -> f64 {
        self.samples.iter().map(|s| s.bandwidth).fold(f64::INFINITY, f64::min)
    }

    pub fn max_bandwidth(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.bandwidth)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Renders the trace in the CSV text format. Values use the shortest
    /// decimal form that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 16 + 16);
        out.push_str("time,bandwidth\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{}", s.time, s.bandwidth);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn validate_samples(samples: &[ThroughputSample]) -> Result<()> {
    let first = samples
        .first()
        .ok_or_else(|| Error::validation("trace has no samples"))?;
    if first.time != 0.0 {
        return Err(Error::validation(format!(
            "first sample must be at time 0, found {}",
            first.time
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        if !s.time.is_finite() || s.time < 0.0 {
            return Err(Error::validation(format!("sample {i}: bad time {}", s.time)));
        }
        if !(s.bandwidth > 0.0) || !s.bandwidth.is_finite() {
            return Err(Error::validation(format!(
                "sample {i}: bandwidth {} must be positive",
                s.bandwidth
            )));
        }
    }
    if let Some(w) = samples.windows(2).position(|w| w[1].time <= w[0].time) {
        return Err(Error::validation(format!(
            "sample {}: time {} does not increase past {}",
            w + 1,
            samples[w + 1].time,
            samples[w].time
        )));
    }
    Ok(())
}

fn median_gap(samples: &[ThroughputSample]) -> Option<f64> {
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].time - w[0].time).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    Some(if gaps.len().is_multiple_of(2) {
        (gaps[mid - 1] + gaps[mid]) / 2.0
    } else {
        gaps[mid]
    })
}

/// Parses the trace CSV format. Errors carry 1-based line numbers.
pub fn parse_trace(text: &str) -> Result<ThroughputTrace> {
    let mut samples = Vec::new();
    let mut seen_data = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_data && is_header(line) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let (time, bandwidth) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(line_no, "expected `time,bandwidth`"))?;
        let time: f64 = time
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad time `{}`", time.trim())))?;
        let bandwidth: f64 = bandwidth.trim().parse().map_err(|_| {
            Error::parse(line_no, format!("bad bandwidth `{}`", bandwidth.trim()))
        })?;
        samples.push(ThroughputSample::new(time, bandwidth));
    }
    ThroughputTrace::from_samples(samples)
}

fn is_header(line: &str) -> bool {
    let mut cols = line.split(',').map(|c| c.trim().to_ascii_lowercase());
    matches!(
        (cols.next().as_deref(), cols.next().as_deref(), cols.next()),
        (Some("time"), Some("bandwidth"), None)
    )
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ThroughputTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text)
}

/// Parameters of a synthetic Markov-modulated bandwidth trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTraceSpec {
    pub state_bandwidths: Vec<f64>,
    /// Row-stochastic; `transition_matrix[i][j]` is Pr{next = j | current = i}.
    pub transition_matrix: Vec<Vec<f64>>,
    pub sample_interval: f64,
    pub duration: f64,
    /// Half-width of the multiplicative uniform noise.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl SyntheticTraceSpec {
    /// Two states that each persist with probability `persistence`.
    pub fn two_state(
        high: f64,
        low: f64,
        persistence: f64,
        sample_interval: f64,
        duration: f64,
        noise_fraction: f64,
        seed: u64,
    ) -> Self {
        let switch = 1.0 - persistence;
        Self {
            state_bandwidths: vec![high, low],
            transition_matrix: vec![vec![persistence, switch], vec![switch, persistence]],
            sample_interval,
            duration,
            noise_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_bandwidths.len();
        if n == 0 {
            return Err(Error::validation("at least one state is required"));
        }
        if let Some(b) = self
            .state_bandwidths
            .iter()
            .find(|b| !(**b > 0.0) || !b.is_finite())
        {
            return Err(Error::validation(format!("state bandwidth {b} must be positive")));
        }
        if self.transition_matrix.len() != n {
            return Err(Error::validation(format!(
                "transition matrix has {} rows for {n} states",
                self.transition_matrix.len()
            )));
        }
        for (i, row) in self.transition_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "transition row {i} has {} entries for {n} states",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::validation(format!("transition row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("transition row {i} sums to {sum}")));
            }
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            return Err(Error::validation("sample interval must be positive"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::validation("duration must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::validation(format!(
                "noise fraction {} must lie in [0, 1)",
                self.noise_fraction
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        // Tolerance keeps e.g. 3.0 / 1.0 from rounding up to 4 samples.
        ((self.duration / self.sample_interval) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Walks the state chain from state 0, emitting one noisy sample per interval.
pub fn synth_markov_trace(spec: &SyntheticTraceSpec) -> Result<ThroughputTrace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = spec.sample_count();
    let mut samples = Vec::with_capacity(count);
    let mut state = 0usize;
    for i in 0..count {
        let u = if spec.noise_fraction > 0.0 {
            rng.gen_range(-spec.noise_fraction..=spec.noise_fraction)
        } else {
            0.0
        };
        let time = i as f64 * spec.sample_interval;
        samples.push(ThroughputSample::new(time, spec.state_bandwidths[state] * (1.0 + u)));
        state = next_state(&spec.transition_matrix[state], rng.gen::<f64>());
    }
    ThroughputTrace::new(samples, spec.duration)
}

fn next_state(row: &[f64], draw: f64) -> usize {
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if draw < acc {
            return j;
        }
    }
    // Rounding can leave `acc` a hair under 1; land on the last reachable state.
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(bw: f64, end: f64) -> ThroughputTrace {
        ThroughputTrace::new(vec![ThroughputSample::new(0.0, bw)], end).unwrap()
    }

    #[test]
    fn parses_three_samples_with_median_gap_end() {
        let t = parse_trace("0,1000\n1,500\n2,750").unwrap();
        assert_eq!(t.samples().len(), 3);
        assert_eq!(t.end_time(), 3.0);
        assert_eq!(t.samples()[1], ThroughputSample::new(1.0, 500.0));
    }

    #[test]
    fn header_comments_and_crlf() {
        let t = parse_trace("# captured somewhere\r\ntime,bandwidth\r\n0,10\r\n0.5,20\r\n").unwrap();
        assert_eq!(t.samples().len(), 2);
        assert_eq!(t.end_time(), 1.0);
    }

    #[test]
    fn median_gap_uses_middle_of_sorted_gaps() {
        let t = parse_trace("0,1\n1,1\n3,1\n4,1\n9,1").unwrap();
        // gaps 1,2,1,5 -> sorted 1,1,2,5 -> median 1.5
        assert_eq!(t.end_time(), 10.5);
    }

    #[test]
    fn rejects_non_increasing_time() {
        assert!(matches!(parse_trace("0,1000\n0,900"), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_non_positive_bandwidth() {
        assert!(matches!(parse_trace("0,-5"), Err(Error::Validation(_))));
        assert!(matches!(parse_trace("0,0"), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse_trace("0,1\n# note\n1;2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_trace("0,1\n1,abc") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_trace_not_starting_at_zero() {
        assert!(matches!(parse_trace("1,5\n2,5"), Err(Error::Validation(_))));
    }

    #[test]
    fn transfer_on_constant_bandwidth() {
        let t = constant(1000.0, 10.0);
        assert_eq!(t.transfer_completion(0.0, 500.0).unwrap(), Transfer::Completed(0.5));
    }

    #[test]
    fn transfer_across_two_segments() {
        let t = ThroughputTrace::new(
            vec![ThroughputSample::new(0.0, 1000.0), ThroughputSample::new(1.0, 500.0)],
            5.0,
        )
        .unwrap();
        let done = t.transfer_completion(0.5, 750.0).unwrap().completion().unwrap();
        assert!((done - 1.5).abs() < 1e-12);
    }

    #[test]
    fn transfer_truncated_at_end() {
        let t = constant(100.0, 1.0);
        match t.transfer_completion(0.9, 1000.0).unwrap() {
            Transfer::Incomplete { delivered } => assert!((delivered - 10.0).abs() < 1e-9),
            other => panic!("expected incomplete, got {other:?}"),
        }
    }

    #[test]
    fn transfer_start_outside_trace_is_domain_error() {
        let t = constant(100.0, 1.0);
        assert!(matches!(t.transfer_completion(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(t.transfer_completion(-0.1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(t.transfer_completion(0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bandwidth_lookup_is_left_closed() {
        let t = parse_trace("0,1\n1,2\n2,3").unwrap();
        assert_eq!(t.bandwidth_at(0.999), Some(1.0));
        assert_eq!(t.bandwidth_at(1.0), Some(2.0));
        assert_eq!(t.bandwidth_at(2.5), Some(3.0));
        assert_eq!(t.bandwidth_at(3.0), None);
    }

    #[test]
    fn single_state_synth_is_constant() {
        let spec = SyntheticTraceSpec {
            state_bandwidths: vec![1000.0],
            transition_matrix: vec![vec![1.0]],
            sample_interval: 1.0,
            duration: 3.0,
            noise_fraction: 0.0,
            seed: 7,
        };
        let t = synth_markov_trace(&spec).unwrap();
        let expected: Vec<_> = (0..3).map(|i| ThroughputSample::new(i as f64, 1000.0)).collect();
        assert_eq!(t.samples(), &expected[..]);
        assert_eq!(t.end_time(), 3.0);
    }

    #[test]
    fn identity_transitions_stay_in_state_zero() {
        let spec = SyntheticTraceSpec {
            state_bandwidths: vec![1000.0, 200.0],
            transition_matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            sample_interval: 0.5,
            duration: 50.0,
            noise_fraction: 0.0,
            seed: 3,
        };
        let t = synth_markov_trace(&spec).unwrap();
        assert_eq!(t.samples().len(), 100);
        assert!(t.samples().iter().all(|s| s.bandwidth == 1000.0));
    }

    #[test]
    fn synth_rejects_bad_specs() {
        let mut spec = SyntheticTraceSpec::two_state(1000.0, 200.0, 0.9, 1.0, 10.0, 1.0, 0);
        assert!(matches!(synth_markov_trace(&spec), Err(Error::Validation(_))));
        spec.noise_fraction = 0.1;
        spec.transition_matrix[0] = vec![0.5, 0.4];
        assert!(matches!(synth_markov_trace(&spec), Err(Error::Validation(_))));
        spec.transition_matrix[0] = vec![0.5, 0.5];
        spec.sample_interval = 0.0;
        assert!(matches!(synth_markov_trace(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = SyntheticTraceSpec::two_state(1000.0, 200.0, 0.9, 0.1, 20.0, 0.3, 11);
        let t = synth_markov_trace(&spec).unwrap();
        let back = parse_trace(&t.to_csv()).unwrap();
        assert_eq!(back.samples(), t.samples());
    }
}
