use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// K×K transition counts with FIFO forgetting.
///
/// `counts[row][col]` counts transitions from an older observation in bin
/// `row` to the next observation in bin `col`. Every recorded transition is
/// also queued; once the grandsum reaches the cap, recording a new transition
/// first evicts the oldest queued one.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyMatrix {
    size: usize,
    counts: Vec<u64>,
    queue: VecDeque<(usize, usize)>,
    cap: Option<u64>,
}

impl ContingencyMatrix {
    /// `cap = None` keeps every transition ever recorded.
    pub fn new(size: usize, cap: Option<u64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::validation("matrix needs at least one bin"));
        }
        if cap == Some(0) {
            return Err(Error::validation("grandsum cap must be positive"));
        }
        Ok(Self {
            size,
            counts: vec![0; size * size],
            queue: VecDeque::new(),
            cap,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    pub fn grandsum(&self) -> u64 {
        self.queue.len() as u64
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.counts[row * self.size..(row + 1) * self.size]
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.row(row).iter().sum()
    }

    /// Recorded transitions, oldest first.
    pub fn events(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.queue.iter().copied()
    }

    pub fn record(&mut self, row: usize, col: usize) {
        assert!(row < self.size && col < self.size, "transition ({row}, {col}) out of range");
        if self.cap.is_some_and(|cap| self.grandsum() >= cap) {
            if let Some((r, c)) = self.queue.pop_front() {
                self.counts[r * self.size + c] -= 1;
            }
        }
        self.counts[row * self.size + col] += 1;
        self.queue.push_back((row, col));
    }

    /// Counts rebuilt from the event queue alone.
    pub fn replay(&self) -> Vec<u64> {
        let mut counts = vec![0; self.size * self.size];
        for (r, c) in self.events() {
            counts[r * self.size + c] += 1;
        }
        counts
    }

    pub fn counts_flat(&self) -> &[u64] {
        &self.counts
    }

    /// Snapshot text: a `K,<k>,grandsum,<g>,cap,<cap|inf>` header followed by
    /// K lines of K counts.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let cap = self.cap.map_or_else(|| "inf".to_string(), |c| c.to_string());
        let _ = writeln!(out, "K,{},grandsum,{},cap,{}", self.size, self.grandsum(), cap);
        for r in 0..self.size {
            let row: Vec<String> = self.row(r).iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses a snapshot. The snapshot does not carry insertion order, so the
    /// rebuilt queue lists transitions in row-major order; eviction after a
    /// reload therefore follows that order rather than the original one.
    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty matrix snapshot"))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 6 || fields[0] != "K" || fields[2] != "grandsum" || fields[4] != "cap" {
            return Err(Error::parse(1, "expected `K,<k>,grandsum,<g>,cap,<cap|inf>`"));
        }
        let size: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad K `{}`", fields[1])))?;
        let grandsum: u64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad grandsum `{}`", fields[3])))?;
        let cap = match fields[5] {
            "inf" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| Error::parse(1, format!("bad cap `{s}`")))?,
            ),
        };
        let mut matrix = Self::new(size, cap)?;
        let mut rows = 0;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if rows == size {
                return Err(Error::parse(line_no, "more rows than K"));
            }
            let row: Vec<u64> = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad count `{}`", c.trim())))
                })
                .collect::<Result<_>>()?;
            if row.len() != size {
                return Err(Error::parse(
                    line_no,
                    format!("row has {} counts, expected {size}", row.len()),
                ));
            }
            for (col, n) in row.into_iter().enumerate() {
                matrix.counts[rows * size + col] = n;
                matrix
                    .queue
                    .extend(std::iter::repeat_n((rows, col), n as usize));
            }
            rows += 1;
        }
        if rows != size {
            return Err(Error::parse(text.lines().count(), format!("found {rows} rows, expected {size}")));
        }
        if matrix.grandsum() != grandsum {
            return Err(Error::validation(format!(
                "header grandsum {grandsum} disagrees with counts total {}",
                matrix.grandsum()
            )));
        }
        if cap.is_some_and(|c| grandsum > c) {
            return Err(Error::validation("grandsum exceeds cap"));
        }
        Ok(matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction_hand_trace() {
        let mut m = ContingencyMatrix::new(2, Some(3)).unwrap();
        for (r, c) in [(0, 0), (0, 1), (1, 1), (0, 0)] {
            m.record(r, c);
        }
        assert_eq!(m.grandsum(), 3);
        assert_eq!(m.row(0), &[1, 1]);
        assert_eq!(m.row(1), &[0, 1]);
        assert_eq!(m.events().collect::<Vec<_>>(), vec![(0, 1), (1, 1), (0, 0)]);
    }

    #[test]
    fn eviction_can_hit_a_different_cell() {
        let mut m = ContingencyMatrix::new(2, Some(2)).unwrap();
        m.record(1, 0);
        m.record(0, 0);
        m.record(0, 0);
        assert_eq!(m.count(1, 0), 0);
        assert_eq!(m.count(0, 0), 2);
    }

    #[test]
    fn rejects_zero_cap() {
        assert!(ContingencyMatrix::new(3, Some(0)).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut m = ContingencyMatrix::new(3, Some(10)).unwrap();
        for (r, c) in [(0, 1), (1, 2), (2, 2), (2, 0), (1, 2)] {
            m.record(r, c);
        }
        let text = m.to_snapshot();
        assert!(text.starts_with("K,3,grandsum,5,cap,10\n0,1,0\n0,0,2\n1,0,1\n"));
        let back = ContingencyMatrix::from_snapshot(&text).unwrap();
        assert_eq!(back.counts_flat(), m.counts_flat());
        assert_eq!(back.grandsum(), 5);
        assert_eq!(back.cap(), Some(10));
        assert_eq!(back.replay(), back.counts_flat());
    }

    #[test]
    fn unbounded_snapshot_header() {
        let m = ContingencyMatrix::new(2, None).unwrap();
        assert_eq!(m.to_snapshot(), "K,2,grandsum,0,cap,inf\n0,0\n0,0\n");
        assert_eq!(ContingencyMatrix::from_snapshot(&m.to_snapshot()).unwrap().cap(), None);
    }

    #[test]
    fn snapshot_errors() {
        assert!(ContingencyMatrix::from_snapshot("").is_err());
        assert!(ContingencyMatrix::from_snapshot("K,2,grandsum,1,cap,inf\n1,0\n").is_err());
        assert!(ContingencyMatrix::from_snapshot("K,2,grandsum,2,cap,inf\n1,0\n0,0\n").is_err());
        assert!(ContingencyMatrix::from_snapshot("K,2,grandsum,1,cap,inf\n1,x\n0,0\n").is_err());
    }
}
