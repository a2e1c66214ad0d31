//! Change detection and change alignment. A detection window of
//! (arm, reward) samples is split into halves; for each probe arm the
//! half-means of `m[a][i]·reward` estimate that arm's mean return under the
//! design, so a large half-to-half shift on any probe arm signals a context
//! change. The same statistic compares a fresh window against archived ones
//! to recognize a previously seen context.

use std::collections::VecDeque;

/// Largest shift, over probe arms, between the mean of `m[a][i]·reward` on
/// `second` and on `first`. Returns infinity when either side is empty: an
/// empty half can certify nothing, so callers treat it as a detection.
pub fn half_shift_statistic(
    first: &[(usize, f64)],
    second: &[(usize, f64)],
    m_table: &[Vec<f64>],
) -> f64 {
    if first.is_empty() || second.is_empty() {
        return f64::INFINITY;
    }
    let probes = m_table.len();
    (0..probes)
        .map(|i| {
            let mean = |half: &[(usize, f64)]| {
                half.iter().map(|&(a, y)| m_table[a][i] * y).sum::<f64>() / half.len() as f64
            };
            (mean(second) - mean(first)).abs()
        })
        .fold(0.0, f64::max)
}

/// Detection statistic of one even-length window: the window splits at its
/// midpoint and the halves are compared. With equal halves this equals
/// `max_i |(2/W)·(Σ_second − Σ_first) m[a_s][i]·y_s|`.
pub fn lcd_statistic(window: &[(usize, f64)], m_table: &[Vec<f64>]) -> f64 {
    assert!(
        window.len().is_multiple_of(2),
        "detection window must split evenly"
    );
    let (first, second) = window.split_at(window.len() / 2);
    half_shift_statistic(first, second, m_table)
}

/// Whether the window trips the detector at threshold `b` (strict).
pub fn lcd(window: &[(usize, f64)], m_table: &[Vec<f64>], b: f64) -> bool {
    lcd_statistic(window, m_table) > b
}

/// Bounded store of detection samples with a monotone push count, retaining
/// the most recent `capacity` entries since the last clear.
#[derive(Debug, Clone)]
pub struct CdBuffer {
    samples: VecDeque<(usize, f64)>,
    capacity: usize,
    total: u64,
}

impl CdBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(
            capacity >= 2 && capacity.is_multiple_of(2),
            "capacity must be even"
        );
        Self {
            samples: VecDeque::with_capacity(capacity + 1),
            capacity,
            total: 0,
        }
    }

    pub fn push(&mut self, arm: usize, reward: f64) {
        self.samples.push_back((arm, reward));
        if self.samples.len() > self.capacity {
            self.samples.pop_front();
        }
        self.total += 1;
    }

    /// Pushes since construction or the last clear, including evicted ones.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.samples.clear();
        self.total = 0;
    }

    /// Retained samples, oldest first.
    pub fn window(&self) -> Vec<(usize, f64)> {
        self.samples.iter().copied().collect()
    }
}

/// Incremental detector over a sliding window of `capacity` samples. Keeps
/// per-probe-arm half-sum differences up to date in O(K) per push instead of
/// rescanning the window, with a periodic full recompute to stop float drift
/// from accumulating.
#[derive(Debug, Clone)]
pub struct LcdMonitor {
    m_table: Vec<Vec<f64>>,
    window: VecDeque<(usize, f64)>,
    capacity: usize,
    /// For each probe arm i: Σ_second m[a][i]·y − Σ_first m[a][i]·y.
    diffs: Vec<f64>,
    total: u64,
    since_recompute: u32,
}

const RECOMPUTE_PERIOD: u32 = 1024;

impl LcdMonitor {
    pub fn new(m_table: Vec<Vec<f64>>, capacity: usize) -> Self {
        assert!(
            capacity >= 2 && capacity.is_multiple_of(2),
            "capacity must be even"
        );
        let probes = m_table.len();
        assert!(
            m_table.iter().all(|row| row.len() == probes),
            "cross-inverse table must be square"
        );
        Self {
            m_table,
            window: VecDeque::with_capacity(capacity + 1),
            capacity,
            diffs: vec![0.0; probes],
            total: 0,
            since_recompute: 0,
        }
    }

    pub fn push(&mut self, arm: usize, reward: f64) {
        self.total += 1;
        if self.window.len() < self.capacity {
            self.window.push_back((arm, reward));
            if self.window.len() == self.capacity {
                self.recompute();
            }
            return;
        }
        let old = self.window.pop_front().expect("window is full");
        // The element at the half boundary crosses from the second half to
        // the first, flipping its sign in the difference.
        let mid = self.window[self.capacity / 2 - 1];
        self.window.push_back((arm, reward));
        for (i, diff) in self.diffs.iter_mut().enumerate() {
            *diff += self.m_table[old.0][i] * old.1 - 2.0 * self.m_table[mid.0][i] * mid.1
                + self.m_table[arm][i] * reward;
        }
        self.since_recompute += 1;
        if self.since_recompute >= RECOMPUTE_PERIOD {
            self.recompute();
        }
    }

    fn recompute(&mut self) {
        let half = self.capacity / 2;
        for (i, diff) in self.diffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (pos, &(a, y)) in self.window.iter().enumerate() {
                let signed = if pos < half { -1.0 } else { 1.0 };
                acc += signed * self.m_table[a][i] * y;
            }
            *diff = acc;
        }
        self.since_recompute = 0;
    }

    /// Pushes since construction or the last clear, including evicted ones.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.window.clear();
        self.diffs.iter_mut().for_each(|d| *d = 0.0);
        self.total = 0;
        self.since_recompute = 0;
    }

    /// Detection statistic once the window is full.
    pub fn statistic(&self) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        let scale = 2.0 / self.capacity as f64;
        Some(
            self.diffs
                .iter()
                .map(|d| (scale * d).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn fires(&self, b: f64) -> bool {
        self.statistic().map(|s| s > b).unwrap_or(false)
    }
}

/// Archive of per-context sample windows used to re-identify the context
/// after a detected change. Matching compares half-means: a fresh window
/// aligns with an archived one when their shift stays at or below the
/// detection threshold.
#[derive(Debug, Clone, Default)]
pub struct CaArchive {
    entries: Vec<Vec<(usize, f64)>>,
}

impl CaArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &[(usize, f64)] {
        &self.entries[index]
    }

    /// Matches `fresh` against archived windows in insertion order. The
    /// first entry whose shift against `fresh` does not exceed `b` is
    /// refreshed in place and its index returned; if every entry trips the
    /// detector, `fresh` becomes a new entry.
    pub fn align(&mut self, fresh: Vec<(usize, f64)>, m_table: &[Vec<f64>], b: f64) -> usize {
        for (j, entry) in self.entries.iter_mut().enumerate() {
            if half_shift_statistic(entry, &fresh, m_table) <= b {
                *entry = fresh;
                return j;
            }
        }
        self.entries.push(fresh);
        self.entries.len() - 1
    }

    /// Stores samples as a new entry without matching, for windows that
    /// never reached a full comparison.
    pub fn append(&mut self, samples: Vec<(usize, f64)>) -> usize {
        self.entries.push(samples);
        self.entries.len() - 1
    }
}
