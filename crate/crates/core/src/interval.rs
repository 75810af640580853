use serde::{Deserialize, Serialize};

/// A right-open interval `[lo, hi)` on one feature axis. Either end may be
/// infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// `(-inf, tau)`, the values satisfying `x < tau`.
    pub fn below(tau: f64) -> Self {
        Interval::new(f64::NEG_INFINITY, tau)
    }

    /// `[tau, inf)`, the values falsifying `x < tau`.
    pub fn at_or_above(tau: f64) -> Self {
        Interval::new(tau, f64::INFINITY)
    }

    /// True also when either end is NaN.
    pub fn is_empty(&self) -> bool {
        self.lo.partial_cmp(&self.hi) != Some(std::cmp::Ordering::Less)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// The point of the interval closest to `v`.
    ///
    /// Inside the interval that is `v` itself. Above it, the right border is
    /// not attainable and `hi - epsilon` is used instead, clamped to `lo` when
    /// the interval is narrower than `epsilon`.
    pub fn nearest_point(&self, v: f64, epsilon: f64) -> f64 {
        if self.contains(v) {
            v
        } else if v < self.lo {
            self.lo
        } else {
            (self.hi - epsilon).max(self.lo)
        }
    }
}

/// Interval number `i` (`0..=K`) of the partition induced by sorted
/// thresholds `t[0] < .. < t[K-1]`: `[t[i-1], t[i])` with infinite ends.
pub fn cell(thresholds: &[f64], i: usize) -> Interval {
    let lo = if i == 0 {
        f64::NEG_INFINITY
    } else {
        thresholds[i - 1]
    };
    let hi = thresholds.get(i).copied().unwrap_or(f64::INFINITY);
    Interval::new(lo, hi)
}

/// Index of the cell of `thresholds` containing `v`.
pub fn cell_of(thresholds: &[f64], v: f64) -> usize {
    thresholds.partition_point(|&t| t <= v)
}
