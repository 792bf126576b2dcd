use crate::detectors::GlobalProcess;
use crate::error::{LsnError, Result};

/// A local window `(s, k, e)` with 1-based inclusive endpoints: the split `k`
/// separates the subsamples `{x_s..x_k}` and `{x_{k+1}..x_e}`.
///
/// A structurally valid window satisfies `1 <= s <= k < e`; whether it fits a
/// particular series (`e <= n`) is checked at the point of use. Symmetric
/// windows have `k - s = e - k - 1 = d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    start: usize,
    split: usize,
    end: usize,
}

impl Window {
    pub fn new(start: usize, split: usize, end: usize) -> Result<Self> {
        if start < 1 {
            return Err(LsnError::InvalidWindow {
                start,
                split,
                end,
                reason: "start must be >= 1",
            });
        }
        if !(start <= split && split < end) {
            return Err(LsnError::InvalidWindow {
                start,
                split,
                end,
                reason: "need s <= k < e",
            });
        }
        Ok(Window { start, split, end })
    }

    /// The symmetric window `(k - d, k, k + 1 + d)`; `None` when `k <= d`
    /// would push the start below 1, or `d = 0` gives no room on the left.
    pub fn symmetric(split: usize, half_width: usize) -> Option<Self> {
        if split <= half_width {
            return None;
        }
        Some(Window {
            start: split - half_width,
            split,
            end: split + 1 + half_width,
        })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// `e - s + 1`
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `k - s + 1`, the size of the left subsample.
    pub fn left_len(&self) -> usize {
        self.split - self.start + 1
    }

    /// `e - k`, the size of the right subsample.
    pub fn right_len(&self) -> usize {
        self.end - self.split
    }

    pub fn fits(&self, n: usize) -> bool {
        self.end <= n
    }

    pub fn require_fits(&self, n: usize) -> Result<()> {
        if self.fits(n) {
            Ok(())
        } else {
            Err(LsnError::InvalidWindow {
                start: self.start,
                split: self.split,
                end: self.end,
                reason: "window extends past the end of the series",
            })
        }
    }
}

/// Running sums of a change-detecting process `Y(0..n)`: values, squares, and
/// index-weighted values. Entry `k` holds the sum over `i = 1..=k`, with
/// entry 0 equal to 0, so any contiguous range reduces to one subtraction.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    sum_weighted: Vec<f64>,
}

impl PrefixSums {
    /// Build from raw process values `y[0..=n]` (with `y[0] = 0`).
    pub fn from_values(y: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(y.len());
        let mut sum_sq = Vec::with_capacity(y.len());
        let mut sum_weighted = Vec::with_capacity(y.len());
        sum.push(0.0);
        sum_sq.push(0.0);
        sum_weighted.push(0.0);
        for (i, &v) in y.iter().enumerate().skip(1) {
            sum.push(sum[i - 1] + v);
            sum_sq.push(sum_sq[i - 1] + v * v);
            sum_weighted.push(sum_weighted[i - 1] + i as f64 * v);
        }
        PrefixSums {
            sum,
            sum_sq,
            sum_weighted,
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn sums(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.sum, &self.sum_sq, &self.sum_weighted)
    }

    /// `sum_{i=a+1}^{b} Y(i)`
    pub fn range_sum(&self, a: usize, b: usize) -> f64 {
        self.sum[b] - self.sum[a]
    }

    /// `sum_{i=a+1}^{b} Y(i)^2`
    pub fn range_sum_sq(&self, a: usize, b: usize) -> f64 {
        self.sum_sq[b] - self.sum_sq[a]
    }

    /// `sum_{i=a+1}^{b} i * Y(i)`
    pub fn range_sum_weighted(&self, a: usize, b: usize) -> f64 {
        self.sum_weighted[b] - self.sum_weighted[a]
    }
}

/// Prefix sums of a global change-detecting process, the bookkeeping that
/// makes every local window statistic an O(1) evaluation.
pub fn build_prefix_sums(process: &GlobalProcess) -> PrefixSums {
    PrefixSums::from_values(process.values())
}
