use serde::{Deserialize, Serialize};

use super::SearchError;

/// Lower bound (exclusive) of the similarity measure, `1 / sqrt(3)`.
pub const K_MIN: f64 = 0.577_350_269_189_625_8;

// Absorbs representation error when a real threshold is compared with, or
// rounded to, an integer.
const EPS: f64 = 1e-9;

pub fn validate_k(k: f64) -> Result<(), SearchError> {
    if k.is_finite() && k > K_MIN && k <= 1.0 {
        Ok(())
    } else {
        Err(SearchError::InvalidK(k))
    }
}

/// Phase-1 threshold `|p| (1/k + 1) (1 - k^2)`.
pub fn k_di(pattern_len: usize, k: f64) -> f64 {
    pattern_len as f64 * (1.0 / k + 1.0) * (1.0 - k * k)
}

/// Conservative variant `2 |p| (1 - k^2) / k`, never below [`k_di`].
pub fn k_di_strict(pattern_len: usize, k: f64) -> f64 {
    2.0 * pattern_len as f64 * (1.0 - k * k) / k
}

/// Sliding-window length `ceil(|p| / k)`.
pub fn window_len(pattern_len: usize, k: f64) -> usize {
    (pattern_len as f64 / k - EPS).ceil().max(0.0) as usize
}

/// Inclusive range of sub-fragment lengths tried while shrinking:
/// `floor(k |p|) ..= ceil(|p| / k)`, never below one symbol.
pub fn shrink_lengths(pattern_len: usize, k: f64) -> (usize, usize) {
    let lo = ((k * pattern_len as f64 + EPS).floor() as usize).max(1);
    (lo, window_len(pattern_len, k))
}

/// Switches for the five optimizations of the basic algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Optimizations {
    /// Skip window positions during the scan that provably cannot qualify.
    #[serde(rename = "opt1")]
    pub scan_skip: bool,
    /// Same skip rule while shrinking, per sub-fragment width.
    #[serde(rename = "opt2")]
    pub shrink_skip: bool,
    /// Keep one representative per cluster of overlapping results.
    #[serde(rename = "opt3")]
    pub cluster_overlaps: bool,
    /// Extend results outward to whole tokens.
    #[serde(rename = "opt4")]
    pub extend_to_words: bool,
    /// Memoize distances and shrink candidates in parallel with shared rows.
    #[serde(rename = "opt5")]
    pub reuse_and_parallelize: bool,
}

impl Default for Optimizations {
    fn default() -> Self {
        Self::all()
    }
}

impl Optimizations {
    pub const fn all() -> Self {
        Optimizations {
            scan_skip: true,
            shrink_skip: true,
            cluster_overlaps: true,
            extend_to_words: true,
            reuse_and_parallelize: true,
        }
    }

    pub const fn none() -> Self {
        Optimizations {
            scan_skip: false,
            shrink_skip: false,
            cluster_overlaps: false,
            extend_to_words: false,
            reuse_and_parallelize: false,
        }
    }

    /// Builds from a 5-bit mask, bit 0 being the scan skip.
    pub fn from_mask(mask: u8) -> Self {
        Optimizations {
            scan_skip: mask & 1 != 0,
            shrink_skip: mask & 2 != 0,
            cluster_overlaps: mask & 4 != 0,
            extend_to_words: mask & 8 != 0,
            reuse_and_parallelize: mask & 16 != 0,
        }
    }
}

/// Similarity measure plus everything derived from it for one pattern length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: f64,
    pub pattern_len: usize,
    pub strict_threshold: bool,
    pub exclude_self: bool,
    pub optimizations: Optimizations,
}

impl SearchParams {
    pub fn new(k: f64, pattern_len: usize) -> Result<Self, SearchError> {
        validate_k(k)?;
        Ok(SearchParams {
            k,
            pattern_len,
            strict_threshold: false,
            exclude_self: false,
            optimizations: Optimizations::all(),
        })
    }

    pub fn with_optimizations(mut self, optimizations: Optimizations) -> Self {
        self.optimizations = optimizations;
        self
    }

    pub fn with_strict_threshold(mut self, strict: bool) -> Self {
        self.strict_threshold = strict;
        self
    }

    pub fn with_exclude_self(mut self, exclude: bool) -> Self {
        self.exclude_self = exclude;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        validate_k(self.k)
    }

    pub fn window_len(&self) -> usize {
        window_len(self.pattern_len, self.k)
    }

    /// The real-valued threshold in effect.
    pub fn k_di(&self) -> f64 {
        if self.strict_threshold {
            k_di_strict(self.pattern_len, self.k)
        } else {
            k_di(self.pattern_len, self.k)
        }
    }

    /// Largest integer distance accepted by the scan.
    pub fn threshold(&self) -> usize {
        (self.k_di() + EPS).floor().max(0.0) as usize
    }

    pub fn shrink_lengths(&self) -> (usize, usize) {
        shrink_lengths(self.pattern_len, self.k)
    }
}
