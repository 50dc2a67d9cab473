//! Empirical CDFs and nearest-rank percentiles.

use crate::error::{Error, Result};

/// Right-continuous empirical CDF: the i-th smallest value (1-based) is
/// paired with probability `i / n`.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

/// Nearest-rank percentile: the `⌈p n⌉`-th smallest value.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidFraction(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

fn nearest_rank(p: f64, n: usize) -> usize {
    // absorb representation error in p so that e.g. 0.07 * 100 ranks 7, not 8
    let rank = (p * n as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, n)
}
