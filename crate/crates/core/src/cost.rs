//! Closed-form memory-access predictions for the two executors and the
//! expected number of distinct kernel indices per sorted group.
//!
//! Counts are scalar elements for a single channel group. For `G` groups
//! multiply by `G` and pass per-group channel counts.

use crate::error::{Error, Result};

/// Per-triplet traffic: the whole weight matrix, one input row and one
/// atomically written output row, `|T|·(C_out·C_in + C_in + C_out)`.
pub fn predict_access_naive(triplets: u64, c_in: u64, c_out: u64) -> u64 {
    triplets * (c_out * c_in + c_in + c_out)
}

/// Grouped traffic assuming one weight-matrix load per group:
/// `⌈|T|/L⌉·(C_out·C_in + L·C_in + L·C_out)`.
pub fn predict_access_grouped(triplets: u64, group_len: u64, c_in: u64, c_out: u64) -> u64 {
    assert!(group_len >= 1, "group length must be >= 1");
    triplets.div_ceil(group_len) * (c_out * c_in + group_len * c_in + group_len * c_out)
}

/// Weight-read share of [`predict_access_grouped`] scaled by the expected
/// distinct-`k` count per group: `⌈|T|/L⌉·(1 + L·K/|T|)·C_out·C_in`.
pub fn predict_weight_reads_grouped(triplets: u64, group_len: u64, kernels: u64, c_in: u64, c_out: u64) -> f64 {
    let unique = 1.0 + (group_len * kernels) as f64 / triplets as f64;
    triplets.div_ceil(group_len) as f64 * unique * (c_out * c_in) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniqueEstimate {
    /// `1 + (L−1)·[(K·(1−(1−1/K)^|T|) − 1) / (|T| − 1)]`
    pub closed_form: f64,
    /// `1 + L·K/|T|`, meaningful when `K ≪ |T|`.
    pub approximation: f64,
}

/// Expected distinct kernel indices in one group of `L` consecutive
/// triplets after sorting `|T|` uniform draws over `K` kernels.
pub fn expected_unique_per_group(kernels: u64, triplets: u64, group_len: u64) -> Result<UniqueEstimate> {
    if kernels < 1 || triplets < 2 || group_len < 1 || group_len > triplets {
        return Err(Error::Domain(format!(
            "need K >= 1, |T| >= 2, 1 <= L <= |T|; got K={kernels}, |T|={triplets}, L={group_len}"
        )));
    }
    let k = kernels as f64;
    let t = triplets as f64;
    let l = group_len as f64;
    // expected number of kernels hit at least once over |T| draws
    let occupied = k * (1.0 - (1.0 - 1.0 / k).powf(t));
    Ok(UniqueEstimate {
        closed_form: 1.0 + (l - 1.0) * ((occupied - 1.0) / (t - 1.0)),
        approximation: 1.0 + l * k / t,
    })
}
