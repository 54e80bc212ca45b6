//! Slow, literal reference computations used to check the engines.
//!
//! Everything here runs single-threaded in double precision and shares no
//! code with the executors, the neighbor search or the cost model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{FeatureTensor, PointCloud, WeightTensor};
use crate::error::{Error, Result};
use crate::spatial::NeighborList;
use crate::triplets::TripletList;

/// Forward output and, when upstream gradients were supplied, both gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOracleResult {
    /// `N_out × G × C_out_g`
    pub f_out: Vec<f64>,
    /// `N_in × G × C_in_g`
    pub grad_in: Option<Vec<f64>>,
    /// `K × G × C_out_g × C_in_g`
    pub grad_w: Option<Vec<f64>>,
}

/// Evaluates the convolution sum and its gradients by direct summation over
/// the triplets in list order.
pub fn dense_conv_oracle(
    w: &WeightTensor<f64>,
    f_in: &FeatureTensor<f64>,
    triplets: &TripletList,
    n_out: usize,
    g_out: Option<&FeatureTensor<f64>>,
) -> Result<DenseOracleResult> {
    let groups = w.groups();
    let c_in = w.c_in();
    let c_out = w.c_out();
    let kernels = w.kernel_volume();
    let n_in = f_in.rows();
    for t in 0..triplets.len() {
        let (i, j, k) = (triplets.i[t] as usize, triplets.j[t] as usize, triplets.k[t] as usize);
        if i >= n_out || j >= n_in || k >= kernels {
            return Err(Error::Index { index: t, detail: format!("({i}, {j}, {k})") });
        }
    }
    let fv = f_in.values();
    let wv = w.values();
    let mut f_out = vec![0.0; n_out * groups * c_out];
    for t in 0..triplets.len() {
        let (i, j, k) = (triplets.i[t] as usize, triplets.j[t] as usize, triplets.k[t] as usize);
        for g in 0..groups {
            for m in 0..c_out {
                let mut s = 0.0;
                for c in 0..c_in {
                    s += wv[((k * groups + g) * c_in + c) * c_out + m] * fv[(j * groups + g) * c_in + c];
                }
                f_out[(i * groups + g) * c_out + m] += s;
            }
        }
    }
    let (grad_in, grad_w) = match g_out {
        None => (None, None),
        Some(go) => {
            if go.rows() != n_out || go.channels() != c_out || go.groups() != groups {
                return Err(Error::Shape("upstream gradient shape does not match the output".into()));
            }
            let gv = go.values();
            let mut gi = vec![0.0; n_in * groups * c_in];
            let mut gw = vec![0.0; kernels * groups * c_out * c_in];
            for t in 0..triplets.len() {
                let (i, j, k) = (triplets.i[t] as usize, triplets.j[t] as usize, triplets.k[t] as usize);
                for g in 0..groups {
                    for c in 0..c_in {
                        let mut s = 0.0;
                        for m in 0..c_out {
                            s += wv[((k * groups + g) * c_in + c) * c_out + m] * gv[(i * groups + g) * c_out + m];
                        }
                        gi[(j * groups + g) * c_in + c] += s;
                    }
                    for m in 0..c_out {
                        for c in 0..c_in {
                            gw[((k * groups + g) * c_out + m) * c_in + c] +=
                                gv[(i * groups + g) * c_out + m] * fv[(j * groups + g) * c_in + c];
                        }
                    }
                }
            }
            (Some(gi), Some(gw))
        }
    };
    Ok(DenseOracleResult { f_out, grad_in, grad_w })
}

/// Central-difference gradients of `L = ⟨G_out, F_out⟩` with respect to every
/// input-feature and weight entry, evaluating `F_out` with
/// [`dense_conv_oracle`]. Returned in the layouts of `∇F_in` and `∇W`.
pub fn finite_difference_gradients(
    w: &WeightTensor<f64>,
    f_in: &FeatureTensor<f64>,
    triplets: &TripletList,
    g_out: &FeatureTensor<f64>,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_out = g_out.rows();
    let loss = |w: &WeightTensor<f64>, f: &FeatureTensor<f64>| -> Result<f64> {
        let out = dense_conv_oracle(w, f, triplets, n_out, None)?.f_out;
        Ok(out.iter().zip(g_out.values()).map(|(a, b)| a * b).sum())
    };
    let mut f = f_in.clone();
    let mut grad_in = vec![0.0; f.values().len()];
    for (e, g) in grad_in.iter_mut().enumerate() {
        let x = f.values()[e];
        f.values_mut()[e] = x + h;
        let up = loss(w, &f)?;
        f.values_mut()[e] = x - h;
        let down = loss(w, &f)?;
        f.values_mut()[e] = x;
        *g = (up - down) / (2.0 * h);
    }
    let (groups, c_in, c_out) = (w.groups(), w.c_in(), w.c_out());
    let mut wp = w.clone();
    let mut grad_w = vec![0.0; w.values().len()];
    for k in 0..w.kernel_volume() {
        for g in 0..groups {
            for c in 0..c_in {
                for m in 0..c_out {
                    let e = ((k * groups + g) * c_in + c) * c_out + m;
                    let x = wp.values()[e];
                    wp.values_mut()[e] = x + h;
                    let up = loss(&wp, f_in)?;
                    wp.values_mut()[e] = x - h;
                    let down = loss(&wp, f_in)?;
                    wp.values_mut()[e] = x;
                    grad_w[((k * groups + g) * c_out + m) * c_in + c] = (up - down) / (2.0 * h);
                }
            }
        }
    }
    Ok((grad_in, grad_w))
}

/// `max |a − b| / max |b|`, or `max |a − b|` when `b` is all zeros.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "compared vectors differ in length");
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// All-pairs Euclidean test, closed at `r`, restricted to matching batches.
pub fn brute_radius_oracle(queries: &PointCloud, targets: &PointCloud, r: f64) -> NeighborList {
    let qb = queries.batch_ids();
    let tb = targets.batch_ids();
    let r2 = r * r;
    let mut per_query = Vec::with_capacity(queries.len());
    for (q, a) in queries.positions().iter().enumerate() {
        let mut row = Vec::new();
        for (t, b) in targets.positions().iter().enumerate() {
            if qb[q] != tb[t] {
                continue;
            }
            let d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
            if d2 <= r2 {
                row.push(t as u32);
            }
        }
        per_query.push(row);
    }
    NeighborList::from_per_query(per_query, r)
}

/// Sample mean of distinct values per group, and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniqueSample {
    pub mean: f64,
    pub std_error: f64,
}

fn mean_unique_per_group(sorted: &[u32], group_len: usize) -> f64 {
    let mut total = 0usize;
    let mut groups = 0usize;
    for chunk in sorted.chunks(group_len) {
        total += 1 + chunk.windows(2).filter(|w| w[0] != w[1]).count();
        groups += 1;
    }
    total as f64 / groups as f64
}

fn check_unique_args(kernels: usize, triplets: usize, group_len: usize) -> Result<()> {
    if kernels == 0 || triplets == 0 || group_len == 0 || group_len > triplets {
        return Err(Error::Domain(format!(
            "need K >= 1, |T| >= 1, 1 <= L <= |T|; got K={kernels}, |T|={triplets}, L={group_len}"
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate: draw `|T|` kernel indices uniformly, sort them,
/// cut consecutive groups of `L` (last one ragged) and average the distinct
/// count per group.
pub fn unique_k_simulator(
    kernels: usize,
    triplets: usize,
    group_len: usize,
    trials: usize,
    seed: u64,
) -> Result<UniqueSample> {
    check_unique_args(kernels, triplets, group_len)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = vec![0u32; triplets];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for d in draws.iter_mut() {
            *d = rng.random_range(0..kernels as u32);
        }
        draws.sort_unstable();
        let m = mean_unique_per_group(&draws, group_len);
        sum += m;
        sum_sq += m * m;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    Ok(UniqueSample { mean, std_error: (var / n).sqrt() })
}

/// Exact expectation by enumerating all `K^|T|` draw sequences.
pub fn unique_k_exhaustive(kernels: usize, triplets: usize, group_len: usize) -> Result<f64> {
    check_unique_args(kernels, triplets, group_len)?;
    let count = (kernels as u64).checked_pow(triplets as u32).filter(|&c| c <= 1 << 24).ok_or_else(|| {
        Error::Domain(format!("{kernels}^{triplets} sequences is too many to enumerate"))
    })?;
    let mut digits = vec![0u32; triplets];
    let mut sorted = vec![0u32; triplets];
    let mut total = 0.0;
    for _ in 0..count {
        sorted.copy_from_slice(&digits);
        sorted.sort_unstable();
        total += mean_unique_per_group(&sorted, group_len);
        for d in digits.iter_mut() {
            *d += 1;
            if (*d as usize) < kernels {
                break;
            }
            *d = 0;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_passthrough_and_empty() {
        let w = WeightTensor::new(vec![1.0, 0.0, 0.0, 1.0], 1, 1, 2, 2).unwrap();
        let f = FeatureTensor::new(vec![3.0, 4.0], 1, 1, 2).unwrap();
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap();
        assert_eq!(dense_conv_oracle(&w, &f, &t, 1, None).unwrap().f_out, vec![3.0, 4.0]);
        let e = TripletList::empty(3, 1, 1);
        assert_eq!(dense_conv_oracle(&w, &f, &e, 3, None).unwrap().f_out, vec![0.0; 6]);
    }

    #[test]
    fn oracle_rejects_bad_index() {
        let w = WeightTensor::<f64>::zeros(1, 1, 1, 1).unwrap();
        let f = FeatureTensor::<f64>::zeros(1, 1, 1);
        let t = TripletList { j: vec![1], ..TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap() };
        assert!(matches!(dense_conv_oracle(&w, &f, &t, 1, None), Err(Error::Index { .. })));
    }

    #[test]
    fn oracle_gradients_small() {
        // W_0 = [[1, 2], [3, 4]] (rows = C_out), stored C_in-major
        let w = WeightTensor::new(vec![1.0, 3.0, 2.0, 4.0], 1, 1, 2, 2).unwrap();
        let f = FeatureTensor::new(vec![3.0, 4.0], 1, 1, 2).unwrap();
        let g = FeatureTensor::new(vec![1.0, 1.0], 1, 1, 2).unwrap();
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap();
        let r = dense_conv_oracle(&w, &f, &t, 1, Some(&g)).unwrap();
        assert_eq!(r.f_out, vec![11.0, 25.0]);
        assert_eq!(r.grad_in.unwrap(), vec![4.0, 6.0]);
        assert_eq!(r.grad_w.unwrap(), vec![3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn finite_differences_match_closed_form() {
        let w = WeightTensor::new(vec![1.0, 3.0, 2.0, 4.0], 1, 1, 2, 2).unwrap();
        let f = FeatureTensor::new(vec![3.0, 4.0], 1, 1, 2).unwrap();
        let g = FeatureTensor::new(vec![1.0, 1.0], 1, 1, 2).unwrap();
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap();
        let (gi, gw) = finite_difference_gradients(&w, &f, &t, &g, 1e-6).unwrap();
        assert!(max_rel_error(&gi, &[4.0, 6.0]) < 1e-7);
        assert!(max_rel_error(&gw, &[3.0, 4.0, 3.0, 4.0]) < 1e-7);
        assert_eq!(max_rel_error(&[0.5], &[0.0]), 0.5);
    }

    #[test]
    fn brute_radius_cases() {
        let c = PointCloud::from_positions(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let n = brute_radius_oracle(&c, &c, 1.5);
        assert_eq!(n.neighbors(1), &[0, 1, 2]);
        let empty = PointCloud::from_positions(vec![]).unwrap();
        assert!(brute_radius_oracle(&c, &empty, 1.0).is_empty());
        let dup = PointCloud::from_positions(vec![[0.0; 3], [0.0; 3], [1e-9, 0.0, 0.0]]).unwrap();
        assert_eq!(brute_radius_oracle(&dup, &dup, 0.0).neighbors(0), &[0, 1]);
    }

    #[test]
    fn unique_simulator_trivial_cases() {
        assert_eq!(unique_k_simulator(1, 50, 7, 10, 1).unwrap().mean, 1.0);
        assert_eq!(unique_k_simulator(27, 50, 1, 10, 1).unwrap().mean, 1.0);
        assert_eq!(unique_k_exhaustive(2, 4, 2).unwrap(), 1.25);
        assert!(unique_k_simulator(0, 5, 1, 1, 0).is_err());
        assert!(unique_k_simulator(2, 5, 1, 0, 0).is_err());
        assert!(unique_k_exhaustive(10, 10, 2).is_err());
    }
}
