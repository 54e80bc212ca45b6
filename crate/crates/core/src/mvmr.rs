//! Matrix-vector multiplication and reduction over a triplet list:
//! `F_out[i] += W_k × F_in[j]` for every `(i, j, k)`, per group.
//!
//! The naive executor treats each triplet as an independent work item that
//! loads its whole weight matrix and input row and atomically adds the full
//! output row. The grouped executor walks groups of `L` consecutive triplets
//! and, for each `B_out × B_in` tile of the weight matrix, keeps one weight
//! tile, one input slice and one output accumulator in worker scratch. A
//! weight tile is reloaded only when `k` changes, an input slice only when
//! `j` changes, and the accumulator is flushed only when `i` changes, so a
//! list sorted by `k` touches each weight matrix about once per group.

use crate::cloud::{FeatureTensor, WeightTensor};
use crate::error::{Error, Result};
use crate::exec::{execute, simd_available, AccessCounters, ExecConfig, ExecReport, Executor, Kernel, Sink};
use crate::scalar::Scalar;
use crate::triplets::TripletList;

/// Index-role-agnostic MVMR problem, the shape of the fused GPU kernel:
/// `out[o_idx[t]] += a[a_idx[t]] × b[b_idx[t]]`.
struct Problem<'a, T> {
    /// `K × G × C × M`
    weights: &'a [T],
    w_idx: &'a [u32],
    /// `rows × G × C`
    input: &'a [T],
    in_idx: &'a [u32],
    out_idx: &'a [u32],
    n_out: usize,
    groups: usize,
    c: usize,
    m: usize,
}

impl<T> Problem<'_, T> {
    fn len(&self) -> usize {
        self.out_idx.len()
    }

    #[inline]
    fn w_offset(&self, k: u32, g: usize) -> usize {
        (k as usize * self.groups + g) * self.c * self.m
    }

    #[inline]
    fn in_offset(&self, j: u32, g: usize) -> usize {
        (j as usize * self.groups + g) * self.c
    }

    #[inline]
    fn out_offset(&self, i: u32, g: usize) -> usize {
        (i as usize * self.groups + g) * self.m
    }
}

/// `acc + a·b`, fused when the caller was compiled with FMA.
#[inline(always)]
fn madd<T: Scalar, const FUSED: bool>(acc: T, a: T, b: T) -> T {
    if FUSED {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

#[inline(always)]
fn axpy<T: Scalar, const FUSED: bool>(acc: &mut [T], row: &[T], f: T) {
    for (a, &w) in acc.iter_mut().zip(row) {
        *a = madd::<T, FUSED>(*a, w, f);
    }
}

struct NaiveKernel<'a, T>(Problem<'a, T>);

impl<T: Scalar> Kernel<T> for NaiveKernel<'_, T> {
    type Scratch = (Vec<T>, Vec<T>);

    fn units(&self) -> usize {
        self.0.len()
    }

    fn output_len(&self) -> usize {
        self.0.n_out * self.0.groups * self.0.m
    }

    fn scratch(&self) -> Self::Scratch {
        (vec![T::ZERO; self.0.c], vec![T::ZERO; self.0.m])
    }

    fn scratch_len(&self) -> usize {
        self.0.c + self.0.m
    }

    fn run_unit<S: Sink<T>>(&self, t: usize, scratch: &mut Self::Scratch, sink: &mut S, n: &mut AccessCounters) {
        #[cfg(target_arch = "x86_64")]
        if simd_available() {
            // SAFETY: AVX2 and FMA support were checked at runtime.
            return unsafe { self.unit_avx2(t, scratch, sink, n) };
        }
        self.unit_body::<S, false>(t, scratch, sink, n)
    }
}

impl<T: Scalar> NaiveKernel<'_, T> {
    #[inline(always)]
    fn unit_body<S: Sink<T>, const FUSED: bool>(&self, t: usize, (fin, acc): &mut (Vec<T>, Vec<T>), sink: &mut S, n: &mut AccessCounters) {
        let p = &self.0;
        let (i, j, k) = (p.out_idx[t], p.in_idx[t], p.w_idx[t]);
        for g in 0..p.groups {
            let src = p.in_offset(j, g);
            fin.copy_from_slice(&p.input[src..src + p.c]);
            let w = &p.weights[p.w_offset(k, g)..][..p.c * p.m];
            acc.fill(T::ZERO);
            for (c, &f) in fin.iter().enumerate() {
                axpy::<T, FUSED>(acc, &w[c * p.m..(c + 1) * p.m], f);
            }
            sink.add(p.out_offset(i, g), acc);
            n.fin_reads += p.c as u64;
            n.w_reads += (p.c * p.m) as u64;
            n.fout_atomic_writes += p.m as u64;
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    fn unit_avx2<S: Sink<T>>(&self, t: usize, scratch: &mut (Vec<T>, Vec<T>), sink: &mut S, n: &mut AccessCounters) {
        self.unit_body::<S, true>(t, scratch, sink, n)
    }
}

struct GroupedKernel<'a, T> {
    p: Problem<'a, T>,
    group_len: usize,
    block_out: usize,
    block_in: usize,
}

/// Triplets sharing one weight tile per micro-kernel call.
const NB: usize = 4;
/// Output lanes per register block.
const MB: usize = 16;

/// Per-worker stand-in for on-chip registers.
struct TileScratch<T> {
    tile: Vec<T>,
    acc: Vec<T>,
    /// `NB` tile products, `B_out` apart.
    prod: Vec<T>,
}

/// `prod[q·mw + m] = Σ_c tile[c·mw + m] · fins[q][c]` for every `q < NB`.
#[inline(always)]
fn tile_products<T: Scalar, const FUSED: bool>(tile: &[T], mw: usize, cw: usize, fins: [&[T]; NB], prod: &mut [T]) {
    let tile = &tile[..mw * cw];
    let fins = fins.map(|f| &f[..cw]);
    let mut mb = 0;
    while mb + MB <= mw {
        let mut acc = [[T::ZERO; MB]; NB];
        for c in 0..cw {
            let row: &[T; MB] = tile[c * mw + mb..c * mw + mb + MB].try_into().unwrap();
            for q in 0..NB {
                let f = fins[q][c];
                for l in 0..MB {
                    acc[q][l] = madd::<T, FUSED>(acc[q][l], row[l], f);
                }
            }
        }
        for q in 0..NB {
            prod[q * mw + mb..q * mw + mb + MB].copy_from_slice(&acc[q]);
        }
        mb += MB;
    }
    for m in mb..mw {
        for q in 0..NB {
            let mut a = T::ZERO;
            for c in 0..cw {
                a = madd::<T, FUSED>(a, tile[c * mw + m], fins[q][c]);
            }
            prod[q * mw + m] = a;
        }
    }
}

impl<T: Scalar> GroupedKernel<'_, T> {
    #[inline(always)]
    fn load_tile(&self, tile: &mut [T], k: u32, g: usize, m0: usize, mw: usize, c0: usize, cw: usize) {
        let p = &self.p;
        let base = p.w_offset(k, g);
        for c in 0..cw {
            let src = base + (c0 + c) * p.m + m0;
            tile[c * mw..(c + 1) * mw].copy_from_slice(&p.weights[src..src + mw]);
        }
    }

    /// One `(g, m-tile, c-tile)` pass over triplets `lo..hi`.
    #[inline(always)]
    #[allow(clippy::too_many_arguments)]
    fn tile_pass<S: Sink<T>, const FUSED: bool>(
        &self,
        lo: usize,
        hi: usize,
        g: usize,
        (m0, mw): (usize, usize),
        (c0, cw): (usize, usize),
        s: &mut TileScratch<T>,
        sink: &mut S,
        n: &mut AccessCounters,
    ) {
        let p = &self.p;
        let fin = |j: u32| &p.input[p.in_offset(j, g) + c0..][..cw];
        let mut ci = p.out_idx[lo];
        let mut cj = None;
        s.acc[..mw].fill(T::ZERO);
        let mut run = lo;
        while run < hi {
            let k = p.w_idx[run];
            let end = run + p.w_idx[run..hi].iter().position(|&x| x != k).unwrap_or(hi - run);
            self.load_tile(&mut s.tile, k, g, m0, mw, c0, cw);
            n.w_reads += (mw * cw) as u64;
            for chunk in (run..end).step_by(NB) {
                let real = NB.min(end - chunk);
                let fins: [&[T]; NB] = std::array::from_fn(|q| fin(p.in_idx[chunk + q.min(real - 1)]));
                tile_products::<T, FUSED>(&s.tile, mw, cw, fins, &mut s.prod);
                for q in 0..real {
                    let (i, j) = (p.out_idx[chunk + q], p.in_idx[chunk + q]);
                    if cj != Some(j) {
                        cj = Some(j);
                        n.fin_reads += cw as u64;
                    }
                    let prod = &s.prod[q * mw..(q + 1) * mw];
                    if i != ci {
                        sink.add(p.out_offset(ci, g) + m0, &s.acc[..mw]);
                        n.fout_atomic_writes += mw as u64;
                        ci = i;
                        s.acc[..mw].copy_from_slice(prod);
                    } else {
                        s.acc[..mw].iter_mut().zip(prod).for_each(|(a, &b)| *a += b);
                    }
                }
            }
            run = end;
        }
        sink.add(p.out_offset(ci, g) + m0, &s.acc[..mw]);
        n.fout_atomic_writes += mw as u64;
    }

    #[inline(always)]
    fn unit_body<S: Sink<T>, const FUSED: bool>(&self, unit: usize, s: &mut TileScratch<T>, sink: &mut S, n: &mut AccessCounters) {
        let p = &self.p;
        let lo = unit * self.group_len;
        let hi = (lo + self.group_len).min(p.len());
        for g in 0..p.groups {
            for m0 in (0..p.m).step_by(self.block_out) {
                let mw = self.block_out.min(p.m - m0);
                for c0 in (0..p.c).step_by(self.block_in) {
                    let cw = self.block_in.min(p.c - c0);
                    self.tile_pass::<S, FUSED>(lo, hi, g, (m0, mw), (c0, cw), s, sink, n);
                }
            }
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    fn unit_avx2<S: Sink<T>>(&self, unit: usize, s: &mut TileScratch<T>, sink: &mut S, n: &mut AccessCounters) {
        self.unit_body::<S, true>(unit, s, sink, n)
    }
}

impl<T: Scalar> Kernel<T> for GroupedKernel<'_, T> {
    type Scratch = TileScratch<T>;

    fn units(&self) -> usize {
        self.p.len().div_ceil(self.group_len)
    }

    fn output_len(&self) -> usize {
        self.p.n_out * self.p.groups * self.p.m
    }

    fn scratch(&self) -> Self::Scratch {
        TileScratch {
            tile: vec![T::ZERO; self.block_out * self.block_in],
            acc: vec![T::ZERO; self.block_out],
            prod: vec![T::ZERO; NB * self.block_out],
        }
    }

    fn scratch_len(&self) -> usize {
        self.block_out * self.block_in + (NB + 1) * self.block_out
    }

    fn run_unit<S: Sink<T>>(&self, unit: usize, s: &mut TileScratch<T>, sink: &mut S, n: &mut AccessCounters) {
        #[cfg(target_arch = "x86_64")]
        if simd_available() {
            // SAFETY: AVX2 and FMA support were checked at runtime.
            return unsafe { self.unit_avx2(unit, s, sink, n) };
        }
        self.unit_body::<S, false>(unit, s, sink, n)
    }
}

fn run<T: Scalar>(p: Problem<'_, T>, cfg: &ExecConfig) -> (Vec<T>, ExecReport) {
    match cfg.executor {
        Executor::Naive => execute(&NaiveKernel(p), cfg),
        Executor::Grouped => execute(
            &GroupedKernel { p, group_len: cfg.group_len, block_out: cfg.block_out, block_in: cfg.block_in },
            cfg,
        ),
    }
}

/// Forward pass `F_out[i] = Σ W_k × F_in[j]`, with access counters and the
/// auxiliary-memory report.
pub fn mvmr_report<T: Scalar>(
    w: &WeightTensor<T>,
    f_in: &FeatureTensor<T>,
    triplets: &TripletList,
    n_out: usize,
    cfg: &ExecConfig,
) -> Result<(FeatureTensor<T>, ExecReport)> {
    cfg.validate()?;
    if f_in.groups() != w.groups() || f_in.channels() != w.c_in() {
        return Err(Error::Shape(format!(
            "features are G={} C={}, weights expect G={} C_in={}",
            f_in.groups(),
            f_in.channels(),
            w.groups(),
            w.c_in()
        )));
    }
    triplets.validate(n_out, f_in.rows(), w.kernel_volume())?;
    let p = Problem {
        weights: w.values(),
        w_idx: &triplets.k,
        input: f_in.values(),
        in_idx: &triplets.j,
        out_idx: &triplets.i,
        n_out,
        groups: w.groups(),
        c: w.c_in(),
        m: w.c_out(),
    };
    let (out, report) = run(p, cfg);
    Ok((FeatureTensor::from_raw(out, n_out, w.groups(), w.c_out()), report))
}

/// Forward pass `F_out[i] = Σ_{(i,j,k)} W_k × F_in[j]`.
pub fn mvmr<T: Scalar>(
    w: &WeightTensor<T>,
    f_in: &FeatureTensor<T>,
    triplets: &TripletList,
    n_out: usize,
    cfg: &ExecConfig,
) -> Result<(FeatureTensor<T>, AccessCounters)> {
    mvmr_report(w, f_in, triplets, n_out, cfg).map(|(f, r)| (f, r.counters))
}

/// Input gradient `∇F_in[j] = Σ W_kᵀ × G_out[i]`: the forward engine run on
/// transposed weights with the index roles of `i` and `j` exchanged.
pub fn mvmr_transposed_report<T: Scalar>(
    w: &WeightTensor<T>,
    g_out: &FeatureTensor<T>,
    triplets: &TripletList,
    n_in: usize,
    cfg: &ExecConfig,
) -> Result<(FeatureTensor<T>, ExecReport)> {
    cfg.validate()?;
    if g_out.groups() != w.groups() || g_out.channels() != w.c_out() {
        return Err(Error::Shape(format!(
            "output gradients are G={} C={}, weights produce G={} C_out={}",
            g_out.groups(),
            g_out.channels(),
            w.groups(),
            w.c_out()
        )));
    }
    triplets.validate(g_out.rows(), n_in, w.kernel_volume())?;
    let wt = w.transposed();
    let p = Problem {
        weights: wt.values(),
        w_idx: &triplets.k,
        input: g_out.values(),
        in_idx: &triplets.i,
        out_idx: &triplets.j,
        n_out: n_in,
        groups: w.groups(),
        c: w.c_out(),
        m: w.c_in(),
    };
    let (out, mut report) = run(p, cfg);
    report.aux_scalars += wt.values().len();
    Ok((FeatureTensor::from_raw(out, n_in, w.groups(), w.c_in()), report))
}

pub fn mvmr_transposed<T: Scalar>(
    w: &WeightTensor<T>,
    g_out: &FeatureTensor<T>,
    triplets: &TripletList,
    n_in: usize,
    cfg: &ExecConfig,
) -> Result<(FeatureTensor<T>, AccessCounters)> {
    mvmr_transposed_report(w, g_out, triplets, n_in, cfg).map(|(f, r)| (f, r.counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triplets::{sort_triplets, SortAxis};

    fn configs() -> Vec<ExecConfig> {
        let mut v = Vec::new();
        for executor in [Executor::Naive, Executor::Grouped] {
            for deterministic in [false, true] {
                v.push(ExecConfig { executor, deterministic, workers: 2, ..ExecConfig::default() });
            }
        }
        v.push(ExecConfig::grouped().with_group_len(1).with_blocks(1, 1).with_workers(1));
        v.push(ExecConfig::grouped().with_group_len(3).with_blocks(2, 3).with_workers(3));
        v
    }

    #[test]
    fn identity_kernel_passthrough() {
        let w = WeightTensor::new(vec![1.0, 0.0, 0.0, 1.0], 1, 1, 2, 2).unwrap();
        let f = FeatureTensor::new(vec![3.0, 4.0], 1, 1, 2).unwrap();
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap();
        for cfg in configs() {
            let (out, _) = mvmr(&w, &f, &t, 1, &cfg).unwrap();
            assert_eq!(out.values(), &[3.0, 4.0]);
        }
    }

    #[test]
    fn pure_reduction() {
        let w = WeightTensor::new(vec![1.0, 0.0, 0.0, 1.0], 1, 1, 2, 2).unwrap();
        let f = FeatureTensor::new(vec![1.0, 2.0, 3.0, 4.0], 2, 1, 2).unwrap();
        let t = TripletList::new(vec![0, 0], vec![0, 1], vec![0, 0], 1, 2, 1).unwrap();
        for cfg in configs() {
            let (out, _) = mvmr(&w, &f, &t, 1, &cfg).unwrap();
            assert_eq!(out.values(), &[4.0, 6.0]);
        }
    }

    #[test]
    fn transposed_single_product() {
        // W_0 rows are output channels: [[1, 2], [3, 4]], stored C_in-major
        let w = WeightTensor::new(vec![1.0, 3.0, 2.0, 4.0], 1, 1, 2, 2).unwrap();
        let g = FeatureTensor::new(vec![1.0, 1.0], 1, 1, 2).unwrap();
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 1, 1).unwrap();
        for cfg in configs() {
            let (grad, _) = mvmr_transposed(&w, &g, &t, 1, &cfg).unwrap();
            assert_eq!(grad.values(), &[4.0, 6.0]);
        }
    }

    #[test]
    fn empty_triplets_give_zeros() {
        let w = WeightTensor::<f64>::zeros(3, 2, 3, 4).unwrap();
        let f = FeatureTensor::<f64>::random(5, 2, 3, 1);
        let g = FeatureTensor::<f64>::random(4, 2, 4, 2);
        let t = TripletList::empty(4, 5, 27);
        for cfg in configs() {
            let (out, n) = mvmr(&w, &f, &t, 4, &cfg).unwrap();
            assert!(out.values().iter().all(|&v| v == 0.0));
            assert_eq!(out.rows(), 4);
            assert_eq!(n, AccessCounters::default());
            let (grad, _) = mvmr_transposed(&w, &g, &t, 5, &cfg).unwrap();
            assert!(grad.values().iter().all(|&v| v == 0.0));
            assert_eq!(grad.rows(), 5);
        }
    }

    #[test]
    fn naive_counters_follow_per_triplet_cost() {
        let w = WeightTensor::<f64>::zeros(1, 1, 4, 8).unwrap();
        let f = FeatureTensor::<f64>::zeros(3, 1, 4);
        let t = TripletList::new(vec![0; 10], (0..10).map(|x| x % 3).collect(), vec![0; 10], 1, 3, 1).unwrap();
        let (_, n) = mvmr(&w, &f, &t, 1, &ExecConfig::naive().with_workers(2)).unwrap();
        assert_eq!(n.w_reads + n.fin_reads + n.fout_atomic_writes, 440);
    }

    #[test]
    fn grouped_sorted_reads_each_weight_once_per_group() {
        let w = WeightTensor::<f64>::zeros(3, 1, 4, 8).unwrap();
        let f = FeatureTensor::<f64>::zeros(50, 1, 4);
        let k: Vec<u32> = (0..100).map(|x| (x * 7 % 27) as u32).collect();
        let t = TripletList::new((0..100).map(|x| x % 50).collect(), (0..100).map(|x| x % 50).collect(), k, 50, 50, 27)
            .unwrap();
        let sorted = sort_triplets(&t, SortAxis::ByK);
        let cfg = ExecConfig::grouped().with_group_len(10).with_workers(1);
        let (_, n) = mvmr(&w, &f, &sorted, 50, &cfg).unwrap();
        let unique: u64 = sorted
            .k
            .chunks(10)
            .map(|c| {
                let mut v = c.to_vec();
                v.dedup();
                v.len() as u64
            })
            .sum();
        assert_eq!(n.w_reads, unique * 32);
    }

    #[test]
    fn rejects_bad_shapes_and_indices() {
        let w = WeightTensor::<f64>::zeros(1, 1, 2, 2).unwrap();
        let f = FeatureTensor::<f64>::zeros(2, 1, 3);
        let t = TripletList::new(vec![0], vec![0], vec![0], 1, 2, 1).unwrap();
        assert!(matches!(mvmr(&w, &f, &t, 1, &ExecConfig::default()), Err(Error::Shape(_))));
        let f = FeatureTensor::<f64>::zeros(2, 1, 2);
        assert!(matches!(mvmr(&w, &f, &t, 0, &ExecConfig::default()), Err(Error::Index { .. })));
        let bad_k = TripletList { k: vec![1], ..t.clone() };
        assert!(matches!(mvmr(&w, &f, &bad_k, 1, &ExecConfig::default()), Err(Error::Index { .. })));
        let bad_j = TripletList { j: vec![2], ..t };
        assert!(matches!(mvmr(&w, &f, &bad_j, 1, &ExecConfig::default()), Err(Error::Index { .. })));
    }
}
