//! Vector-vector outer product and reduction for weight gradients:
//! `∇W_k = Σ_{(i,j,k)} G_out[i] ⊗ F_in[j]`.
//!
//! Mirrors the grouped MVMR schedule. Each worker keeps one `B_out` slice of
//! the upstream gradient, one `B_in` slice of the input features and one
//! `B_out × B_in` gradient accumulator; the accumulator is flushed into the
//! shared gradient only when `k` changes and at the end of the group.

use crate::cloud::{FeatureTensor, WeightTensor};
use crate::error::{Error, Result};
use crate::exec::{execute, AccessCounters, ExecConfig, ExecReport, Executor, Kernel, Sink};
use crate::scalar::Scalar;
use crate::triplets::TripletList;

/// Weight gradient stored output-major: `K × G × C_out_g × C_in_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradient<T> {
    values: Vec<T>,
    kernel_volume: usize,
    groups: usize,
    c_out: usize,
    c_in: usize,
}

impl<T: Scalar> WeightGradient<T> {
    pub fn zeros(kernel_volume: usize, groups: usize, c_out: usize, c_in: usize) -> Self {
        Self { values: vec![T::ZERO; kernel_volume * groups * c_out * c_in], kernel_volume, groups, c_out, c_in }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel_volume
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn get(&self, k: usize, g: usize, m: usize, c: usize) -> T {
        self.values[((k * self.groups + g) * self.c_out + m) * self.c_in + c]
    }

    /// Transposes into the `K × G × C_in_g × C_out_g` weight layout.
    pub fn to_weight_layout(&self) -> Result<WeightTensor<T>> {
        let t = (1..=self.kernel_volume).find(|t| t * t * t >= self.kernel_volume).unwrap_or(0);
        if t * t * t != self.kernel_volume {
            return Err(Error::Shape(format!("kernel volume {} is not a cube", self.kernel_volume)));
        }
        let mut values = vec![T::ZERO; self.values.len()];
        let block = self.c_out * self.c_in;
        for base in (0..self.values.len()).step_by(block.max(1)) {
            for m in 0..self.c_out {
                for c in 0..self.c_in {
                    values[base + c * self.c_out + m] = self.values[base + m * self.c_in + c];
                }
            }
        }
        WeightTensor::new(values, t, self.groups, self.c_in, self.c_out)
    }

    pub fn to_f64(&self) -> WeightGradient<f64> {
        WeightGradient {
            values: self.values.iter().map(|v| v.to_f64()).collect(),
            kernel_volume: self.kernel_volume,
            groups: self.groups,
            c_out: self.c_out,
            c_in: self.c_in,
        }
    }
}

struct Problem<'a, T> {
    /// `rows × G × M`
    g_out: &'a [T],
    /// `rows × G × C`
    f_in: &'a [T],
    triplets: &'a TripletList,
    kernel_volume: usize,
    groups: usize,
    m: usize,
    c: usize,
}

impl<T> Problem<'_, T> {
    #[inline]
    fn g_offset(&self, i: u32, g: usize) -> usize {
        (i as usize * self.groups + g) * self.m
    }

    #[inline]
    fn f_offset(&self, j: u32, g: usize) -> usize {
        (j as usize * self.groups + g) * self.c
    }

    #[inline]
    fn w_offset(&self, k: u32, g: usize) -> usize {
        (k as usize * self.groups + g) * self.m * self.c
    }

    fn output_len(&self) -> usize {
        self.kernel_volume * self.groups * self.m * self.c
    }
}

struct NaiveKernel<'a, T>(Problem<'a, T>);

impl<T: Scalar> Kernel<T> for NaiveKernel<'_, T> {
    type Scratch = (Vec<T>, Vec<T>, Vec<T>);

    fn units(&self) -> usize {
        self.0.triplets.len()
    }

    fn output_len(&self) -> usize {
        self.0.output_len()
    }

    fn scratch(&self) -> Self::Scratch {
        (vec![T::ZERO; self.0.m], vec![T::ZERO; self.0.c], vec![T::ZERO; self.0.c])
    }

    fn scratch_len(&self) -> usize {
        self.0.m + 2 * self.0.c
    }

    fn run_unit<S: Sink<T>>(&self, t: usize, (gv, fv, row): &mut Self::Scratch, sink: &mut S, n: &mut AccessCounters) {
        let p = &self.0;
        let (i, j, k) = p.triplets.get(t);
        for g in 0..p.groups {
            gv.copy_from_slice(&p.g_out[p.g_offset(i, g)..][..p.m]);
            fv.copy_from_slice(&p.f_in[p.f_offset(j, g)..][..p.c]);
            n.gout_reads += p.m as u64;
            n.fin_reads += p.c as u64;
            let base = p.w_offset(k, g);
            for (m, &gm) in gv.iter().enumerate() {
                for (r, &f) in row.iter_mut().zip(fv.iter()) {
                    *r = gm * f;
                }
                sink.add(base + m * p.c, row);
            }
            n.fout_atomic_writes += (p.m * p.c) as u64;
        }
    }
}

struct GroupedKernel<'a, T> {
    p: Problem<'a, T>,
    group_len: usize,
    block_out: usize,
    block_in: usize,
}

struct OuterScratch<T> {
    gv: Vec<T>,
    fv: Vec<T>,
    acc: Vec<T>,
}

impl<T: Scalar> GroupedKernel<'_, T> {
    #[inline]
    fn outer(s: &mut OuterScratch<T>, mw: usize, cw: usize, reset: bool) {
        for m in 0..mw {
            let gm = s.gv[m];
            let row = &mut s.acc[m * cw..(m + 1) * cw];
            if reset {
                for (a, &f) in row.iter_mut().zip(&s.fv[..cw]) {
                    *a = gm * f;
                }
            } else {
                for (a, &f) in row.iter_mut().zip(&s.fv[..cw]) {
                    *a += gm * f;
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn flush<S: Sink<T>>(&self, s: &OuterScratch<T>, sink: &mut S, k: u32, g: usize, m0: usize, mw: usize, c0: usize, cw: usize) {
        let base = self.p.w_offset(k, g);
        for m in 0..mw {
            sink.add(base + (m0 + m) * self.p.c + c0, &s.acc[m * cw..(m + 1) * cw]);
        }
    }
}

impl<T: Scalar> Kernel<T> for GroupedKernel<'_, T> {
    type Scratch = OuterScratch<T>;

    fn units(&self) -> usize {
        self.p.triplets.len().div_ceil(self.group_len)
    }

    fn output_len(&self) -> usize {
        self.p.output_len()
    }

    fn scratch(&self) -> Self::Scratch {
        OuterScratch {
            gv: vec![T::ZERO; self.block_out],
            fv: vec![T::ZERO; self.block_in],
            acc: vec![T::ZERO; self.block_out * self.block_in],
        }
    }

    fn scratch_len(&self) -> usize {
        self.block_out * self.block_in + self.block_in + self.block_out
    }

    fn run_unit<S: Sink<T>>(&self, unit: usize, s: &mut OuterScratch<T>, sink: &mut S, n: &mut AccessCounters) {
        let p = &self.p;
        let tl = p.triplets;
        let lo = unit * self.group_len;
        let hi = (lo + self.group_len).min(tl.len());
        for g in 0..p.groups {
            for m0 in (0..p.m).step_by(self.block_out) {
                let mw = self.block_out.min(p.m - m0);
                for c0 in (0..p.c).step_by(self.block_in) {
                    let cw = self.block_in.min(p.c - c0);
                    let (mut ci, mut cj, mut ck) = tl.get(lo);
                    s.gv[..mw].copy_from_slice(&p.g_out[p.g_offset(ci, g) + m0..][..mw]);
                    s.fv[..cw].copy_from_slice(&p.f_in[p.f_offset(cj, g) + c0..][..cw]);
                    n.gout_reads += mw as u64;
                    n.fin_reads += cw as u64;
                    Self::outer(s, mw, cw, true);
                    for t in lo + 1..hi {
                        let (i, j, k) = tl.get(t);
                        if i != ci {
                            ci = i;
                            s.gv[..mw].copy_from_slice(&p.g_out[p.g_offset(ci, g) + m0..][..mw]);
                            n.gout_reads += mw as u64;
                        }
                        if j != cj {
                            cj = j;
                            s.fv[..cw].copy_from_slice(&p.f_in[p.f_offset(cj, g) + c0..][..cw]);
                            n.fin_reads += cw as u64;
                        }
                        if k != ck {
                            self.flush(s, sink, ck, g, m0, mw, c0, cw);
                            n.fout_atomic_writes += (mw * cw) as u64;
                            ck = k;
                            Self::outer(s, mw, cw, true);
                        } else {
                            Self::outer(s, mw, cw, false);
                        }
                    }
                    self.flush(s, sink, ck, g, m0, mw, c0, cw);
                    n.fout_atomic_writes += (mw * cw) as u64;
                }
            }
        }
    }
}

/// Weight gradient with counters and the auxiliary-memory report.
pub fn vvor_report<T: Scalar>(
    g_out: &FeatureTensor<T>,
    f_in: &FeatureTensor<T>,
    triplets: &TripletList,
    kernel_volume: usize,
    cfg: &ExecConfig,
) -> Result<(WeightGradient<T>, ExecReport)> {
    cfg.validate()?;
    if g_out.groups() != f_in.groups() {
        return Err(Error::Shape(format!(
            "output gradients have {} groups, input features {}",
            g_out.groups(),
            f_in.groups()
        )));
    }
    triplets.validate(g_out.rows(), f_in.rows(), kernel_volume)?;
    let p = Problem {
        g_out: g_out.values(),
        f_in: f_in.values(),
        triplets,
        kernel_volume,
        groups: g_out.groups(),
        m: g_out.channels(),
        c: f_in.channels(),
    };
    let (values, report) = match cfg.executor {
        Executor::Naive => execute(&NaiveKernel(p), cfg),
        Executor::Grouped => execute(
            &GroupedKernel { p, group_len: cfg.group_len, block_out: cfg.block_out, block_in: cfg.block_in },
            cfg,
        ),
    };
    let grad = WeightGradient {
        values,
        kernel_volume,
        groups: g_out.groups(),
        c_out: g_out.channels(),
        c_in: f_in.channels(),
    };
    Ok((grad, report))
}

/// `∇W_k = Σ_{(i,j,k)} G_out[i] ⊗ F_in[j]`.
pub fn vvor<T: Scalar>(
    g_out: &FeatureTensor<T>,
    f_in: &FeatureTensor<T>,
    triplets: &TripletList,
    kernel_volume: usize,
    cfg: &ExecConfig,
) -> Result<(WeightGradient<T>, AccessCounters)> {
    vvor_report(g_out, f_in, triplets, kernel_volume, cfg).map(|(g, r)| (g, r.counters))
}
