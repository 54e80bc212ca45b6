//! Execution configuration, access accounting and the parallel driver shared
//! by the MVMR and VVOR engines.
//!
//! A kernel exposes independent work units (one triplet for the naive
//! executor, one group of `L` consecutive triplets for the grouped one) and
//! writes its results through a [`Sink`]. The driver runs units either
//! against a shared atomic output, or, in deterministic mode, against a
//! fixed number of private partial outputs that are merged by a pairwise
//! tree in a fixed order. The partition depends only on the unit count, so
//! deterministic results do not depend on the worker count.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Range};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of private partial outputs in deterministic mode.
pub const DETERMINISTIC_SEGMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Executor {
    /// One work unit per triplet; every triplet reloads its weight matrix.
    Naive,
    /// One work unit per group of `L` sorted triplets, tiled `B_out × B_in`.
    Grouped,
}

impl Executor {
    pub fn as_str(self) -> &'static str {
        match self {
            Executor::Naive => "naive",
            Executor::Grouped => "grouped",
        }
    }
}

impl fmt::Display for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Executor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Executor::Naive),
            "grouped" => Ok(Executor::Grouped),
            other => Err(Error::Domain(format!("unknown executor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecConfig {
    /// Triplets per work unit (`L`).
    pub group_len: usize,
    /// Output-channel tile extent (`B_out`).
    pub block_out: usize,
    /// Input-channel tile extent (`B_in`).
    pub block_in: usize,
    pub executor: Executor,
    pub deterministic: bool,
    pub workers: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            group_len: 128,
            block_out: 32,
            block_in: 32,
            executor: Executor::Grouped,
            deterministic: false,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl ExecConfig {
    pub fn naive() -> Self {
        Self { executor: Executor::Naive, ..Self::default() }
    }

    pub fn grouped() -> Self {
        Self::default()
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn with_group_len(mut self, group_len: usize) -> Self {
        self.group_len = group_len;
        self
    }

    pub fn with_blocks(mut self, block_out: usize, block_in: usize) -> Self {
        self.block_out = block_out;
        self.block_in = block_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_len == 0 || self.block_out == 0 || self.block_in == 0 {
            return Err(Error::Config(format!(
                "L={}, B_out={}, B_in={} must all be >= 1",
                self.group_len, self.block_out, self.block_in
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scalar-element loads from, and atomic stores to, the shared tensors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccessCounters {
    pub w_reads: u64,
    pub fin_reads: u64,
    pub fout_atomic_writes: u64,
    /// Upstream-gradient loads; only the VVOR kernel reads them.
    pub gout_reads: u64,
}

impl Add for AccessCounters {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            w_reads: self.w_reads + o.w_reads,
            fin_reads: self.fin_reads + o.fin_reads,
            fout_atomic_writes: self.fout_atomic_writes + o.fout_atomic_writes,
            gout_reads: self.gout_reads + o.gout_reads,
        }
    }
}

impl AddAssign for AccessCounters {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl AccessCounters {
    pub fn total(&self) -> u64 {
        self.w_reads + self.fin_reads + self.fout_atomic_writes + self.gout_reads
    }
}

/// Counters plus the auxiliary memory the run held at its peak.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecReport {
    pub counters: AccessCounters,
    /// Scalars allocated beyond inputs and the output tensor.
    pub aux_scalars: usize,
}

/// Destination of flushed partial results.
pub(crate) trait Sink<T> {
    fn add(&mut self, offset: usize, vals: &[T]);
}

pub(crate) struct AtomicSink<'a, T: Scalar>(&'a [T::Atomic]);

impl<T: Scalar> Clone for AtomicSink<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T: Scalar> Copy for AtomicSink<'_, T> {}

impl<T: Scalar> Sink<T> for AtomicSink<'_, T> {
    #[inline]
    fn add(&mut self, offset: usize, vals: &[T]) {
        for (cell, &v) in self.0[offset..offset + vals.len()].iter().zip(vals) {
            T::atomic_add(cell, v);
        }
    }
}

pub(crate) struct LocalSink<'a, T>(&'a mut [T]);

impl<T: Scalar> Sink<T> for LocalSink<'_, T> {
    #[inline]
    fn add(&mut self, offset: usize, vals: &[T]) {
        for (dst, &v) in self.0[offset..offset + vals.len()].iter_mut().zip(vals) {
            *dst += v;
        }
    }
}

/// Whether kernels may take their AVX2 + FMA code paths.
#[inline]
pub(crate) fn simd_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// A unit-parallel computation writing into one flat output buffer.
pub(crate) trait Kernel<T: Scalar>: Sync {
    type Scratch: Send;

    fn units(&self) -> usize;
    fn output_len(&self) -> usize;
    fn scratch(&self) -> Self::Scratch;
    /// Scalars held by one scratch instance.
    fn scratch_len(&self) -> usize;
    fn run_unit<S: Sink<T>>(&self, unit: usize, scratch: &mut Self::Scratch, sink: &mut S, counters: &mut AccessCounters);
}

fn pool(workers: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(move |n| format!("pointconv-{workers}-{n}"))
                    .build()
                    .expect("failed to build worker pool"),
            )
        })
        .clone()
}

/// Runs `f` on a pool of exactly `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    pool(workers.max(1)).install(f)
}

fn segment_ranges(units: usize) -> Vec<Range<usize>> {
    let segments = DETERMINISTIC_SEGMENTS.min(units);
    (0..segments).map(|s| s * units / segments..(s + 1) * units / segments).collect()
}

/// Elementwise `parts[0] += parts[1]`, `parts[2] += parts[3]`, ... then the
/// same on the survivors, until one buffer remains.
fn tree_reduce<T: Scalar>(mut parts: Vec<Vec<T>>) -> Option<Vec<T>> {
    while parts.len() > 1 {
        let mut pairs = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(left) = it.next() {
            pairs.push((left, it.next()));
        }
        parts = pairs
            .into_par_iter()
            .map(|(mut left, right)| {
                if let Some(right) = right {
                    left.iter_mut().zip(&right).for_each(|(l, &r)| *l += r);
                }
                left
            })
            .collect();
    }
    parts.into_iter().next()
}

pub(crate) fn execute<T: Scalar, K: Kernel<T>>(kernel: &K, cfg: &ExecConfig) -> (Vec<T>, ExecReport) {
    let units = kernel.units();
    let out_len = kernel.output_len();
    if cfg.deterministic {
        let ranges = segment_ranges(units);
        let aux = ranges.len() * (out_len + kernel.scratch_len());
        let (parts, counters) = with_workers(cfg.workers, || {
            let done: Vec<(Vec<T>, AccessCounters)> = ranges
                .into_par_iter()
                .map(|range| {
                    let mut buf = vec![T::ZERO; out_len];
                    let mut scratch = kernel.scratch();
                    let mut counters = AccessCounters::default();
                    let mut sink = LocalSink(&mut buf);
                    for u in range {
                        kernel.run_unit(u, &mut scratch, &mut sink, &mut counters);
                    }
                    (buf, counters)
                })
                .collect();
            let counters = done.iter().fold(AccessCounters::default(), |a, (_, c)| a + *c);
            (done.into_iter().map(|(b, _)| b).collect::<Vec<_>>(), counters)
        });
        let out = tree_reduce(parts).unwrap_or_else(|| vec![T::ZERO; out_len]);
        (out, ExecReport { counters, aux_scalars: aux })
    } else {
        let cells: Vec<T::Atomic> = (0..out_len).map(|_| T::atomic_new(T::ZERO)).collect();
        let sink = AtomicSink::<T>(&cells);
        let counters = with_workers(cfg.workers, || {
            (0..units)
                .into_par_iter()
                .fold(
                    || (kernel.scratch(), AccessCounters::default()),
                    |(mut scratch, mut counters), u| {
                        let mut s = sink;
                        kernel.run_unit(u, &mut scratch, &mut s, &mut counters);
                        (scratch, counters)
                    },
                )
                .map(|(_, c)| c)
                .reduce(AccessCounters::default, |a, b| a + b)
        });
        let out = cells.into_iter().map(T::atomic_into_inner).collect();
        let aux = cfg.workers.min(units.max(1)) * kernel.scratch_len();
        (out, ExecReport { counters, aux_scalars: aux })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_cover_units_exactly() {
        for units in [0, 1, 5, 8, 9, 1000] {
            let r = segment_ranges(units);
            assert_eq!(r.len(), units.min(DETERMINISTIC_SEGMENTS));
            let mut next = 0;
            for s in r {
                assert_eq!(s.start, next);
                assert!(s.end > s.start);
                next = s.end;
            }
            assert_eq!(next, units);
        }
    }

    #[test]
    fn tree_reduce_fixed_order() {
        let parts: Vec<Vec<f64>> = (0..5).map(|p| vec![p as f64, 1.0]).collect();
        assert_eq!(tree_reduce(parts).unwrap(), vec![10.0, 5.0]);
        assert_eq!(tree_reduce::<f64>(vec![]), None);
    }

    #[test]
    fn config_validation() {
        assert!(ExecConfig::default().validate().is_ok());
        assert_eq!(ExecConfig::default().group_len, 128);
        assert_eq!((ExecConfig::default().block_out, ExecConfig::default().block_in), (32, 32));
        assert!(ExecConfig::default().with_group_len(0).validate().is_err());
        assert!(ExecConfig::default().with_blocks(0, 4).validate().is_err());
        assert!(ExecConfig::default().with_workers(0).validate().is_err());
    }
}
