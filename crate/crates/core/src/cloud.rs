//! Jagged point clouds and the feature/weight tensors attached to them.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A batch of 3D point sets stored back to back.
///
/// Sub-cloud `b` owns the points `batch_offsets[b]..batch_offsets[b + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f64; 3]>,
    batch_offsets: Vec<usize>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, batch_offsets: Vec<usize>) -> Result<Self> {
        if batch_offsets.first() != Some(&0) {
            return Err(Error::Offset("first offset must be 0".into()));
        }
        if batch_offsets.last() != Some(&positions.len()) {
            return Err(Error::Offset(format!(
                "last offset must equal the point count {}",
                positions.len()
            )));
        }
        if let Some(w) = batch_offsets.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Offset(format!("offsets decrease at position {}", w + 1)));
        }
        if let Some(index) = positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite { what: "position", index });
        }
        Ok(Self { positions, batch_offsets })
    }

    /// Single-batch cloud.
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![0, n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn batch_offsets(&self) -> &[usize] {
        &self.batch_offsets
    }

    pub fn num_batches(&self) -> usize {
        self.batch_offsets.len() - 1
    }

    pub fn batch_range(&self, b: usize) -> Range<usize> {
        self.batch_offsets[b]..self.batch_offsets[b + 1]
    }

    pub fn batch(&self, b: usize) -> &[[f64; 3]] {
        &self.positions[self.batch_range(b)]
    }

    /// Batch index of every point.
    pub fn batch_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.len());
        for b in 0..self.num_batches() {
            ids.extend(std::iter::repeat_n(b, self.batch_range(b).len()));
        }
        ids
    }

    /// Order-sensitive 64-bit fingerprint of positions and offsets (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let offsets = self.batch_offsets.iter().map(|&o| o as u64);
        fnv1a(offsets.chain(self.positions.iter().flatten().map(|c| c.to_bits())))
    }
}

/// FNV-1a over the little-endian bytes of each word.
pub fn fnv1a(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in words {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Validated constructor mirroring [`PointCloud::new`].
pub fn make_point_cloud(positions: Vec<[f64; 3]>, batch_offsets: Vec<usize>) -> Result<PointCloud> {
    PointCloud::new(positions, batch_offsets)
}

/// Per-point features laid out `N × G × C`, point index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    values: Vec<T>,
    rows: usize,
    groups: usize,
    channels: usize,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn new(values: Vec<T>, rows: usize, groups: usize, channels: usize) -> Result<Self> {
        if groups == 0 || channels == 0 {
            return Err(Error::Shape(format!("groups ({groups}) and channels ({channels}) must be >= 1")));
        }
        if values.len() != rows * groups * channels {
            return Err(Error::Shape(format!(
                "expected {rows}x{groups}x{channels} = {} values, got {}",
                rows * groups * channels,
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "feature", index });
        }
        Ok(Self { values, rows, groups, channels })
    }

    pub fn zeros(rows: usize, groups: usize, channels: usize) -> Self {
        assert!(groups >= 1 && channels >= 1, "groups and channels must be >= 1");
        Self { values: vec![T::ZERO; rows * groups * channels], rows, groups, channels }
    }

    /// Values drawn uniformly from `[-1, 1]`.
    pub fn random(rows: usize, groups: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..rows * groups * channels)
            .map(|_| T::from_f64(rng.random_range(-1.0..=1.0)))
            .collect();
        Self { values, rows, groups, channels }
    }

    pub(crate) fn from_raw(values: Vec<T>, rows: usize, groups: usize, channels: usize) -> Self {
        debug_assert_eq!(values.len(), rows * groups * channels);
        Self { values, rows, groups, channels }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Channels per group.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn row_len(&self) -> usize {
        self.groups * self.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn row(&self, p: usize) -> &[T] {
        let w = self.row_len();
        &self.values[p * w..(p + 1) * w]
    }

    pub fn get(&self, p: usize, g: usize, c: usize) -> T {
        self.values[(p * self.groups + g) * self.channels + c]
    }

    /// Rows gathered in the order given by `index`.
    pub fn gather_rows(&self, index: &[usize]) -> Self {
        let w = self.row_len();
        let mut values = Vec::with_capacity(index.len() * w);
        for &p in index {
            values.extend_from_slice(&self.values[p * w..(p + 1) * w]);
        }
        Self { values, rows: index.len(), groups: self.groups, channels: self.channels }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> FeatureTensor<U> {
        FeatureTensor {
            values: self.values.iter().map(|&v| f(v)).collect(),
            rows: self.rows,
            groups: self.groups,
            channels: self.channels,
        }
    }

    pub fn to_f64(&self) -> FeatureTensor<f64> {
        self.map(|v| v.to_f64())
    }
}

/// Kernel bank `W`, laid out `K × G × C_in_g × C_out_g` with `K = t³`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor<T> {
    values: Vec<T>,
    resolution: usize,
    groups: usize,
    c_in: usize,
    c_out: usize,
}

impl<T: Scalar> WeightTensor<T> {
    pub fn new(values: Vec<T>, resolution: usize, groups: usize, c_in: usize, c_out: usize) -> Result<Self> {
        check_resolution(resolution)?;
        if groups == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::Shape("groups and channel counts must be >= 1".into()));
        }
        let k = resolution.pow(3);
        if values.len() != k * groups * c_in * c_out {
            return Err(Error::Shape(format!(
                "expected {k}x{groups}x{c_in}x{c_out} = {} values, got {}",
                k * groups * c_in * c_out,
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "weight", index });
        }
        Ok(Self { values, resolution, groups, c_in, c_out })
    }

    pub fn zeros(resolution: usize, groups: usize, c_in: usize, c_out: usize) -> Result<Self> {
        check_resolution(resolution)?;
        let n = resolution.pow(3) * groups * c_in * c_out;
        Self::new(vec![T::ZERO; n], resolution, groups, c_in, c_out)
    }

    /// Kernel resolution `t` per spatial axis.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of kernel matrices, `t³`.
    pub fn kernel_volume(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Input channels per group.
    pub fn c_in(&self) -> usize {
        self.c_in
    }

    /// Output channels per group.
    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn index(&self, k: usize, g: usize, c: usize, m: usize) -> usize {
        ((k * self.groups + g) * self.c_in + c) * self.c_out + m
    }

    pub fn get(&self, k: usize, g: usize, c: usize, m: usize) -> T {
        self.values[self.index(k, g, c, m)]
    }

    /// Swaps the two channel axes, producing `K × G × C_out_g × C_in_g`.
    pub fn transposed(&self) -> Self {
        let mut values = vec![T::ZERO; self.values.len()];
        for k in 0..self.kernel_volume() {
            for g in 0..self.groups {
                let base = (k * self.groups + g) * self.c_in * self.c_out;
                for c in 0..self.c_in {
                    for m in 0..self.c_out {
                        values[base + m * self.c_in + c] = self.values[base + c * self.c_out + m];
                    }
                }
            }
        }
        Self { values, resolution: self.resolution, groups: self.groups, c_in: self.c_out, c_out: self.c_in }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> WeightTensor<U> {
        WeightTensor {
            values: self.values.iter().map(|&v| f(v)).collect(),
            resolution: self.resolution,
            groups: self.groups,
            c_in: self.c_in,
            c_out: self.c_out,
        }
    }

    pub fn to_f64(&self) -> WeightTensor<f64> {
        self.map(|v| v.to_f64())
    }
}

fn check_resolution(t: usize) -> Result<()> {
    if t == 0 || t.is_multiple_of(2) {
        return Err(Error::Shape(format!("kernel resolution must be odd and positive, got {t}")));
    }
    Ok(())
}

/// Seeded weights drawn uniformly from `[-s, s]`, `s = (G·C_in_g)^(-1/2)`.
pub fn make_weights<T: Scalar>(
    resolution: usize,
    groups: usize,
    c_in: usize,
    c_out: usize,
    seed: u64,
) -> Result<WeightTensor<T>> {
    check_resolution(resolution)?;
    if groups == 0 || c_in == 0 || c_out == 0 {
        return Err(Error::Shape("groups and channel counts must be >= 1".into()));
    }
    let scale = 1.0 / ((groups * c_in) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = resolution.pow(3) * groups * c_in * c_out;
    let values = (0..n).map(|_| T::from_f64(rng.random_range(-scale..=scale))).collect();
    WeightTensor::new(values, resolution, groups, c_in, c_out)
}
