#![allow(dead_code)]

use pointconv::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A self-convolution problem with random data, double precision.
pub struct Instance {
    pub cloud: PointCloud,
    pub triplets: TripletList,
    pub weights: WeightTensor<f64>,
    pub f_in: FeatureTensor<f64>,
    pub g_out: FeatureTensor<f64>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.cloud.len()
    }
}

pub struct Dims {
    pub points: usize,
    pub t: usize,
    pub groups: usize,
    pub c_in_g: usize,
    pub c_out_g: usize,
    /// Mean neighbors per point the radius is chosen for.
    pub neighbors: f64,
}

/// Radius giving about `neighbors` points per ball in a unit cube of `n`.
pub fn radius_for(n: usize, neighbors: f64) -> f64 {
    (neighbors * 3.0 / (4.0 * std::f64::consts::PI * n as f64)).cbrt()
}

pub fn instance(d: &Dims, seed: u64) -> Instance {
    let cloud = uniform(d.points, seed);
    let geom = ConvGeometry::native(radius_for(d.points, d.neighbors), d.t);
    let raw = build_triplets_native(&cloud, &cloud, &geom).unwrap();
    let triplets = sort_triplets(&raw, SortAxis::ByK);
    Instance {
        weights: make_weights(d.t, d.groups, d.c_in_g, d.c_out_g, seed).unwrap(),
        f_in: FeatureTensor::random(d.points, d.groups, d.c_in_g, seed ^ 0x1111),
        g_out: FeatureTensor::random(d.points, d.groups, d.c_out_g, seed ^ 0x2222),
        cloud,
        triplets,
    }
}

pub fn uniform(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::from_positions((0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()).unwrap()
}

/// Every executor configuration worth comparing against an oracle.
pub fn configs(workers: usize) -> Vec<ExecConfig> {
    let mut v = Vec::new();
    for deterministic in [false, true] {
        v.push(ExecConfig::naive().with_workers(workers).with_deterministic(deterministic));
        for (l, bo, bi) in [(128, 32, 32), (1, 32, 32), (7, 5, 3), (64, 16, 64)] {
            v.push(ExecConfig::grouped().with_workers(workers).with_deterministic(deterministic).with_group_len(l).with_blocks(bo, bi));
        }
    }
    v
}

/// `max |a − b| / max |b|`, written independently of the library's helper.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn bits<T: Scalar>(v: &[T]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits_u64()).collect()
}
