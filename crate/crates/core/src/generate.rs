//! Seeded synthetic workloads.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::triplets::TripletList;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudKind {
    UniformCube,
    GaussianClusters,
    GridSnapped,
}

impl CloudKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CloudKind::UniformCube => "uniform_cube",
            CloudKind::GaussianClusters => "gaussian_clusters",
            CloudKind::GridSnapped => "grid_snapped",
        }
    }
}

impl fmt::Display for CloudKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CloudKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_cube" => Ok(CloudKind::UniformCube),
            "gaussian_clusters" => Ok(CloudKind::GaussianClusters),
            "grid_snapped" => Ok(CloudKind::GridSnapped),
            _ => Err(Error::Config(format!("unknown generator {s:?}"))),
        }
    }
}

/// Generator knobs; `Default` gives the values used by the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Edge length of the cube `[0, extent)³`.
    pub extent: f64,
    pub clusters: usize,
    pub sigma: f64,
    pub voxel_size: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { extent: 1.0, clusters: 4, sigma: 0.05, voxel_size: 0.0625 }
    }
}

/// `n` points uniform in `[0, extent)³`.
pub fn uniform_cube(n: usize, extent: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n).map(|_| [0; 3].map(|_: i32| rng.random::<f64>() * extent)).collect();
    PointCloud::from_positions(pts).expect("finite by construction")
}

/// `n` points split round-robin over isotropic Gaussians whose centers are
/// uniform in the cube. Returns the centers as well.
pub fn gaussian_clusters(n: usize, clusters: usize, sigma: f64, extent: f64, seed: u64) -> Result<(PointCloud, Vec<[f64; 3]>)> {
    if clusters == 0 {
        return Err(Error::Config("need at least one cluster".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; 3]> = (0..clusters).map(|_| [0; 3].map(|_: i32| rng.random::<f64>() * extent)).collect();
    let pts = (0..n)
        .map(|p| {
            let c = centers[p % clusters];
            [c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng), c[2] + normal.sample(&mut rng)]
        })
        .collect();
    Ok((PointCloud::from_positions(pts)?, centers))
}

/// `n` distinct voxel centers `(key + 0.5)·voxel_size` drawn from the
/// `side³` grid with `side = ceil(extent / voxel_size)`.
pub fn grid_snapped(n: usize, voxel_size: f64, extent: f64, seed: u64) -> Result<PointCloud> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Voxel(voxel_size));
    }
    let side = (extent / voxel_size).ceil().max(1.0) as u64;
    let cells = side.saturating_mul(side).saturating_mul(side);
    if (n as u64) > cells {
        return Err(Error::Config(format!("{n} distinct cells requested from a grid of {cells}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let key = [0; 3].map(|_: i32| rng.random_range(0..side) as i64);
        if seen.insert(key) {
            pts.push(key.map(|q| (q as f64 + 0.5) * voxel_size));
        }
    }
    PointCloud::from_positions(pts)
}

pub fn generate(kind: CloudKind, n: usize, seed: u64, p: &GenParams) -> Result<PointCloud> {
    match kind {
        CloudKind::UniformCube => Ok(uniform_cube(n, p.extent, seed)),
        CloudKind::GaussianClusters => gaussian_clusters(n, p.clusters, p.sigma, p.extent, seed).map(|(c, _)| c),
        CloudKind::GridSnapped => grid_snapped(n, p.voxel_size, p.extent, seed),
    }
}

/// `count` triplets with independent uniform `i`, `j` and `k`; unsorted.
pub fn random_triplets(count: usize, n_out: usize, n_in: usize, kernel_volume: usize, seed: u64) -> Result<TripletList> {
    if count > 0 && (n_out == 0 || n_in == 0 || kernel_volume == 0) {
        return Err(Error::Config("random triplets need non-empty index ranges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i = Vec::with_capacity(count);
    let mut j = Vec::with_capacity(count);
    let mut k = Vec::with_capacity(count);
    for _ in 0..count {
        i.push(rng.random_range(0..n_out as u32));
        j.push(rng.random_range(0..n_in as u32));
        k.push(rng.random_range(0..kernel_volume as u32));
    }
    TripletList::new(i, j, k, n_out, n_in, kernel_volume)
}
