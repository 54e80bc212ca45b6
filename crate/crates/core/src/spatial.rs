//! Fixed-radius neighbor search and non-snapping voxel downsampling.
//!
//! Both operations sort points by integer voxel key and answer lookups by
//! binary search over the sorted keys, so no hash grid is ever built.

use rayon::prelude::*;

use crate::cloud::{FeatureTensor, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type VoxelKey = [i64; 3];

#[inline]
pub fn voxel_key(p: &[f64; 3], cell: f64) -> VoxelKey {
    // `as` saturates, which keeps absurdly small cells well defined.
    [(p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64]
}

#[inline]
fn within(a: &[f64; 3], b: &[f64; 3], r2: f64) -> bool {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz <= r2
}

/// Points of one batch sorted by voxel key, ties by index.
struct SortedCells {
    keys: Vec<VoxelKey>,
    index: Vec<u32>,
}

impl SortedCells {
    fn build(points: &[[f64; 3]], base: usize, cell: f64) -> Self {
        let mut pairs: Vec<(VoxelKey, u32)> =
            points.iter().enumerate().map(|(n, p)| (voxel_key(p, cell), (base + n) as u32)).collect();
        pairs.sort_unstable();
        let (keys, index) = pairs.into_iter().unzip();
        Self { keys, index }
    }

    fn cell(&self, key: &VoxelKey) -> &[u32] {
        let lo = self.keys.partition_point(|k| k < key);
        let hi = lo + self.keys[lo..].partition_point(|k| k == key);
        &self.index[lo..hi]
    }
}

/// Query/neighbor pairs sorted by `(out_index, in_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub out_index: Vec<u32>,
    pub in_index: Vec<u32>,
    /// `query_offsets[q]..query_offsets[q + 1]` are the pairs of query `q`.
    pub query_offsets: Vec<usize>,
    pub radius: f64,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.out_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_index.is_empty()
    }

    pub fn neighbors(&self, q: usize) -> &[u32] {
        &self.in_index[self.query_offsets[q]..self.query_offsets[q + 1]]
    }

    pub(crate) fn from_per_query(per_query: Vec<Vec<u32>>, radius: f64) -> Self {
        let total = per_query.iter().map(Vec::len).sum();
        let mut out_index = Vec::with_capacity(total);
        let mut in_index = Vec::with_capacity(total);
        let mut query_offsets = Vec::with_capacity(per_query.len() + 1);
        query_offsets.push(0);
        for (q, list) in per_query.into_iter().enumerate() {
            out_index.extend(std::iter::repeat_n(q as u32, list.len()));
            in_index.extend(list);
            query_offsets.push(in_index.len());
        }
        Self { out_index, in_index, query_offsets, radius }
    }
}

/// All `(query, target)` pairs with `‖q − t‖₂ ≤ radius`, never crossing batches.
pub fn radius_search(queries: &PointCloud, targets: &PointCloud, radius: f64) -> Result<NeighborList> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Radius(radius));
    }
    if queries.num_batches() != targets.num_batches() {
        return Err(Error::Shape(format!(
            "query cloud has {} batches, target cloud has {}",
            queries.num_batches(),
            targets.num_batches()
        )));
    }
    let r2 = radius * radius;
    let mut per_query: Vec<Vec<u32>> = Vec::with_capacity(queries.len());
    for b in 0..queries.num_batches() {
        let range = targets.batch_range(b);
        let cells = SortedCells::build(targets.batch(b), range.start, radius);
        let tp = targets.positions();
        let batch: Vec<Vec<u32>> = queries
            .batch(b)
            .par_iter()
            .map(|q| {
                let [x, y, z] = voxel_key(q, radius);
                let mut found = Vec::new();
                for dx in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dz in -1..=1i64 {
                            let key = [x.saturating_add(dx), y.saturating_add(dy), z.saturating_add(dz)];
                            found.extend(cells.cell(&key).iter().filter(|&&j| within(q, &tp[j as usize], r2)));
                        }
                    }
                }
                found.sort_unstable();
                found.dedup();
                found
            })
            .collect();
        per_query.extend(batch);
    }
    Ok(NeighborList::from_per_query(per_query, radius))
}

/// Correspondence between an original cloud and its downsampled subset.
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampleMap {
    /// Original index of each output point.
    pub kept_index: Vec<usize>,
    /// Output index of the representative of each original point.
    pub parent_of: Vec<usize>,
}

/// Keeps one original point per occupied voxel: the one nearest the voxel
/// centroid, ties to the lowest index. Output is ordered by voxel key within
/// each batch, and coordinates are copied bit for bit.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<(PointCloud, DownsampleMap)> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Voxel(voxel_size));
    }
    let pts = cloud.positions();
    let mut kept_index = Vec::new();
    let mut parent_of = vec![0usize; cloud.len()];
    let mut offsets = vec![0usize];
    for b in 0..cloud.num_batches() {
        let range = cloud.batch_range(b);
        let cells = SortedCells::build(cloud.batch(b), range.start, voxel_size);
        let mut start = 0;
        while start < cells.keys.len() {
            let key = cells.keys[start];
            let end = start + cells.keys[start..].partition_point(|k| *k == key);
            let members = &cells.index[start..end];
            let inv = 1.0 / members.len() as f64;
            let mut centroid = [0.0; 3];
            for &p in members {
                for a in 0..3 {
                    centroid[a] += pts[p as usize][a];
                }
            }
            centroid.iter_mut().for_each(|c| *c *= inv);
            // members are index-sorted within a cell, so strict `<` keeps the lowest on ties
            let mut best = members[0] as usize;
            let mut best_d = f64::INFINITY;
            for &p in members {
                let p = p as usize;
                let d: f64 = (0..3).map(|a| (pts[p][a] - centroid[a]).powi(2)).sum();
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
            let m = kept_index.len();
            kept_index.push(best);
            for &p in members {
                parent_of[p as usize] = m;
            }
            start = end;
        }
        offsets.push(kept_index.len());
    }
    let positions = kept_index.iter().map(|&p| pts[p]).collect();
    let out = PointCloud::new(positions, offsets)?;
    Ok((out, DownsampleMap { kept_index, parent_of }))
}

/// Copies each coarse row back to every original point it represents.
pub fn upsample<T: Scalar>(
    fine: &PointCloud,
    map: &DownsampleMap,
    coarse_features: &FeatureTensor<T>,
) -> Result<FeatureTensor<T>> {
    if map.parent_of.len() != fine.len() {
        return Err(Error::Shape(format!(
            "map covers {} points but fine cloud has {}",
            map.parent_of.len(),
            fine.len()
        )));
    }
    if coarse_features.rows() != map.kept_index.len() {
        return Err(Error::Shape(format!(
            "{} coarse feature rows for {} kept points",
            coarse_features.rows(),
            map.kept_index.len()
        )));
    }
    Ok(coarse_features.gather_rows(&map.parent_of))
}
