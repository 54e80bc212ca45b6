//! Construction and ordering of the triplet set `{(i, j, k)}`.
//!
//! A triplet states that input point `j` lies in the neighborhood of output
//! point `i` and is weighted by kernel matrix `k`. Native construction keeps
//! output sites at the original coordinates, searches neighbors by Euclidean
//! radius and assigns `k` by voxelizing each neighborhood locally around its
//! own center. Degraded construction reproduces classic sparse voxel
//! convolution: sites snapped to voxel centers, Chebyshev stencil
//! neighborhoods, and `k` given by the integer stencil offset.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::spatial::{radius_search, voxel_downsample, voxel_key, DownsampleMap, VoxelKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SortAxis {
    None,
    ByI,
    ByJ,
    ByK,
}

impl SortAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SortAxis::None => "none",
            SortAxis::ByI => "by_i",
            SortAxis::ByJ => "by_j",
            SortAxis::ByK => "by_k",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            SortAxis::None => 0,
            SortAxis::ByI => 1,
            SortAxis::ByJ => 2,
            SortAxis::ByK => 3,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => SortAxis::None,
            1 => SortAxis::ByI,
            2 => SortAxis::ByJ,
            3 => SortAxis::ByK,
            _ => return None,
        })
    }
}

impl fmt::Display for SortAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SortAxis::None,
            "by_i" | "i" => SortAxis::ByI,
            "by_j" | "j" => SortAxis::ByJ,
            "by_k" | "k" => SortAxis::ByK,
            other => return Err(Error::Domain(format!("unknown sort axis {other:?}"))),
        })
    }
}

/// The triplet set with its index-space extents and current ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletList {
    pub i: Vec<u32>,
    pub j: Vec<u32>,
    pub k: Vec<u32>,
    pub sort_axis: SortAxis,
    pub n_out: usize,
    pub n_in: usize,
    pub kernel_volume: usize,
}

impl TripletList {
    /// Builds a list after checking every index against its extent.
    pub fn new(
        i: Vec<u32>,
        j: Vec<u32>,
        k: Vec<u32>,
        n_out: usize,
        n_in: usize,
        kernel_volume: usize,
    ) -> Result<Self> {
        if i.len() != j.len() || i.len() != k.len() {
            return Err(Error::Shape(format!(
                "index arrays differ in length: {}, {}, {}",
                i.len(),
                j.len(),
                k.len()
            )));
        }
        let list = Self { i, j, k, sort_axis: SortAxis::None, n_out, n_in, kernel_volume };
        list.validate(n_out, n_in, kernel_volume)?;
        Ok(list)
    }

    pub fn empty(n_out: usize, n_in: usize, kernel_volume: usize) -> Self {
        Self { i: vec![], j: vec![], k: vec![], sort_axis: SortAxis::None, n_out, n_in, kernel_volume }
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn get(&self, t: usize) -> (u32, u32, u32) {
        (self.i[t], self.j[t], self.k[t])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        (0..self.len()).map(|t| self.get(t))
    }

    /// Fails with the first triplet outside `n_out × n_in × kernel_volume`.
    pub fn validate(&self, n_out: usize, n_in: usize, kernel_volume: usize) -> Result<()> {
        for (t, (i, j, k)) in self.iter().enumerate() {
            if i as usize >= n_out || j as usize >= n_in || k as usize >= kernel_volume {
                return Err(Error::Index {
                    index: t,
                    detail: format!(
                        "({i}, {j}, {k}) outside extents ({n_out}, {n_in}, {kernel_volume})"
                    ),
                });
            }
        }
        Ok(())
    }

    /// The same interactions with the roles of `i` and `j` exchanged.
    pub fn swapped(&self) -> Self {
        let sort_axis = match self.sort_axis {
            SortAxis::ByI => SortAxis::ByJ,
            SortAxis::ByJ => SortAxis::ByI,
            other => other,
        };
        Self {
            i: self.j.clone(),
            j: self.i.clone(),
            k: self.k.clone(),
            sort_axis,
            n_out: self.n_in,
            n_in: self.n_out,
            kernel_volume: self.kernel_volume,
        }
    }

    pub fn is_sorted_by(&self, axis: SortAxis) -> bool {
        let keys = match axis {
            SortAxis::None => return true,
            SortAxis::ByI => &self.i,
            SortAxis::ByJ => &self.j,
            SortAxis::ByK => &self.k,
        };
        keys.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Native,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvGeometry {
    pub radius: f64,
    pub resolution: usize,
    pub mode: ConvMode,
    /// Only read in degraded mode.
    pub voxel_size: f64,
}

impl ConvGeometry {
    pub fn native(radius: f64, resolution: usize) -> Self {
        Self { radius, resolution, mode: ConvMode::Native, voxel_size: 0.0 }
    }

    pub fn degraded(voxel_size: f64, resolution: usize) -> Self {
        Self { radius: 0.0, resolution, mode: ConvMode::Degraded, voxel_size }
    }

    pub fn kernel_volume(&self) -> usize {
        self.resolution.pow(3)
    }

    fn check_resolution(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernel resolution must be odd and positive, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Kernel index of `neighbor` inside the `t³` grid spanning `[-r, r]³`
/// around `center`. Cells are `2r/t` wide; coordinates outside the grid,
/// such as a neighbor sitting exactly at `+r`, clamp to the edge cell.
#[inline]
pub fn local_voxel_kernel_index(center: &[f64; 3], neighbor: &[f64; 3], radius: f64, t: usize) -> u32 {
    let cell = 2.0 * radius / t as f64;
    let top = (t - 1) as f64;
    let mut k = 0usize;
    for a in 0..3 {
        let idx = ((neighbor[a] - center[a] + radius) / cell).floor().clamp(0.0, top) as usize;
        k = k * t + idx;
    }
    k as u32
}

/// Native construction: one triplet per radius-search pair, ordered by `(i, j)`.
pub fn build_triplets_native(
    out_cloud: &PointCloud,
    in_cloud: &PointCloud,
    geom: &ConvGeometry,
) -> Result<TripletList> {
    if geom.mode != ConvMode::Native {
        return Err(Error::Domain("build_triplets_native needs native geometry".into()));
    }
    geom.check_resolution()?;
    let pairs = radius_search(out_cloud, in_cloud, geom.radius)?;
    let po = out_cloud.positions();
    let pi = in_cloud.positions();
    let t = geom.resolution;
    let k: Vec<u32> = pairs
        .out_index
        .par_iter()
        .zip(pairs.in_index.par_iter())
        .map(|(&i, &j)| local_voxel_kernel_index(&po[i as usize], &pi[j as usize], geom.radius, t))
        .collect();
    Ok(TripletList {
        i: pairs.out_index,
        j: pairs.in_index,
        k,
        sort_axis: SortAxis::None,
        n_out: out_cloud.len(),
        n_in: in_cloud.len(),
        kernel_volume: geom.kernel_volume(),
    })
}

/// Merges co-located points into one site per occupied voxel.
///
/// The site representative follows [`voxel_downsample`]; sites are ordered
/// by their representative's original index, so a cloud with one point per
/// voxel keeps its indexing. Returned positions are snapped to voxel centers.
pub fn degraded_sites(cloud: &PointCloud, voxel_size: f64) -> Result<(PointCloud, DownsampleMap)> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Voxel(voxel_size));
    }
    let (_, by_key) = voxel_downsample(cloud, voxel_size)?;
    let mut order: Vec<usize> = (0..by_key.kept_index.len()).collect();
    // batches stay contiguous because representatives never cross batches
    order.sort_unstable_by_key(|&m| by_key.kept_index[m]);
    let mut rank = vec![0usize; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let kept_index: Vec<usize> = order.iter().map(|&m| by_key.kept_index[m]).collect();
    let parent_of = by_key.parent_of.iter().map(|&m| rank[m]).collect();

    let pts = cloud.positions();
    let positions = kept_index
        .iter()
        .map(|&p| {
            let key = voxel_key(&pts[p], voxel_size);
            key.map(|c| (c as f64 + 0.5) * voxel_size)
        })
        .collect();
    let ids = cloud.batch_ids();
    let mut offsets = vec![0usize; cloud.num_batches() + 1];
    for &p in &kept_index {
        offsets[ids[p] + 1] += 1;
    }
    for b in 0..cloud.num_batches() {
        offsets[b + 1] += offsets[b];
    }
    Ok((PointCloud::new(positions, offsets)?, DownsampleMap { kept_index, parent_of }))
}

/// Degraded (voxel) construction over the `t³` Chebyshev stencil.
///
/// Returns the triplets over snapped sites together with the snapped cloud.
pub fn build_triplets_degraded(in_cloud: &PointCloud, geom: &ConvGeometry) -> Result<(TripletList, PointCloud)> {
    if geom.mode != ConvMode::Degraded {
        return Err(Error::Domain("build_triplets_degraded needs degraded geometry".into()));
    }
    let (triplets, sites, _) = build_degraded_parts(in_cloud, geom)?;
    Ok((triplets, sites))
}

pub(crate) fn build_degraded_parts(
    in_cloud: &PointCloud,
    geom: &ConvGeometry,
) -> Result<(TripletList, PointCloud, DownsampleMap)> {
    geom.check_resolution()?;
    let (sites, map) = degraded_sites(in_cloud, geom.voxel_size)?;
    let triplets = stencil_triplets(&sites, geom.voxel_size, geom.resolution);
    Ok((triplets, sites, map))
}

fn stencil_triplets(sites: &PointCloud, voxel_size: f64, t: usize) -> TripletList {
    let half = (t as i64 - 1) / 2;
    let mut per_site: Vec<Vec<(u32, u32)>> = Vec::with_capacity(sites.len());
    for b in 0..sites.num_batches() {
        let range = sites.batch_range(b);
        let mut keyed: Vec<(VoxelKey, u32)> = sites
            .batch(b)
            .iter()
            .enumerate()
            .map(|(n, p)| (voxel_key(p, voxel_size), (range.start + n) as u32))
            .collect();
        keyed.sort_unstable();
        let lookup = |key: &VoxelKey| keyed.binary_search_by(|(k, _)| k.cmp(key)).ok().map(|at| keyed[at].1);
        let batch: Vec<Vec<(u32, u32)>> = sites
            .batch(b)
            .par_iter()
            .map(|p| {
                let key = voxel_key(p, voxel_size);
                let mut row = Vec::new();
                for dx in -half..=half {
                    for dy in -half..=half {
                        for dz in -half..=half {
                            let probe = [key[0] + dx, key[1] + dy, key[2] + dz];
                            if let Some(j) = lookup(&probe) {
                                let k = ((dx + half) * t as i64 + (dy + half)) * t as i64 + (dz + half);
                                row.push((j, k as u32));
                            }
                        }
                    }
                }
                row.sort_unstable();
                row
            })
            .collect();
        per_site.extend(batch);
    }
    let total = per_site.iter().map(Vec::len).sum();
    let mut list = TripletList {
        i: Vec::with_capacity(total),
        j: Vec::with_capacity(total),
        k: Vec::with_capacity(total),
        sort_axis: SortAxis::None,
        n_out: sites.len(),
        n_in: sites.len(),
        kernel_volume: t.pow(3),
    };
    for (i, row) in per_site.into_iter().enumerate() {
        for (j, k) in row {
            list.i.push(i as u32);
            list.j.push(j);
            list.k.push(k);
        }
    }
    list
}

/// Stable counting sort on one index axis.
pub fn sort_triplets(list: &TripletList, axis: SortAxis) -> TripletList {
    let (keys, extent) = match axis {
        SortAxis::None => return list.clone(),
        SortAxis::ByI => (&list.i, list.n_out),
        SortAxis::ByJ => (&list.j, list.n_in),
        SortAxis::ByK => (&list.k, list.kernel_volume),
    };
    let extent = extent.max(keys.iter().map(|&x| x as usize + 1).max().unwrap_or(0));
    let mut start = vec![0usize; extent + 1];
    for &x in keys.iter() {
        start[x as usize + 1] += 1;
    }
    for b in 0..extent {
        start[b + 1] += start[b];
    }
    let mut perm = vec![0usize; keys.len()];
    for (t, &x) in keys.iter().enumerate() {
        perm[start[x as usize]] = t;
        start[x as usize] += 1;
    }
    TripletList {
        i: perm.iter().map(|&t| list.i[t]).collect(),
        j: perm.iter().map(|&t| list.j[t]).collect(),
        k: perm.iter().map(|&t| list.k[t]).collect(),
        sort_axis: axis,
        n_out: list.n_out,
        n_in: list.n_in,
        kernel_volume: list.kernel_volume,
    }
}

/// Sort-axis heuristic: `k` when the kernel count does not exceed either
/// point count, otherwise the axis with the fewest distinct values
/// (ties resolved `k`, then `i`, then `j`).
pub fn choose_sort_axis(list: &TripletList) -> SortAxis {
    let (k, n_out, n_in) = (list.kernel_volume, list.n_out, list.n_in);
    if k <= n_out.min(n_in) {
        return SortAxis::ByK;
    }
    [(k, SortAxis::ByK), (n_out, SortAxis::ByI), (n_in, SortAxis::ByJ)]
        .into_iter()
        .min_by_key(|&(count, _)| count)
        .map(|(_, axis)| axis)
        .unwrap()
}
