//! Differentiable point convolution built from the triplet builder and the
//! MVMR/VVOR engines.

use crate::cloud::{FeatureTensor, PointCloud, WeightTensor};
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::mvmr::{mvmr, mvmr_transposed};
use crate::scalar::Scalar;
use crate::spatial::{voxel_downsample, DownsampleMap};
use crate::triplets::{build_degraded_parts, build_triplets_native, choose_sort_axis, sort_triplets, ConvGeometry, ConvMode, TripletList};
use crate::vvor::{vvor, WeightGradient};

#[derive(Debug, Clone, PartialEq)]
struct CacheKey {
    in_cloud: u64,
    out_cloud: u64,
    geometry: [u64; 4],
}

impl CacheKey {
    fn new(in_cloud: &PointCloud, out_cloud: &PointCloud, g: &ConvGeometry) -> Self {
        let mode = match g.mode {
            ConvMode::Native => 0,
            ConvMode::Degraded => 1,
        };
        Self {
            in_cloud: in_cloud.fingerprint(),
            out_cloud: out_cloud.fingerprint(),
            geometry: [g.radius.to_bits(), g.resolution as u64, mode, g.voxel_size.to_bits()],
        }
    }
}

#[derive(Debug, Clone)]
struct Cached<T> {
    key: CacheKey,
    triplets: TripletList,
    /// Degraded mode only: original points to voxel sites.
    sites: Option<DownsampleMap>,
    n_in: usize,
    f_in: Option<FeatureTensor<T>>,
}

/// Point convolution `F_out[i] = Σ W_k × F_in[j]` with cached triplets.
///
/// No bias and no activation. The triplet list built by `forward` is kept,
/// sorted, together with the features it consumed, and reused by `backward`
/// and by later forwards over the same clouds and geometry.
#[derive(Debug, Clone)]
pub struct PointConvOp<T> {
    pub geometry: ConvGeometry,
    pub weights: WeightTensor<T>,
    pub cfg: ExecConfig,
    cache: Option<Cached<T>>,
}

impl<T: Scalar> PointConvOp<T> {
    pub fn new(geometry: ConvGeometry, weights: WeightTensor<T>, cfg: ExecConfig) -> Result<Self> {
        if weights.resolution() != geometry.resolution {
            return Err(Error::Shape(format!(
                "weights have resolution {}, geometry {}",
                weights.resolution(),
                geometry.resolution
            )));
        }
        cfg.validate()?;
        Ok(Self { geometry, weights, cfg, cache: None })
    }

    /// The sorted triplets of the last forward, if any.
    pub fn triplets(&self) -> Option<&TripletList> {
        self.cache.as_ref().map(|c| &c.triplets)
    }

    /// Degraded mode: the mapping from input points to voxel sites.
    pub fn sites(&self) -> Option<&DownsampleMap> {
        self.cache.as_ref().and_then(|c| c.sites.as_ref())
    }

    fn prepare(&mut self, in_cloud: &PointCloud, out_cloud: &PointCloud) -> Result<()> {
        let key = CacheKey::new(in_cloud, out_cloud, &self.geometry);
        if self.cache.as_ref().is_some_and(|c| c.key == key) {
            return Ok(());
        }
        let (raw, sites) = match self.geometry.mode {
            ConvMode::Native => (build_triplets_native(out_cloud, in_cloud, &self.geometry)?, None),
            ConvMode::Degraded => {
                if key.in_cloud != key.out_cloud {
                    return Err(Error::Domain("degraded convolution is defined on the input's own voxel sites".into()));
                }
                let (t, _, map) = build_degraded_parts(in_cloud, &self.geometry)?;
                (t, Some(map))
            }
        };
        let triplets = sort_triplets(&raw, choose_sort_axis(&raw));
        self.cache = Some(Cached { key, triplets, sites, n_in: in_cloud.len(), f_in: None });
        Ok(())
    }

    /// Builds or reuses the triplets, runs the forward engine and caches
    /// what `backward` needs. In degraded mode the output has one row per
    /// occupied voxel and `out_cloud` must be `in_cloud`.
    pub fn forward(&mut self, in_cloud: &PointCloud, out_cloud: &PointCloud, f_in: &FeatureTensor<T>) -> Result<FeatureTensor<T>> {
        if f_in.rows() != in_cloud.len() {
            return Err(Error::Shape(format!("{} feature rows for {} input points", f_in.rows(), in_cloud.len())));
        }
        self.prepare(in_cloud, out_cloud)?;
        let cache = self.cache.as_mut().unwrap();
        let used = match &cache.sites {
            Some(map) => f_in.gather_rows(&map.kept_index),
            None => f_in.clone(),
        };
        let n_out = cache.triplets.n_out;
        let (out, _) = mvmr(&self.weights, &used, &cache.triplets, n_out, &self.cfg)?;
        cache.f_in = Some(used);
        Ok(out)
    }

    /// Input-feature and weight gradients over the forward's exact triplets.
    pub fn backward(&self, g_out: &FeatureTensor<T>) -> Result<(FeatureTensor<T>, WeightGradient<T>)> {
        let cache = self.cache.as_ref().ok_or_else(|| Error::State("backward called before forward".into()))?;
        let f_in = cache.f_in.as_ref().ok_or_else(|| Error::State("forward did not complete".into()))?;
        if g_out.rows() != cache.triplets.n_out {
            return Err(Error::Shape(format!(
                "{} gradient rows for {} outputs",
                g_out.rows(),
                cache.triplets.n_out
            )));
        }
        let t = &cache.triplets;
        let (grad_used, _) = mvmr_transposed(&self.weights, g_out, t, f_in.rows(), &self.cfg)?;
        let (grad_w, _) = vvor(g_out, f_in, t, self.weights.kernel_volume(), &self.cfg)?;
        let grad_in = match &cache.sites {
            None => grad_used,
            Some(map) => {
                let w = grad_used.row_len();
                let mut full = vec![T::ZERO; cache.n_in * w];
                for (m, &p) in map.kept_index.iter().enumerate() {
                    full[p * w..(p + 1) * w].copy_from_slice(grad_used.row(m));
                }
                FeatureTensor::new(full, cache.n_in, grad_used.groups(), grad_used.channels())?
            }
        };
        Ok((grad_in, grad_w))
    }
}

/// Output of [`strided_block`].
#[derive(Debug, Clone)]
pub struct StridedOutput<T> {
    pub coarse_cloud: PointCloud,
    pub coarse_features: FeatureTensor<T>,
    pub map: DownsampleMap,
}

/// Downsamples `cloud` without snapping and convolves onto the kept points.
/// The returned map feeds [`crate::spatial::upsample`] on the way back up.
pub fn strided_block<T: Scalar>(
    op: &mut PointConvOp<T>,
    cloud: &PointCloud,
    f_in: &FeatureTensor<T>,
    voxel_size: f64,
) -> Result<StridedOutput<T>> {
    let (coarse_cloud, map) = voxel_downsample(cloud, voxel_size)?;
    let coarse_features = op.forward(cloud, &coarse_cloud, f_in)?;
    Ok(StridedOutput { coarse_cloud, coarse_features, map })
}
