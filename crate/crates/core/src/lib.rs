//! Convolution on native 3D point clouds.
//!
//! The crate is organized around the triplet set `{(i, j, k)}`: output point
//! `i` receives input point `j` through kernel matrix `W_k`. Building the
//! triplets is geometry ([`triplets`], on top of [`spatial`]); executing them
//! is a matrix-vector multiply-and-reduce ([`mvmr`]) for the forward pass and
//! input gradients, and an outer-product-and-reduce ([`vvor`]) for weight
//! gradients. Both engines count their scalar loads and atomic stores so the
//! closed-form predictions in [`cost`] can be checked against real runs, and
//! [`oracle`] holds the brute-force references used in tests.
//!
//! ```
//! use pointconv::prelude::*;
//!
//! let cloud = PointCloud::from_positions(vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [1.0, 0.2, 0.0]])?;
//! let weights = make_weights::<f64>(3, 1, 4, 8, 7)?;
//! let mut conv = PointConvOp::new(ConvGeometry::native(0.6, 3), weights, ExecConfig::default())?;
//! let features = FeatureTensor::<f64>::random(cloud.len(), 1, 4, 1);
//! let out = conv.forward(&cloud, &cloud, &features)?;
//! assert_eq!((out.rows(), out.channels()), (3, 8));
//! # Ok::<(), pointconv::Error>(())
//! ```

pub mod bench;
pub mod cloud;
pub mod conv;
pub mod cost;
mod error;
pub mod exec;
pub mod generate;
pub mod io;
pub mod mvmr;
pub mod oracle;
pub mod scalar;
pub mod spatial;
pub mod triplets;
pub mod vvor;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::cloud::{make_point_cloud, make_weights, FeatureTensor, PointCloud, WeightTensor};
    pub use crate::conv::{strided_block, PointConvOp};
    pub use crate::cost::{expected_unique_per_group, predict_access_grouped, predict_access_naive};
    pub use crate::exec::{AccessCounters, ExecConfig, Executor};
    pub use crate::mvmr::{mvmr, mvmr_transposed};
    pub use crate::scalar::Scalar;
    pub use crate::spatial::{radius_search, upsample, voxel_downsample, DownsampleMap, NeighborList};
    pub use crate::triplets::{
        build_triplets_degraded, build_triplets_native, choose_sort_axis, local_voxel_kernel_index, sort_triplets,
        ConvGeometry, ConvMode, SortAxis, TripletList,
    };
    pub use crate::vvor::{vvor, WeightGradient};
    pub use crate::Error;
}
