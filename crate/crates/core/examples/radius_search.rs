//! Neighbor search, non-snapping downsampling and upsampling on a
//! two-batch cloud.

use pointconv::generate::{gaussian_clusters, uniform_cube};
use pointconv::oracle::brute_radius_oracle;
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let a = uniform_cube(2000, 1.0, 1);
    let (b, _) = gaussian_clusters(1000, 3, 0.05, 1.0, 2)?;
    let mut pts = a.positions().to_vec();
    pts.extend_from_slice(b.positions());
    let cloud = make_point_cloud(pts, vec![0, 2000, 3000])?;

    let r = 0.05;
    let pairs = radius_search(&cloud, &cloud, r)?;
    let brute = brute_radius_oracle(&cloud, &cloud, r);
    println!("radius {r}: {} pairs, brute force agrees: {}", pairs.len(), pairs.in_index == brute.in_index);
    println!("point 0 sees {:?}", pairs.neighbors(0));
    let crossing = pairs.out_index.iter().zip(&pairs.in_index).filter(|(i, j)| (**i < 2000) != (**j < 2000)).count();
    println!("pairs crossing the batch boundary: {crossing}");

    for v in [0.05, 0.1, 0.2] {
        let (coarse, map) = voxel_downsample(&cloud, v)?;
        let exact = map.kept_index.iter().enumerate().all(|(m, &p)| coarse.positions()[m] == cloud.positions()[p]);
        println!(
            "voxel {v}: {} -> {} points, batches {:?}, kept points are originals: {exact}",
            cloud.len(),
            coarse.len(),
            coarse.batch_offsets()
        );
    }

    let (coarse, map) = voxel_downsample(&cloud, 0.2)?;
    let ids = FeatureTensor::new((0..coarse.len()).map(|m| m as f64).collect(), coarse.len(), 1, 1)?;
    let up = upsample(&cloud, &map, &ids)?;
    println!("point 17 is represented by coarse point {} (original {})", up.get(17, 0, 0), map.kept_index[map.parent_of[17]]);
    Ok(())
}
