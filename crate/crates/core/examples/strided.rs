//! A two-level encoder and decoder: strided convolutions down onto
//! downsampled points, upsampling back to the full cloud.

use pointconv::generate::uniform_cube;
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let cloud = uniform_cube(4000, 1.0, 1);
    let f0 = FeatureTensor::<f32>::random(cloud.len(), 1, 4, 2);
    let cfg = ExecConfig::default();

    let mut down1 = PointConvOp::new(ConvGeometry::native(0.08, 3), make_weights(3, 1, 4, 16, 3)?, cfg)?;
    let mut down2 = PointConvOp::new(ConvGeometry::native(0.16, 3), make_weights(3, 1, 16, 32, 4)?, cfg)?;
    let s1 = strided_block(&mut down1, &cloud, &f0, 0.08)?;
    let s2 = strided_block(&mut down2, &s1.coarse_cloud, &s1.coarse_features, 0.16)?;
    println!("levels: {} -> {} -> {} points", cloud.len(), s1.coarse_cloud.len(), s2.coarse_cloud.len());
    println!(
        "channels: {} -> {} -> {}",
        f0.channels(),
        s1.coarse_features.channels(),
        s2.coarse_features.channels()
    );

    let mut mix = PointConvOp::new(ConvGeometry::native(0.08, 3), make_weights(3, 1, 32, 8, 5)?, cfg)?;
    let up1 = upsample(&s1.coarse_cloud, &s2.map, &s2.coarse_features)?;
    let mixed = mix.forward(&s1.coarse_cloud, &s1.coarse_cloud, &up1)?;
    let up0 = upsample(&cloud, &s1.map, &mixed)?;
    println!("decoder output {} rows x {} channels", up0.rows(), up0.channels());
    let (g1, _) = down1.backward(&FeatureTensor::random(s1.coarse_cloud.len(), 1, 16, 6))?;
    println!("gradient of the first strided layer covers all {} input rows", g1.rows());
    Ok(())
}
