//! A point convolution layer: forward, backward and a finite-difference
//! check of both gradients.

use pointconv::generate::uniform_cube;
use pointconv::oracle::{finite_difference_gradients, max_rel_error};
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let cloud = uniform_cube(64, 1.0, 3);
    let weights = make_weights::<f64>(3, 2, 3, 4, 5)?;
    let mut layer = PointConvOp::new(ConvGeometry::native(0.3, 3), weights.clone(), ExecConfig::default())?;

    let f_in = FeatureTensor::<f64>::random(cloud.len(), 2, 3, 1);
    let f_out = layer.forward(&cloud, &cloud, &f_in)?;
    let triplets = layer.triplets().expect("forward ran");
    println!(
        "{} points, {} triplets sorted {}, output {}x{}x{}",
        cloud.len(),
        triplets.len(),
        triplets.sort_axis,
        f_out.rows(),
        f_out.groups(),
        f_out.channels()
    );

    let g_out = FeatureTensor::<f64>::random(cloud.len(), 2, 4, 2);
    let (g_in, g_w) = layer.backward(&g_out)?;
    let (fd_in, fd_w) = finite_difference_gradients(&weights, &f_in, triplets, &g_out, 1e-6)?;
    println!("input gradient vs central differences: rel err {:.2e}", max_rel_error(g_in.values(), &fd_in));
    println!("weight gradient vs central differences: rel err {:.2e}", max_rel_error(g_w.values(), &fd_w));

    // plain gradient step on the weights
    let step = g_w.to_weight_layout()?;
    let loss = |out: &FeatureTensor<f64>| out.values().iter().zip(g_out.values()).map(|(a, b)| a * b).sum::<f64>();
    let before = loss(&f_out);
    for (w, g) in layer.weights.values_mut().iter_mut().zip(step.values()) {
        *w -= 0.01 * g;
    }
    let after = loss(&layer.forward(&cloud, &cloud, &f_in)?);
    println!("<G, F_out> before {before:.4}, after one step {after:.4}");
    Ok(())
}
