//! Triplet construction in native and degraded mode, sorting and the
//! sort-axis heuristic.

use std::collections::BTreeSet;

use pointconv::generate::grid_snapped;
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let c = make_point_cloud(vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [1.0, 0.2, 0.0]], vec![0, 3])?;
    let t = build_triplets_native(&c, &c, &ConvGeometry::native(0.6, 3))?;
    println!("three points, r=0.6, t=3:");
    for (i, j, k) in t.iter() {
        println!("  out {i} <- in {j} through W_{k}");
    }
    println!("kernel index of +r along x: {}", local_voxel_kernel_index(&[0.0; 3], &[0.6, 0.0, 0.0], 0.6, 3));

    let v = 0.0625;
    let grid = grid_snapped(3000, v, 1.0, 7)?;
    let (degraded, sites) = build_triplets_degraded(&grid, &ConvGeometry::degraded(v, 3))?;
    let native = build_triplets_native(&grid, &grid, &ConvGeometry::native(1.866 * v, 3))?;
    let set = |l: &TripletList| l.iter().collect::<BTreeSet<_>>();
    println!(
        "grid of {} voxel centres: degraded {} triplets on {} sites, native at r=1.866v {} triplets, same set: {}",
        grid.len(),
        degraded.len(),
        sites.len(),
        native.len(),
        set(&native) == set(&degraded)
    );
    let literal = build_triplets_native(&grid, &grid, &ConvGeometry::native(v * 3.0 * 3f64.sqrt() / 2.0, 3))?;
    println!("at r=2.598v the ball reaches past the 3x3x3 stencil: {} triplets", literal.len());

    let axis = choose_sort_axis(&native);
    let sorted = sort_triplets(&native, axis);
    let runs = 1 + sorted.k.windows(2).filter(|w| w[0] != w[1]).count();
    println!("heuristic picks {axis}; sorted list has {runs} runs of equal k over {} triplets", sorted.len());
    for t in [1, 3, 5, 7] {
        let l = build_triplets_native(&grid, &grid, &ConvGeometry::native(2.5 * v, t))?;
        let used = l.k.iter().collect::<BTreeSet<_>>().len();
        println!("t={t}: {} triplets over {used} of {} kernel cells", l.len(), l.kernel_volume);
    }
    Ok(())
}
