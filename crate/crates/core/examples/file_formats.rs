//! Binary and text point clouds, triplet files and CSV counter rows.

use std::io::Cursor;

use pointconv::generate::uniform_cube;
use pointconv::io::{read_npc1, read_triplets, read_xyz, write_counter_csv, write_npc1, write_triplets, write_xyz, CounterRow};
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let a = uniform_cube(3, 1.0, 1);
    let b = uniform_cube(2, 1.0, 2);
    let mut pts = a.positions().to_vec();
    pts.extend_from_slice(b.positions());
    let cloud = make_point_cloud(pts, vec![0, 3, 5])?;

    let mut npc = Vec::new();
    write_npc1(&mut npc, &cloud)?;
    println!("NPC1: {} bytes, header {:02x?}", npc.len(), &npc[..16]);
    assert_eq!(read_npc1(&mut Cursor::new(&npc))?, cloud);

    let mut xyz = Vec::new();
    write_xyz(&mut xyz, &cloud)?;
    print!("XYZ:\n{}", String::from_utf8_lossy(&xyz));
    assert_eq!(read_xyz(Cursor::new(&xyz))?.positions(), cloud.positions());

    let list = sort_triplets(&build_triplets_native(&cloud, &cloud, &ConvGeometry::native(0.5, 3))?, SortAxis::ByK);
    let mut trp = Vec::new();
    write_triplets(&mut trp, &list)?;
    println!("TRP1: {} triplets in {} bytes", list.len(), trp.len());
    assert_eq!(read_triplets(&mut Cursor::new(&trp))?, list);

    let (_, counters) = mvmr(&make_weights::<f32>(3, 1, 2, 2, 0)?, &FeatureTensor::random(5, 1, 2, 0), &list, 5, &ExecConfig::naive())?;
    let row = CounterRow {
        executor: "naive".into(),
        sort_axis: list.sort_axis.to_string(),
        group_len: 1,
        block_out: 2,
        block_in: 2,
        counters,
        wall_time_ns: None,
        kernel: "mvmr".into(),
        workers: 1,
        deterministic: false,
        precision: "f32".into(),
        n_triplets: list.len(),
        c_in: 2,
        c_out: 2,
        kernel_volume: 27,
        groups: 1,
        repetition: "0".into(),
        aux_bytes: 0,
        pred_naive: predict_access_naive(list.len() as u64, 2, 2),
        pred_grouped: predict_access_grouped(list.len() as u64, 128, 2, 2),
        output_fnv: 0,
    };
    write_counter_csv(std::io::stdout().lock(), &[row])?;
    Ok(())
}
