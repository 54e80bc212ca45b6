//! Naive against grouped execution: wall time, agreement and
//! deterministic mode.
//!
//! `cargo run --release --example executors -- 300000`

use std::time::Instant;

use pointconv::generate::random_triplets;
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200_000);
    let n = 20_000;
    let list = sort_triplets(&random_triplets(count, n, n, 27, 1)?, SortAxis::ByK);
    let w = make_weights::<f32>(3, 1, 64, 128, 2)?;
    let f = FeatureTensor::<f32>::random(n, 1, 64, 3);

    let configs = [
        ("naive", ExecConfig::naive()),
        ("grouped L=128 32x32", ExecConfig::grouped()),
        ("grouped L=128 32x64", ExecConfig::grouped().with_blocks(32, 64)),
        ("naive deterministic", ExecConfig::naive().with_deterministic(true)),
        ("grouped deterministic", ExecConfig::grouped().with_blocks(32, 64).with_deterministic(true)),
    ];
    let reference = mvmr(&w, &f, &list, n, &configs[0].1)?.0.to_f64();
    println!("{count} triplets, C 64 -> 128, K=27");
    for (name, cfg) in configs {
        let start = Instant::now();
        let (out, _) = mvmr(&w, &f, &list, n, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let err = pointconv::oracle::max_rel_error(out.to_f64().values(), reference.values());
        println!("{name:<24} {secs:>8.3}s  rel diff to naive {err:.1e}");
    }

    let det = ExecConfig::grouped().with_deterministic(true);
    let a = mvmr(&w, &f, &list, n, &det.with_workers(1))?.0;
    let b = mvmr(&w, &f, &list, n, &det.with_workers(8))?.0;
    let same = a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("deterministic output identical for 1 and 8 workers: {same}");
    Ok(())
}
