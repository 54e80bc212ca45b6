//! Measured access counters against the closed-form traffic model.

use pointconv::cost::predict_weight_reads_grouped;
use pointconv::generate::random_triplets;
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    let (n, kv, c, m) = (5000, 27, 16, 32);
    let count = 200_000;
    let list = sort_triplets(&random_triplets(count, n, n, kv, 1)?, SortAxis::ByK);
    let w = make_weights::<f32>(3, 1, c, m, 2)?;
    let f = FeatureTensor::<f32>::random(n, 1, c, 3);

    let (_, naive) = mvmr(&w, &f, &list, n, &ExecConfig::naive())?;
    println!("naive: {naive:?}");
    println!("  total {} = model {}", naive.total(), predict_access_naive(count as u64, c as u64, m as u64));

    println!("{:>5} {:>12} {:>14} {:>12} {:>12} {:>14}", "L", "w_reads", "w model", "fin", "fout", "total/naive");
    for len in [1, 8, 32, 128, 512, 2048] {
        let cfg = ExecConfig::grouped().with_group_len(len).with_blocks(m, c);
        let (_, g) = mvmr(&w, &f, &list, n, &cfg)?;
        let model = predict_weight_reads_grouped(count as u64, len as u64, kv as u64, c as u64, m as u64);
        println!(
            "{len:>5} {:>12} {:>14.0} {:>12} {:>12} {:>14.4}",
            g.w_reads,
            model,
            g.fin_reads,
            g.fout_atomic_writes,
            g.total() as f64 / naive.total() as f64
        );
    }
    let at_128 = predict_access_grouped(count as u64, 128, c as u64, m as u64);
    println!("one weight load per group at L=128 would cost {at_128} accesses in total");

    let (_, grad) = vvor(&FeatureTensor::<f32>::random(n, 1, m, 4), &f, &list, kv, &ExecConfig::grouped())?;
    println!("vvor, grouped L=128: {grad:?}");
    Ok(())
}
