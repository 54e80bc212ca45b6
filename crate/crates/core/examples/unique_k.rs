//! Distinct kernel indices per sorted group: closed form, approximation,
//! Monte-Carlo and exact enumeration.

use pointconv::oracle::{unique_k_exhaustive, unique_k_simulator};
use pointconv::prelude::*;

fn main() -> pointconv::Result<()> {
    println!("{:>4} {:>7} {:>5} {:>11} {:>11} {:>18}", "K", "|T|", "L", "closed", "1+LK/|T|", "simulated");
    for (k, t, l) in [(27, 100_000, 128), (27, 10_000, 32), (27, 1000, 128), (8, 64, 16), (27, 27, 27)] {
        let e = expected_unique_per_group(k, t, l)?;
        let s = unique_k_simulator(k as usize, t as usize, l as usize, 2000, 1)?;
        println!(
            "{k:>4} {t:>7} {l:>5} {:>11.4} {:>11.4} {:>11.4} ± {:.4}",
            e.closed_form, e.approximation, s.mean, s.std_error
        );
    }
    let e = expected_unique_per_group(2, 4, 2)?;
    println!(
        "K=2 |T|=4 L=2: exact {}, closed form {:.4}, approximation {:.4}",
        unique_k_exhaustive(2, 4, 2)?,
        e.closed_form,
        e.approximation
    );
    Ok(())
}
