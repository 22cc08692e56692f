//! Collision probability of uniform codeword choice: exact, asymptotic and simulated.

use cpsc_fama::mac::{collision_prob_asymptotic, collision_prob_exact};
use cpsc_fama::validate::uniform_collision_rate;

fn main() -> cpsc_fama::Result<()> {
    let u = 8;
    println!("{:>5} {:>9} {:>11} {:>10}", "M", "exact", "asymptotic", "simulated");
    for m in [8, 16, 32, 64, 128, 640] {
        let sim = uniform_collision_rate(m, u, 5_000, 11)?;
        println!(
            "{m:>5} {:>9.4} {:>11.4} {:>10.4}",
            collision_prob_exact(m, u),
            collision_prob_asymptotic(m, u),
            sim.empirical
        );
    }
    Ok(())
}
