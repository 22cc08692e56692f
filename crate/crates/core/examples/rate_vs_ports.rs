//! A small sweep over the number of ports for every scheme, written as CSV.

use cpsc_fama::config::{ExperimentConfig, Scheme, Sweep, SweepParam};
use cpsc_fama::sim::run_sweep;

fn main() -> cpsc_fama::Result<()> {
    let base = ExperimentConfig {
        u: 4,
        m: 16,
        k: 4,
        trials: 60,
        sweep: Some(Sweep { param: SweepParam::N, values: vec![9.0, 16.0, 36.0] }),
        ..Default::default()
    };
    for scheme in [Scheme::Cpsc, Scheme::CpscNoCombining, Scheme::BsRandomCodeword, Scheme::FixedAntenna] {
        let result = run_sweep(&ExperimentConfig { scheme, ..base.clone() })?;
        let line: Vec<String> =
            result.rows.iter().map(|r| format!("N={}: {:.3}", r.value, r.mean_rate_per_user)).collect();
        println!("{:<20} {}", scheme.name(), line.join("  "));
    }
    print!("{}", run_sweep(&base)?.to_csv_string());
    Ok(())
}
