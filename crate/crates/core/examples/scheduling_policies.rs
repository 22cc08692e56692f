//! Deferral, UE-side reselection and BS-side reassignment on the same trials.

use cpsc_fama::config::ExperimentConfig;
use cpsc_fama::mac::PolicyKind;
use cpsc_fama::sim::{run_point, status_counts, PointSummary};

fn main() -> cpsc_fama::Result<()> {
    let base = ExperimentConfig { u: 8, m: 16, trials: 100, ..Default::default() };
    for policy in [PolicyKind::Deferral, PolicyKind::UeReselect, PolicyKind::BsReassign] {
        let cfg = ExperimentConfig { collision_policy: policy, ..base.clone() };
        let records = run_point(&cfg)?;
        let s = PointSummary::of(&records);
        let counts: Vec<String> = status_counts(&records).iter().map(|(st, n)| format!("{st:?}={n}")).collect();
        println!("{policy:<12} rate {:.3} +/- {:.3}  {}", s.rate.mean, s.rate.ci95(), counts.join(" "));
    }
    Ok(())
}
