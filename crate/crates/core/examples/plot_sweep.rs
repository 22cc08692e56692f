use cpsc_fama::config::{ExperimentConfig, Scheme, Sweep, SweepParam};
use cpsc_fama::plot::write_sweep_charts;
use cpsc_fama::sim::run_sweep;

fn main() -> cpsc_fama::Result<()> {
    let cfg = ExperimentConfig {
        u: 4,
        trials: 400,
        scheme: Scheme::BsRandomCodeword,
        grid: cpsc_fama::channel::PortGrid::new(2, 2, 1.0, 1.0)?,
        k: 2,
        sweep: Some(Sweep { param: SweepParam::M, values: vec![4.0, 8.0, 16.0, 32.0] }),
        ..Default::default()
    };
    let result = run_sweep(&cfg)?;
    let dir = std::env::temp_dir().join("cpsc_plot_example");
    for path in write_sweep_charts(&result, Some(&cfg), &dir, "collision_vs_m")? {
        println!("{}", path.display());
    }
    Ok(())
}
