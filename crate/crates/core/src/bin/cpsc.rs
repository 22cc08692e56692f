use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpsc_fama::config::ExperimentConfig;
use cpsc_fama::sim::{self, SweepResult};
use cpsc_fama::{codebook, plot, validate, Error, Result};

#[derive(Parser)]
#[command(name = "cpsc", version, about = "CSI-free uplink fluid antenna multiple access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base point of a config (any sweep section is ignored).
    Run(ExperimentArgs),
    /// Run every point of the config's sweep.
    Sweep(ExperimentArgs),
    /// Run oracle suites, and optionally check a sweep CSV's collision column.
    Validate {
        /// Sweep CSV to check against the analytic collision curve (needs --config).
        csv: Option<PathBuf>,
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render SVG charts from a sweep CSV.
    Plot {
        csv: PathBuf,
        /// Config that produced the CSV; adds the analytic collision curve.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the DFT codebook for the config's M as CSV.
    ExportCodebook(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config field, e.g. `--set u=16 --set grid.n1=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(t) = self.trials {
            cfg.apply_override(&format!("trials={t}"))?;
        }
        if let Some(s) = self.seed {
            cfg.apply_override(&format!("seed={s}"))?;
        }
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }

    fn stem(&self) -> String {
        file_stem(&self.config)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Schema(_) | Error::InvalidArgument(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn write_result(result: &SweepResult, out: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(format!("{stem}.csv"));
    result.write_csv(fs::File::create(&path)?)?;
    Ok(path)
}

fn print_table(result: &SweepResult) {
    println!("{:>10} {:>10} {:>10} {:>9} {:>10} {:>9} {:>9}", "param", "value", "rate", "ci95", "sum_rate", "sum_ci95", "collide");
    for r in &result.rows {
        println!(
            "{:>10} {:>10} {:>10.4} {:>9.4} {:>10.4} {:>9.4} {:>9.4}",
            r.sweep_param, r.value, r.mean_rate_per_user, r.ci95, r.mean_sum_rate, r.sum_ci95, r.collision_rate
        );
    }
}

fn cmd_experiment(args: &ExperimentArgs, sweep: bool) -> Result<u8> {
    let mut cfg = args.load()?;
    if !sweep {
        cfg.sweep = None;
    } else if cfg.sweep.is_none() {
        return Err(Error::Config(format!("{} has no sweep section; use `run`", args.config.display())));
    }
    let threads = sim::threads_from_env()?;
    let result = sim::run_sweep_with_threads(&cfg, threads)?;
    print_table(&result);
    let path = write_result(&result, &args.out, &args.stem())?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_validate(csv: Option<&Path>, suite: Option<&str>, seed: u64, config: Option<&Path>) -> Result<u8> {
    let mut failed = false;
    if let Some(csv) = csv {
        let cfg_path = config.ok_or_else(|| Error::Config("checking a CSV needs --config".into()))?;
        let cfg = ExperimentConfig::load(cfg_path)?;
        let result = SweepResult::read_csv(fs::File::open(csv)?)?;
        for c in sim::check_collision_rows(&cfg, &result)? {
            let ok = c.z <= 3.0;
            failed |= !ok;
            println!(
                "collision-csv {}  value {} empirical {:.4} analytic {:.4} z {:.2}",
                if ok { "PASS" } else { "FAIL" },
                c.value,
                c.empirical,
                c.analytic,
                c.z
            );
        }
        if suite.is_none() {
            return Ok(failed as u8);
        }
    }
    let names: Vec<&str> = match suite {
        Some(s) => vec![s],
        None => validate::SUITES.to_vec(),
    };
    for name in names {
        let report = validate::run_suite(name, seed)?;
        failed |= !report.passed;
        println!("{report}");
    }
    Ok(failed as u8)
}

fn cmd_plot(csv: &Path, config: Option<&Path>, out: &Path) -> Result<u8> {
    let result = SweepResult::read_csv(fs::File::open(csv)?)?;
    let cfg = config.map(ExperimentConfig::load).transpose()?;
    for path in plot::write_sweep_charts(&result, cfg.as_ref(), out, &file_stem(csv))? {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_export(args: &ExperimentArgs) -> Result<u8> {
    let cfg = args.load()?;
    let book = codebook::make_dft_codebook(cfg.m)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("codebook_m{}.csv", cfg.m));
    book.write_csv(fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_experiment(a, false),
        Command::Sweep(a) => cmd_experiment(a, true),
        Command::Validate { csv, suite, seed, config } => {
            cmd_validate(csv.as_deref(), suite.as_deref(), *seed, config.as_deref())
        }
        Command::Plot { csv, config, out } => cmd_plot(csv, config.as_deref(), out),
        Command::ExportCodebook(a) => cmd_export(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
