//! Every oracle suite at its standard size.

use cpsc_fama::validate::{run_suite, SUITES};

fn main() -> cpsc_fama::Result<()> {
    let mut all = true;
    for name in SUITES {
        let report = run_suite(name, 1)?;
        all &= report.passed;
        println!("{report}");
    }
    if !all {
        std::process::exit(1);
    }
    Ok(())
}
