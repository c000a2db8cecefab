//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `RESOFORGE_ACCEPTANCE_SEED` overrides the seed, `RESOFORGE_ACCEPTANCE_QUICK=1` runs the reduced battery.

use std::io::Write;
use std::process::ExitCode;

use resoforge::suite::{run_suite, SuiteConfig};

fn main() -> ExitCode {
    let mut config = SuiteConfig::default();
    if let Ok(seed) = std::env::var("RESOFORGE_ACCEPTANCE_SEED") {
        config.seed = seed.parse().expect("RESOFORGE_ACCEPTANCE_SEED must be an integer");
    }
    config.quick = std::env::var("RESOFORGE_ACCEPTANCE_QUICK").is_ok_and(|v| v == "1");
    let report = run_suite(&config);
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "\nacceptance battery (seed {}, quick {})",
        config.seed, config.quick
    );
    let _ = write!(out, "{}", report.table());
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    let _ = writeln!(out, "{passed}/{} criteria pass\n", report.criteria.len());
    if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
