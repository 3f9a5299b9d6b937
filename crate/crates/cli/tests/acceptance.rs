//! Runs the full validation suite and prints one line per criterion.
//! Inconclusive checks count as failures here.

use std::process::ExitCode;

use torus_polymer_cli::report::Status;
use torus_polymer_cli::suite::{run_suite, Suite};

const SEED: u64 = 7;

fn main() -> ExitCode {
    println!("acceptance: full suite, seed {SEED}");
    let report = run_suite(Suite::Full, SEED, &mut |c| {
        let verdict = if c.status == Status::Pass {
            "PASS"
        } else {
            "FAIL"
        };
        let note = if c.status == Status::Inconclusive {
            " [inconclusive]"
        } else {
            ""
        };
        println!(
            "{verdict} criterion {:>2}: {}{note}; measured {:.6e}, target {:.6e}, tolerance {:.3e}; {:.1}s of {}s; {}",
            c.id, c.name, c.measured, c.target, c.tolerance, c.elapsed_seconds, c.budget_seconds, c.detail
        );
    });
    let failures = report
        .checks
        .iter()
        .filter(|c| c.status != Status::Pass)
        .count();
    println!(
        "acceptance: {} of {} criteria passed",
        report.checks.len() - failures,
        report.checks.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
