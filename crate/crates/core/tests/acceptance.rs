//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
//!
//! `EQLAB_CRITERIA=3,9` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use eqlab::acceptance::{run_criterion, Bench, CRITERIA};

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("EQLAB_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let bench = Bench::new(7);
    let mut ok = true;
    for id in 1..=CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let r = run_criterion(&bench, id);
        println!("{}", r.line());
        eprintln!("    criterion {id}: {:.1} s", t.elapsed().as_secs_f64());
        for m in r.measurements.iter().filter(|m| !m.passed) {
            eprintln!(
                "    failed: {} = {:?} (bound {:?})",
                m.name, m.value, m.bound
            );
        }
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
