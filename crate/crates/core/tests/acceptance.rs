//! One line per acceptance criterion; fails if any criterion fails.
//!
//! Lines go straight to the stderr handle, which the test harness does not
//! capture, so they show up in a plain `cargo test` log.

use std::io::Write;

use spinsol::suite::{run_suite, SuiteConfig};

#[test]
fn acceptance() {
    let report = run_suite(&SuiteConfig::default()).expect("suite runs");
    let mut err = std::io::stderr().lock();
    writeln!(err, "acceptance (seed {})", report.seed).unwrap();
    for r in &report.results {
        writeln!(err, "{r}").unwrap();
        for (k, v) in &r.details {
            writeln!(err, "      {k} = {v:.3e}").unwrap();
        }
    }
    let failed: Vec<u8> = report.results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
