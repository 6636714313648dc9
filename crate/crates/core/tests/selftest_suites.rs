//! Runs every selftest suite once and reports its outcome.

use ovc_core::selftest::run_all;

#[test]
fn all_suites_pass() {
    let reports = run_all();
    for r in &reports {
        println!("[{}] {:<2} {:<22} {:>8.2?}  {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.elapsed, r.detail);
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    assert!(failed.is_empty(), "failed suites: {failed:?}");
}
