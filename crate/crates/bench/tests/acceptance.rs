//! Acceptance suite: runs every criterion at its pinned tolerance and fails
//! if any of them misses. The same checks back the `accept` CLI subcommand.

use conex_bench::acceptance;

#[test]
fn acceptance_suite_passes() {
    let bin = std::path::PathBuf::from(env!("CARGO_BIN_EXE_conex-bench"));
    let results = acceptance::run_acceptance("", Some(&bin));
    assert_eq!(results.len(), 11, "all criteria must run");
    let failures: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.line())
        .collect();
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}
