//! Corpus-level scan checks beyond the acceptance gate: the min-degree plus
//! high-degree-count hypothesis over all small connected hosts.

use treebed::graph6;
use treebed::scan::conjecture13_scan;

#[test]
fn big_degree_scan_small_corpus() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/connected_le8.g6"
    );
    let text = std::fs::read_to_string(path).unwrap();
    let hosts = graph6::decode_file(&text).unwrap();
    let report = conjecture13_scan(&hosts, &[4, 6], 100_000_000);
    assert!(
        report.violations.is_empty(),
        "violations: {:?}",
        report.violations
    );
    assert_eq!(report.timeouts, 0);
    assert!(report.hosts_in_hypothesis > 0);
    // No square k in range, so no boundary probes here.
    assert!(report.boundary_probes.is_empty());
}
