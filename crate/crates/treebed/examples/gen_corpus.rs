//! Writes the graph6 corpus of all connected graphs up to isomorphism for
//! n <= 8, used as the scan fixtures. Counts are validated against the
//! known sequence before anything is written.

use treebed::graph6;
use treebed::oracle::connected_graphs_upto_iso;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/treebed/tests/fixtures/connected_le8.g6".into());
    let known = [1usize, 1, 2, 6, 21, 112, 853, 11117];
    let mut lines = Vec::new();
    for n in 1..=8 {
        let t0 = std::time::Instant::now();
        let graphs = connected_graphs_upto_iso(n);
        assert_eq!(
            graphs.len(),
            known[n - 1],
            "connected graph count mismatch at n = {n}"
        );
        eprintln!("n = {n}: {} graphs in {:?}", graphs.len(), t0.elapsed());
        for g in graphs {
            lines.push(graph6::encode(&g));
        }
    }
    std::fs::write(&out, lines.join("\n") + "\n").unwrap();
    eprintln!("wrote {} graphs to {out}", lines.len());
}
