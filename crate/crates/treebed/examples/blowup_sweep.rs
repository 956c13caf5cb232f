//! Dev harness: sweep the planted blow-up fixture across seeds and report
//! per-seed outcomes with the failure details needed for tuning.

use treebed::saturation::{planted_blowup_host, run_three_phases, PipelineOptions};
use treebed::schedule::{rat, PracticalParams};
use treebed::tree_sample::bounded_degree_tree;

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let k: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1500);
    let schedule = PracticalParams::default_for(rat(1, 10), rat(1, 2))
        .into_schedule()
        .unwrap();
    let mut ok = 0;
    let mut fail = 0;
    for seed in 0..seeds {
        let host = planted_blowup_host(3000, 10, 0.3, 0.9, seed);
        let tree = bounded_degree_tree(k, 8, seed.wrapping_mul(7919) + 1).unwrap();
        let opts = PipelineOptions {
            seed,
            initial_clusters: Some(10),
            ..Default::default()
        };
        let out = run_three_phases(&host.graph, &tree, &schedule, &opts);
        let critical_fail: Vec<String> = out
            .report
            .assertions
            .iter()
            .filter(|a| {
                !a.pass
                    && (a.name.contains("balancing")
                        || a.name.contains("postcondition")
                        || a.name.contains("disjoint"))
            })
            .map(|a| format!("{}: {}", a.name, a.detail))
            .collect();
        match (&out.error, out.report.result.validated, critical_fail.is_empty()) {
            (None, true, true) => {
                ok += 1;
                println!(
                    "seed {seed}: ok, domain {}, wall {} ms, phases {:?}",
                    out.report.result.domain,
                    out.report.wall_ms,
                    out.report
                        .phases
                        .iter()
                        .map(|p| p.vertices_placed)
                        .collect::<Vec<_>>()
                );
            }
            _ => {
                fail += 1;
                println!(
                    "seed {seed}: FAIL error={:?} critical={critical_fail:?} phases={:?} finish={:?} notes={:?}",
                    out.report.result.error,
                    out.report
                        .phases
                        .iter()
                        .map(|p| (p.vertices_placed, p.skipped_stuck))
                        .collect::<Vec<_>>(),
                    out.report.finish,
                    out.report
                        .phases
                        .iter()
                        .flat_map(|p| p.notes.clone())
                        .collect::<Vec<_>>()
                );
            }
        }
    }
    println!("ok {ok} / {}", ok + fail);
}
