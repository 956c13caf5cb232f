//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --release --test acceptance -- --nocapture` to see
//! them). Every tolerance is pinned here, in code.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::One;
use treebed::bitset::VertexSet;
use treebed::constructions::{broom_pair, skew_counterexample, sqrt_tightness, HostKind};
use treebed::embed::{
    embed_microtree, embed_seeds, Embedding, MicrotreeEmbedInput, SeedEmbedInput,
};
use treebed::experiment::two_clique_host;
use treebed::graph::{degree_stats, random_bipartite, random_gnp};
use treebed::graph6;
use treebed::greedy_embed;
use treebed::oracle::{exact_embed, OracleOutcome};
use treebed::partition::{
    fine_partition, one_sided_partition, validate_fine_partition, validate_one_sided,
};
use treebed::regularity::{is_regular_pair, verify_witness, PairOptions, Verdict};
use treebed::rng;
use treebed::saturation::{planted_blowup_host, run_three_phases, PipelineOptions};
use treebed::schedule::{derive_constants, m_of_eps, rat, Mode, PracticalParams, M_CAP_DEFAULT};
use treebed::scan::erdos_sos_scan;
use treebed::tree::ColorClass;
use treebed::tree_enum::{free_trees_vec, otter_counts};
use treebed::tree_sample::{bounded_degree_tree, sample_labelled_tree, UnlabelledSampler};
use treebed::validate_embedding;

use rand::Rng as _;

fn verdict(criterion: &str, pass: bool, detail: String) {
    println!(
        "[acceptance] {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_01_partition_definitions() {
    let start = std::time::Instant::now();
    let mut rng = rng::seeded(101);
    let mut failures = 0usize;
    let trees = 1000usize;
    for i in 0..trees {
        let k = rng.random_range(50..=5000usize);
        let t = sample_labelled_tree(k + 1, 7_000 + i as u64);
        let ell = k.div_ceil(10);
        let fp = match fine_partition(&t, ell) {
            Ok(fp) => fp,
            Err(e) => {
                failures += 1;
                eprintln!("construction failure at k = {k}: {e}");
                continue;
            }
        };
        let rep = validate_fine_partition(&t, &fp);
        if !rep.pass() {
            failures += 1;
            eprintln!("fine validator failed at k = {k}: {:?}", rep.first_failure());
            continue;
        }
        // Explicit bound: max(|W_A|, |W_B|) <= 336 k / ell.
        if fp.w_a.len().max(fp.w_b.len()) * ell > 336 * k {
            failures += 1;
            continue;
        }
        let (c1, c2) = t.class_sizes();
        let bounded = if c1 <= c2 { ColorClass::V2 } else { ColorClass::V1 };
        let os = match one_sided_partition(&t, ell, bounded) {
            Ok(p) => p,
            Err(e) => {
                failures += 1;
                eprintln!("one-sided failure at k = {k}: {e}");
                continue;
            }
        };
        let rep = validate_one_sided(&t, &os);
        if !rep.pass() {
            failures += 1;
            continue;
        }
        let delta = t.max_degree_in_class(bounded);
        if os.w.len() * ell > 336 * k * (1 + delta) || os.d_double.len() * ell > 336 * k {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "1 partition definitions (1000 trees, ell = k/10)",
        failures == 0 && elapsed.as_secs() < 120,
        format!("{failures} failures, {elapsed:.2?} (budget 120s)"),
    );
}

#[test]
fn criterion_02_tree_counting() {
    let start = std::time::Instant::now();
    let counts = otter_counts(16);
    let mut mismatches = 0usize;
    for n in 1..=16 {
        let enumerated = free_trees_vec(n).len();
        let counted: u64 = (&counts.free[n]).try_into().unwrap();
        if enumerated as u64 != counted {
            mismatches += 1;
            eprintln!("n = {n}: enumerate {enumerated} vs otter {counted}");
        }
    }
    let s7: u64 = (&counts.free[7]).try_into().unwrap();
    let s13: u64 = (&counts.free[13]).try_into().unwrap();
    let checkpoints = s7 == 11 && s13 == 1301;
    let elapsed = start.elapsed();
    verdict(
        "2 tree counting (two independent methods, n <= 16)",
        mismatches == 0 && checkpoints && elapsed.as_secs() < 60,
        format!("{mismatches} mismatches, s_7 = {s7}, s_13 = {s13}, {elapsed:.2?} (budget 60s)"),
    );
}

#[test]
fn criterion_03_balanced_tree_experiment() {
    let start = std::time::Instant::now();
    // (a) balanced <=> embeddable in the two-clique host, exhaustively.
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for k in [4usize, 6, 8, 10, 12] {
        let host = two_clique_host(k);
        for t in free_trees_vec(k + 1) {
            total += 1;
            let balanced = t.is_balanced().unwrap();
            let embedded = match exact_embed(&t, &host, 500_000_000) {
                OracleOutcome::Embedded(_) => true,
                OracleOutcome::NotContained => false,
                OracleOutcome::Timeout => {
                    mismatches += 1;
                    continue;
                }
            };
            if balanced != embedded {
                mismatches += 1;
            }
        }
    }
    // (b) log-log decay slope over sampled k.
    let mut pts = Vec::new();
    for k in (10..=200).step_by(10) {
        let sampler = UnlabelledSampler::new(k + 1);
        let mut r = rng::seeded(1000 + k as u64);
        let samples = 10_000u64;
        let balanced = (0..samples)
            .filter(|_| sampler.sample_free(&mut r).is_balanced().unwrap())
            .count() as f64;
        pts.push(((k as f64).ln(), (balanced / samples as f64).ln()));
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = (pts.iter().map(|p| p.0).sum(), pts.iter().map(|p| p.1).sum());
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let elapsed = start.elapsed();
    verdict(
        "3 balanced-tree experiment (equivalence + decay slope)",
        mismatches == 0 && (-0.75..=-0.25).contains(&slope) && elapsed.as_secs() < 600,
        format!(
            "{mismatches} mismatches over {total} trees, slope {slope:.3} in [-0.75, -0.25], {elapsed:.2?} (budget 600s)"
        ),
    );
}

#[test]
fn criterion_04_constructions_certified() {
    let start = std::time::Instant::now();
    let mut problems = Vec::new();
    // Non-containment holds for the two-clique host at both k and for the
    // bipartite host at k = 12. (At k = 6 the bipartite host *does* embed
    // the one-leaf spider: the class counting degenerates; see the unit
    // test covering that exception.)
    let cases = [
        (6usize, HostKind::TwoCliques),
        (12, HostKind::TwoCliques),
        (12, HostKind::CompleteBipartite),
    ];
    for (k, kind) in cases {
        let rep = broom_pair(k, kind).unwrap();
        if !rep.all_pass() {
            problems.push(format!("broom({k}, {kind:?}) certificates"));
        }
        match exact_embed(&rep.tree, &rep.host, 500_000_000) {
            OracleOutcome::NotContained => {}
            other => problems.push(format!(
                "broom({k}, {kind:?}) oracle returned {other:?}, expected NotContained"
            )),
        }
    }
    // Certificates still pass for the k = 6 bipartite pair.
    let rep = broom_pair(6, HostKind::CompleteBipartite).unwrap();
    if !rep.all_pass() {
        problems.push("broom(6, CompleteBipartite) certificates".into());
    }
    let rep = sqrt_tightness(9).unwrap();
    if !rep.all_pass() {
        problems.push("sqrt_tightness(9) certificates".into());
    }
    match exact_embed(&rep.tree, &rep.host, 500_000_000) {
        OracleOutcome::NotContained => {}
        other => problems.push(format!("sqrt_tightness(9) oracle returned {other:?}")),
    }
    let skew = skew_counterexample(&rat(1, 4), &rat(1, 100), 30_000).unwrap();
    if !skew.all_pass() {
        problems.push(format!(
            "skew(1/4, 1/100, 30000) certificates: {:?}",
            skew.certificates.iter().filter(|c| !c.pass).collect::<Vec<_>>()
        ));
    }
    let elapsed = start.elapsed();
    verdict(
        "4 constructions certified (broom, sqrt-tightness, skew)",
        problems.is_empty() && elapsed.as_secs() < 300,
        format!("problems: {problems:?}, {elapsed:.2?} (budget 300s)"),
    );
}

#[test]
fn criterion_05_erdos_sos_exhaustive_scan() {
    let start = std::time::Instant::now();
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/connected_le8.g6"
    );
    let text = std::fs::read_to_string(path).expect("corpus fixture present");
    let hosts = graph6::decode_file(&text).unwrap();
    assert_eq!(hosts.len(), 12_113, "corpus holds all connected graphs n <= 8");
    let report = erdos_sos_scan(&hosts, 7, 500_000_000);
    let elapsed = start.elapsed();
    verdict(
        "5 average-degree scan (all connected hosts n <= 8, k <= 7)",
        report.violations.is_empty() && report.timeouts == 0 && elapsed.as_secs() < 1800,
        format!(
            "{} instances, {} violations, {} timeouts, {elapsed:.2?} (budget 1800s)",
            report.instances_checked,
            report.violations.len(),
            report.timeouts
        ),
    );
}

#[test]
fn criterion_06_greedy_guarantee() {
    let start = std::time::Instant::now();
    let mut successes = 0usize;
    let mut attempted = 0usize;
    let mut seed = 0u64;
    while attempted < 500 {
        let g = random_gnp(90, 0.75, 60_000 + seed);
        seed += 1;
        let (min_deg, _, _) = degree_stats(&g).unwrap();
        if min_deg < 50 {
            continue;
        }
        attempted += 1;
        let t = sample_labelled_tree(51, 61_000 + seed);
        match greedy_embed(&t, &g) {
            Ok(emb) if validate_embedding(&t, &g, &emb, true).is_ok() => successes += 1,
            _ => {}
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "6 greedy guarantee (min degree >= |T| - 1)",
        successes == 500,
        format!("{successes}/500 validated embeddings, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_07_regularity_oracle_agreement() {
    let start = std::time::Instant::now();
    let mut pairs_checked = 0usize;
    let mut regular_agreements = 0usize;
    let mut regular_claims = 0usize;
    let mut witness_failures = 0usize;
    let heur = PairOptions {
        force_heuristic: true,
        ..Default::default()
    };
    let exact = PairOptions::default();
    let mut irregular_claims = 0usize;
    for seed in 0..500u64 {
        let nx = 10 + (seed % 7) as usize;
        let ny = 10 + (seed % 5) as usize;
        // Mix the density range with extreme pairs, where the spectral
        // certificate genuinely certifies, so the agreement check is
        // non-vacuous.
        let p = match seed % 10 {
            0 => 0.0,
            1 => 1.0,
            _ => 0.1 + 0.8 * ((seed % 13) as f64) / 12.0,
        };
        let g = random_bipartite(nx, ny, p, 80_000 + seed);
        let x: Vec<usize> = (0..nx).collect();
        let y: Vec<usize> = (nx..nx + ny).collect();
        for eps in [Rational64::new(1, 4), Rational64::new(1, 5)] {
            pairs_checked += 1;
            let hv = is_regular_pair(&g, &x, &y, eps, &heur).unwrap();
            match hv {
                Verdict::Regular => {
                    regular_claims += 1;
                    if is_regular_pair(&g, &x, &y, eps, &exact)
                        .unwrap()
                        .is_regular()
                    {
                        regular_agreements += 1;
                    }
                }
                Verdict::Irregular {
                    x_witness,
                    y_witness,
                } => {
                    irregular_claims += 1;
                    if !verify_witness(&g, &x, &y, &x_witness, &y_witness, eps) {
                        witness_failures += 1;
                    }
                }
                Verdict::Unknown => {}
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "7 regularity oracle agreement (500 pairs, eps in {1/4, 1/5})",
        regular_agreements == regular_claims && witness_failures == 0 && regular_claims > 0,
        format!(
            "{pairs_checked} checks: {regular_claims} heuristic Regular all exact-confirmed, {irregular_claims} witnessed irregular with {witness_failures} re-verification failures, {elapsed:.2?}"
        ),
    );
}

/// Caterpillar with `w` seeds at mutual distance 4 and `dd` singleton leaves.
fn seed_fixture(w: usize, dd: usize) -> (treebed::Tree, treebed::OneSidedPartition) {
    let mut parent: Vec<Option<u32>> = vec![None];
    let mut w_ids = vec![0usize];
    let mut last = 0u32;
    for _ in 1..w {
        for _ in 0..3 {
            parent.push(Some(last));
            last = parent.len() as u32 - 1;
        }
        parent.push(Some(last));
        last = parent.len() as u32 - 1;
        w_ids.push(last as usize);
    }
    let mut dd_ids = Vec::new();
    for &wv in w_ids.iter().take(dd) {
        parent.push(Some(wv as u32));
        dd_ids.push(parent.len() - 1);
    }
    let t = treebed::Tree::from_parents(parent).unwrap();
    let excluded: std::collections::BTreeSet<usize> =
        w_ids.iter().chain(dd_ids.iter()).copied().collect();
    let mut d_prime = Vec::new();
    let mut seen = vec![false; t.n()];
    for v in 0..t.n() {
        if seen[v] || excluded.contains(&v) {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(x) = stack.pop() {
            comp.push(x);
            for u in t.neighbors(x) {
                if !seen[u] && !excluded.contains(&u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        d_prime.push(comp);
    }
    let p = treebed::OneSidedPartition {
        w: w_ids,
        d_prime,
        d_double: dd_ids,
        ell: 5,
        delta_cap: t.max_degree_in_class(ColorClass::V2),
        bounded_class: ColorClass::V2,
    };
    (t, p)
}

#[test]
fn criterion_08_pair_embedding_at_scale() {
    let start = std::time::Instant::now();
    let mut seed_failures = 0usize;
    let eps = Rational64::new(1, 50);
    for trial in 0..200u64 {
        let (t, p) = seed_fixture(15, 5);
        let g = random_bipartite(500, 500, 0.3, 90_000 + trial);
        let v1: Vec<usize> = (0..500).collect();
        let v2: Vec<usize> = (500..1000).collect();
        let d = Rational64::new(g.edges_between(&v1, &v2) as i64, 500 * 500);
        let mut u = VertexSet::new(g.n());
        for v in 0..10 {
            u.insert(v);
        }
        let input = SeedEmbedInput {
            tree: &t,
            partition: &p,
            host: &g,
            v1: &v1,
            v2: &v2,
            forbidden: &u,
            density: d,
            eps,
        };
        match embed_seeds(&input) {
            Ok(emb)
                if validate_embedding(&t, &g, &emb, false).is_ok()
                    && emb.domain_size() == 20
                    && (0..10).all(|v| !emb.is_used(v)) => {}
            other => {
                seed_failures += 1;
                if let Err(e) = other {
                    eprintln!("embed_seeds trial {trial}: {e}");
                }
            }
        }
    }
    let mut micro_failures = 0usize;
    for trial in 0..200u64 {
        let n = 4 + (trial % 7) as usize; // |K| in 4..=10
        let t = sample_labelled_tree(n, 95_000 + trial);
        let comp: Vec<usize> = (0..n).collect();
        let x1 = 0usize;
        let x2 = (1..n)
            .find(|&v| t.class_of(v) == t.class_of(0))
            .unwrap_or(0);
        let g = random_bipartite(500, 500, 0.3, 96_000 + trial);
        let u_cluster: Vec<usize> = (0..500).collect();
        let v_cluster: Vec<usize> = (500..1000).collect();
        let d = Rational64::new(
            g.edges_between(&u_cluster, &v_cluster) as i64,
            500 * 500,
        );
        let (anchor1, anchor2) = if x1 == x2 { (500, 500) } else { (500, 501) };
        let mut emb = Embedding::new(t.n(), g.n());
        let input = MicrotreeEmbedInput {
            tree: &t,
            comp: &comp,
            host: &g,
            u_cluster: &u_cluster,
            v_cluster: &v_cluster,
            anchor1,
            anchor2,
            attach1: x1,
            attach2: x2,
            forbidden: &VertexSet::new(g.n()),
            density: d,
            eps,
            typicality_margin: eps,
        };
        match embed_microtree(&input, &mut emb) {
            Ok(placed)
                if placed.len() == n
                    && validate_embedding(&t, &g, &emb, true).is_ok()
                    && g.has_edge(anchor1, emb.host_of(x1).unwrap())
                    && g.has_edge(anchor2, emb.host_of(x2).unwrap()) => {}
            other => {
                micro_failures += 1;
                if let Err(e) = other {
                    eprintln!("embed_microtree trial {trial}: {e}");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "8 pair-embedding propositions at scale (200 + 200 trials)",
        seed_failures == 0 && micro_failures == 0,
        format!("{seed_failures} seed failures, {micro_failures} microtree failures, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_09_full_pipeline() {
    let start = std::time::Instant::now();
    let schedule = PracticalParams::default_for(rat(1, 10), rat(1, 2))
        .into_schedule()
        .unwrap();
    let mut successes = 0usize;
    let mut invariant_failures = 0usize;
    for seed in 0..40u64 {
        let host = planted_blowup_host(3000, 10, 0.3, 0.9, seed);
        let tree = bounded_degree_tree(1500, 8, seed.wrapping_mul(7919) + 1).unwrap();
        let opts = PipelineOptions {
            seed,
            initial_clusters: Some(10),
            ..Default::default()
        };
        let out = run_three_phases(&host.graph, &tree, &schedule, &opts);
        if out.error.is_none() && out.report.result.validated {
            // Per-phase invariant assertions must hold on successful runs:
            // balancing condition, saturation postconditions, F-disjointness.
            let bad = out
                .report
                .assertions
                .iter()
                .filter(|a| {
                    !a.pass
                        && (a.name.contains("balancing")
                            || a.name.contains("postcondition")
                            || a.name.contains("disjoint"))
                })
                .count();
            if bad == 0 {
                successes += 1;
            } else {
                invariant_failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "9 full pipeline (planted blow-up, 40 seeds)",
        successes >= 38 && invariant_failures == 0 && elapsed.as_secs() < 900,
        format!(
            "{successes}/40 validated total embeddings, {invariant_failures} invariant failures, {elapsed:.2?} (budget 900s)"
        ),
    );
}

#[test]
fn criterion_10_constant_schedule() {
    let start = std::time::Instant::now();
    let big = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let etas = [big(1, 10), big(1, 5), big(3, 10), big(2, 5)];
    let rs = [big(1, 10), big(1, 4), big(1, 2), big(3, 4), big(9, 10)];
    let mut checked = 0usize;
    let mut wrong = 0usize;
    for eta in &etas {
        for r in &rs {
            checked += 1;
            let s = derive_constants(eta, r, Mode::Theoretical).unwrap();
            // Re-derive each constant independently.
            let d = eta * r * eta * r / big(1000, 1);
            let erd = eta * r * &d;
            let mut eps = BigRational::one();
            for _ in 0..20 {
                eps *= &erd;
            }
            eps /= big(10i64.pow(15), 1);
            let m = m_of_eps(&eps, M_CAP_DEFAULT);
            let m_r = BigRational::from_integer(BigInt::from(m));
            let beta_pair = &eps / &m_r; // pair-embedding derivation
            let beta_alt = eta * &d / (big(100_000, 1) * &m_r);
            let beta = if beta_pair <= beta_alt { beta_pair } else { beta_alt };
            let gamma = &beta * &d / (big(2000, 1) * &m_r); // seed-embedding derivation
            if s.d != d || s.eps != eps || s.m_eps != m || s.beta != beta || s.gamma != gamma {
                wrong += 1;
                eprintln!("schedule mismatch at eta = {eta}, r = {r}");
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "10 constant schedule (20-point grid, symbolic re-derivation)",
        checked == 20 && wrong == 0,
        format!("{checked} grid points, {wrong} mismatches, {elapsed:.2?}"),
    );
}
