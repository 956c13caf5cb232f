//! Exact tree-containment decision by backtracking over tree vertices in a
//! connectivity-preserving, fail-first order with bitset candidate
//! intersection, plus the small-graph utilities the scan harnesses need
//! (a brute-force reference and a connected-graph generator used to build
//! fixture corpora).

use crate::bitset::VertexSet;
use crate::embed::{validate_embedding, Embedding};
use crate::graph::Graph;
use crate::tree::Tree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleOutcome {
    Embedded(Vec<usize>),
    NotContained,
    /// Node budget exhausted before a decision.
    Timeout,
}

impl OracleOutcome {
    pub fn is_embedded(&self) -> bool {
        matches!(self, OracleOutcome::Embedded(_))
    }
}

pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// Decides whether `t` embeds in `g`; complete (no false negatives) within
/// the node budget. A positive answer carries the embedding, validated.
pub fn exact_embed(t: &Tree, g: &Graph, node_budget: u64) -> OracleOutcome {
    if t.n() > g.n() {
        return OracleOutcome::NotContained;
    }
    if t.n() == 1 {
        return if g.n() >= 1 {
            OracleOutcome::Embedded(vec![0])
        } else {
            OracleOutcome::NotContained
        };
    }
    // Order: root at the centroid, children by decreasing subtree size, so
    // large constraints fail first.
    let root = *t.centroids().iter().min().unwrap();
    let t = t.rerooted(root).unwrap();
    let sizes = t.subtree_sizes();
    let mut order = Vec::with_capacity(t.n());
    let mut stack = vec![t.root()];
    while let Some(v) = stack.pop() {
        order.push(v);
        let mut kids: Vec<usize> = t.children(v).iter().map(|&c| c as usize).collect();
        kids.sort_by_key(|&c| sizes[c]); // pop largest first
        stack.extend(kids);
    }
    let pos_of_parent: Vec<usize> = order
        .iter()
        .map(|&v| {
            t.parent(v)
                .map(|p| order.iter().position(|&x| x == p).unwrap())
                .unwrap_or(usize::MAX)
        })
        .collect();

    // Candidate masks per tree degree: host vertices of at least that degree.
    let degree_ok: Vec<VertexSet> = order
        .iter()
        .map(|&v| {
            let need = t.degree(v);
            VertexSet::from_iter(g.n(), (0..g.n()).filter(|&h| g.degree(h) >= need))
        })
        .collect();

    let mut images = vec![usize::MAX; t.n()];
    let mut used = VertexSet::new(g.n());
    let mut budget = node_budget;
    let found = backtrack(
        &t,
        g,
        &order,
        &pos_of_parent,
        &degree_ok,
        0,
        &mut images,
        &mut used,
        &mut budget,
    );
    match found {
        Search::Found => {
            let mut emb = Embedding::new(t.n(), g.n());
            for (tv, &hv) in images.iter().enumerate() {
                emb.place(tv, hv).unwrap();
            }
            debug_assert!(validate_embedding(&t, g, &emb, true).is_ok());
            OracleOutcome::Embedded(images)
        }
        Search::Exhausted => OracleOutcome::NotContained,
        Search::Budget => OracleOutcome::Timeout,
    }
}

enum Search {
    Found,
    Exhausted,
    Budget,
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    t: &Tree,
    g: &Graph,
    order: &[usize],
    pos_of_parent: &[usize],
    degree_ok: &[VertexSet],
    pos: usize,
    images: &mut [usize],
    used: &mut VertexSet,
    budget: &mut u64,
) -> Search {
    if pos == order.len() {
        return Search::Found;
    }
    let tv = order[pos];
    let mut cands = degree_ok[pos].clone();
    cands.subtract(used);
    if pos > 0 {
        let parent_img = images[order[pos_of_parent[pos]]];
        cands.intersect(&g.neighbor_set(parent_img));
    }
    for hv in cands.iter() {
        if *budget == 0 {
            return Search::Budget;
        }
        *budget -= 1;
        images[tv] = hv;
        used.insert(hv);
        match backtrack(
            t,
            g,
            order,
            pos_of_parent,
            degree_ok,
            pos + 1,
            images,
            used,
            budget,
        ) {
            Search::Found => return Search::Found,
            Search::Budget => return Search::Budget,
            Search::Exhausted => {
                used.remove(hv);
                images[tv] = usize::MAX;
            }
        }
    }
    Search::Exhausted
}

/// Reference decision by unpruned injective search; only sensible for tiny
/// hosts. Used to certify the oracle's completeness.
pub fn brute_force_contains(t: &Tree, g: &Graph) -> bool {
    if t.n() > g.n() {
        return false;
    }
    fn rec(t: &Tree, g: &Graph, order: &[usize], pos: usize, images: &mut [usize], used: &mut Vec<bool>) -> bool {
        if pos == order.len() {
            return true;
        }
        let tv = order[pos];
        for hv in 0..g.n() {
            if used[hv] {
                continue;
            }
            // check every tree edge fully decided at this point
            let mut ok = true;
            for u in t.neighbors(tv) {
                if images[u] != usize::MAX && !g.has_edge(images[u], hv) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            images[tv] = hv;
            used[hv] = true;
            if rec(t, g, order, pos + 1, images, used) {
                return true;
            }
            images[tv] = usize::MAX;
            used[hv] = false;
        }
        false
    }
    let order: Vec<usize> = (0..t.n()).collect();
    rec(
        t,
        g,
        &order,
        0,
        &mut vec![usize::MAX; t.n()],
        &mut vec![false; g.n()],
    )
}

// ---------------------------------------------------------------------------
// Connected-graph corpus generation (fixture support)
// ---------------------------------------------------------------------------

/// Canonical form of a small graph: the lexicographically largest
/// upper-triangle bit string over relabellings that sort degrees
/// non-increasingly. The restricted orbit is closed under isomorphism, so
/// equal strings mean isomorphic graphs, and the string itself reconstructs
/// the graph, making the invariant complete.
fn canonical_bits(n: usize, adj: &[u64]) -> Vec<u64> {
    let degs: Vec<usize> = (0..n).map(|v| adj[v].count_ones() as usize).collect();
    let mut target: Vec<usize> = degs.clone();
    target.sort_unstable_by_key(|&d| std::cmp::Reverse(d));
    let mut best: Option<Vec<u64>> = None;
    let mut perm = vec![usize::MAX; n]; // perm[new] = old
    let mut taken = vec![false; n];
    fn assemble(n: usize, adj: &[u64], perm: &[usize]) -> Vec<u64> {
        let mut bits = vec![0u64; (n * n / 2 / 64 + 1).max(1)];
        let mut idx = 0;
        for j in 1..n {
            for i in 0..j {
                if adj[perm[i]] >> perm[j] & 1 == 1 {
                    bits[idx / 64] |= 1 << (idx % 64);
                }
                idx += 1;
            }
        }
        bits
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        n: usize,
        adj: &[u64],
        degs: &[usize],
        target: &[usize],
        pos: usize,
        perm: &mut Vec<usize>,
        taken: &mut Vec<bool>,
        best: &mut Option<Vec<u64>>,
    ) {
        if pos == n {
            let bits = assemble(n, adj, perm);
            if best.as_ref().map_or(true, |b| bits > *b) {
                *best = Some(bits);
            }
            return;
        }
        for old in 0..n {
            if taken[old] || degs[old] != target[pos] {
                continue;
            }
            perm[pos] = old;
            taken[old] = true;
            rec(n, adj, degs, target, pos + 1, perm, taken, best);
            taken[old] = false;
        }
    }
    rec(n, adj, &degs, &target, 0, &mut perm, &mut taken, &mut best);
    best.unwrap()
}

/// All connected graphs on `n` vertices up to isomorphism, by canonical
/// vertex augmentation. Exponential; meant for n <= 8 fixture generation.
pub fn connected_graphs_upto_iso(n: usize) -> Vec<Graph> {
    assert!(n >= 1 && n <= 8, "fixture generator is capped at n = 8");
    // level-by-level: attach a new vertex to every nonempty subset
    let mut current: Vec<Vec<u64>> = vec![vec![0u64]]; // adjacency by bitmask rows
    for level in 2..=n {
        let mut seen = std::collections::HashSet::new();
        let mut next = Vec::new();
        for g in &current {
            for subset in 1u64..(1 << (level - 1)) {
                let mut adj = g.clone();
                adj.push(subset);
                for v in 0..level - 1 {
                    if subset >> v & 1 == 1 {
                        adj[v] |= 1 << (level - 1);
                    }
                }
                let canon = canonical_bits(level, &adj);
                if seen.insert(canon) {
                    next.push(adj);
                }
            }
        }
        current = next;
    }
    current
        .into_iter()
        .map(|adj| {
            let mut edges = Vec::new();
            for v in 0..n {
                for u in v + 1..n {
                    if adj[v] >> u & 1 == 1 {
                        edges.push((v, u));
                    }
                }
            }
            Graph::from_edges(n, &edges).unwrap()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, path, random_gnp, Graph};
    use crate::tree::{broom_tree, path_tree, star};
    use crate::tree_enum::free_trees_vec;

    #[test]
    fn oracle_small_cases() {
        // P3 into K3.
        assert!(exact_embed(&path_tree(3), &complete(3), 1_000).is_embedded());
        // K_{1,3} into C5: max degree 2, impossible.
        let c5 = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        assert_eq!(
            exact_embed(&star(4), &c5, 1_000),
            OracleOutcome::NotContained
        );
        // Path into itself.
        assert!(exact_embed(&path_tree(5), &path(5), 1_000).is_embedded());
    }

    #[test]
    fn one_leaf_spider_fits_bipartite_host() {
        // Small-case exception: with one-leaf stars (k = 6) the spider does
        // embed in the bipartite-variant host, because centres and leaves
        // can alternate sides freely. The two-clique variant still rejects.
        let bip = crate::constructions::broom_pair(
            6,
            crate::constructions::HostKind::CompleteBipartite,
        )
        .unwrap();
        assert!(exact_embed(&bip.tree, &bip.host, 10_000_000).is_embedded());
        let cliq = crate::constructions::broom_pair(
            6,
            crate::constructions::HostKind::TwoCliques,
        )
        .unwrap();
        assert_eq!(
            exact_embed(&cliq.tree, &cliq.host, 10_000_000),
            OracleOutcome::NotContained
        );
    }

    #[test]
    fn broom_vs_two_clique_host() {
        // The spider on 13 vertices does not fit the cut-vertex + two K6
        // host.
        let rep = crate::constructions::broom_pair(12, crate::constructions::HostKind::TwoCliques)
            .unwrap();
        assert_eq!(
            exact_embed(&rep.tree, &rep.host, 10_000_000),
            OracleOutcome::NotContained
        );
        // A balanced tree (the path) does fit.
        assert!(exact_embed(&path_tree(13), &rep.host, 10_000_000).is_embedded());
    }

    #[test]
    fn completeness_against_brute_force() {
        // Full cross-product of free trees (order <= 6) against random
        // hosts on 6-7 vertices.
        let mut host_seed = 0u64;
        let mut hosts = Vec::new();
        while hosts.len() < 60 {
            let n = 6 + (host_seed % 2) as usize;
            let p = 0.2 + 0.6 * ((host_seed % 7) as f64) / 6.0;
            hosts.push(random_gnp(n, p, host_seed));
            host_seed += 1;
        }
        for n in 2..=6 {
            for t in free_trees_vec(n) {
                for g in &hosts {
                    let got = exact_embed(&t, g, 10_000_000);
                    let want = brute_force_contains(&t, g);
                    assert_eq!(got.is_embedded(), want, "tree {t:?} host {g:?}");
                    assert!(!matches!(got, OracleOutcome::Timeout));
                }
            }
        }
    }

    #[test]
    fn monotone_under_edge_addition() {
        // Adding edges never destroys containment.
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(33);
        for seed in 0..30u64 {
            let t = crate::tree_sample::sample_labelled_tree(6, seed);
            let g = random_gnp(8, 0.35, seed + 400);
            if !exact_embed(&t, &g, 1_000_000).is_embedded() {
                continue;
            }
            let mut edges: Vec<(usize, usize)> = (0..8)
                .flat_map(|u| g.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v)))
                .collect();
            for _ in 0..3 {
                let (u, v) = (rng.random_range(0..8), rng.random_range(0..8));
                if u != v && !edges.contains(&(u.min(v), u.max(v))) {
                    edges.push((u.min(v), u.max(v)));
                }
            }
            let g2 = Graph::from_edges(8, &edges).unwrap();
            assert!(exact_embed(&t, &g2, 1_000_000).is_embedded());
        }
    }

    #[test]
    fn timeout_is_distinct() {
        let t = broom_tree(3, 3);
        let g = complete(13);
        assert_eq!(exact_embed(&t, &g, 1), OracleOutcome::Timeout);
    }

    #[test]
    fn too_large_tree_immediately_rejected() {
        assert_eq!(
            exact_embed(&path_tree(9), &complete(5), 10),
            OracleOutcome::NotContained
        );
    }

    #[test]
    fn connected_graph_counts_small() {
        // Known values: 1, 1, 2, 6, 21, 112.
        let want = [1usize, 1, 2, 6, 21, 112];
        for (n, &w) in (1..=6).zip(want.iter()) {
            let got = connected_graphs_upto_iso(n).len();
            assert_eq!(got, w, "n = {n}");
        }
    }

    #[test]
    fn tree_counts_via_graph_generator() {
        // Trees among connected graphs on n vertices = free tree count.
        for n in 2..=6 {
            let trees = connected_graphs_upto_iso(n)
                .into_iter()
                .filter(|g| g.edge_count() == n - 1)
                .count();
            let want = free_trees_vec(n).len();
            assert_eq!(trees, want, "n = {n}");
        }
    }
}
