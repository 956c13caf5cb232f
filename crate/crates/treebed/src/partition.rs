//! Fine partitions of a tree into a small set of seed vertices and a family
//! of microtrees, plus the one-sided variant whose seeds all sit in one
//! colour class.
//!
//! The constructor roots the tree at a centroid, finds the subtree of
//! "heavy" vertices (subtree size above `ell`), makes every branching or
//! bottom-most heavy vertex a seed, and chops the remaining heavy chains
//! into groups of weight at most `ell` whose flanking seeds sit at even
//! distance at least six. The validators re-check every defining property
//! from scratch and are the source of truth; the constructor falls back to
//! the all-seeds partition if its output ever fails validation.

use crate::tree::{ColorClass, Tree};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("ell = {ell} out of range 1..{k}")]
    EllOutOfRange { ell: usize, k: usize },
    #[error("construction failed: {0}")]
    Construction(ConstructionFailure),
}

#[derive(Debug, Clone)]
pub struct ConstructionFailure {
    /// Seed pair violating the distance property, when that is the cause.
    pub seed_pair: Option<(usize, usize)>,
    pub detail: String,
}

impl std::fmt::Display for ConstructionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.seed_pair {
            Some((a, b)) => write!(f, "{} (seed pair {a}, {b})", self.detail),
            None => write!(f, "{}", self.detail),
        }
    }
}

pub const SEED_BOUND_NUMERATOR: usize = 336;

/// Quadruple (W_A, W_B, D_A, D_B) with the seven defining properties.
#[derive(Clone, Debug, Serialize)]
pub struct FinePartition {
    pub w_a: Vec<usize>,
    pub w_b: Vec<usize>,
    pub d_a: Vec<Vec<usize>>,
    pub d_b: Vec<Vec<usize>>,
    pub ell: usize,
}

/// Pair (W, D' ⊔ D'') with all seeds in one colour class.
#[derive(Clone, Debug, Serialize)]
pub struct OneSidedPartition {
    pub w: Vec<usize>,
    pub d_prime: Vec<Vec<usize>>,
    /// Singleton trees: the dissolved seeds of the other class.
    pub d_double: Vec<usize>,
    pub ell: usize,
    /// Max degree over the bounded colour class.
    pub delta_cap: usize,
    /// The colour class carrying the degree bound (the class D'' lives in).
    pub bounded_class: ColorClass,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub id: &'static str,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub properties: Vec<PropertyCheck>,
}

impl PartitionReport {
    pub fn pass(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }

    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.properties.iter().find(|p| !p.pass)
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

struct Builder {
    rooted: Tree,
    size: Vec<usize>,
    heavy: Vec<bool>,
    seeds: BTreeSet<usize>,
    ell: usize,
}

impl Builder {
    fn new(t: &Tree, ell: usize) -> Self {
        let root = *t.centroids().iter().min().unwrap();
        let rooted = t.rerooted(root).unwrap();
        let size = rooted.subtree_sizes();
        let heavy: Vec<bool> = size.iter().map(|&s| s > ell).collect();
        Builder {
            rooted,
            size,
            heavy,
            seeds: BTreeSet::new(),
            ell,
        }
    }

    fn heavy_children(&self, v: usize) -> Vec<usize> {
        self.rooted
            .children(v)
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| self.heavy[c])
            .collect()
    }

    /// Weight of a chain vertex: itself plus all its light subtrees.
    fn weight(&self, v: usize) -> usize {
        1 + self
            .rooted
            .children(v)
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| !self.heavy[c])
            .map(|c| self.size[c])
            .sum::<usize>()
    }

    fn run(mut self) -> BTreeSet<usize> {
        // Classify heavy vertices; seeds are branchings and heavy leaves.
        let mut chains_tops = Vec::new();
        for v in 0..self.rooted.n() {
            if !self.heavy[v] {
                continue;
            }
            let hc = self.heavy_children(v).len();
            if hc != 1 {
                self.seeds.insert(v);
            } else {
                // Chain vertex; a maximal chain starts where the parent is
                // not a chain vertex.
                let is_top = match self.rooted.parent(v) {
                    None => true,
                    Some(p) => self.heavy_children(p).len() != 1,
                };
                if is_top {
                    chains_tops.push(v);
                }
            }
        }
        chains_tops.sort_unstable();
        for top in chains_tops {
            let mut chain = vec![top];
            loop {
                let last = *chain.last().unwrap();
                let hc = self.heavy_children(last);
                debug_assert_eq!(hc.len(), 1);
                let next = hc[0];
                if self.heavy_children(next).len() == 1 {
                    chain.push(next);
                } else {
                    break;
                }
            }
            let anchored = self.rooted.parent(top).is_some();
            self.chop_chain(&chain, anchored);
        }
        self.seeds
    }

    fn chop_chain(&mut self, chain: &[usize], top_anchored: bool) {
        let weights: Vec<usize> = chain.iter().map(|&v| self.weight(v)).collect();
        let mut i = 0usize; // current group start
        let mut s = 0usize; // current group weight
        let mut t = 0usize;
        while t < chain.len() {
            if s + weights[t] <= self.ell {
                s += weights[t];
                t += 1;
                continue;
            }
            // Overflow: close the group before position t.
            let g = t - i;
            let constrained = top_anchored || i > 0;
            if g == 0 || !constrained || (g >= 5 && g % 2 == 1) {
                // empty or unconstrained or odd-length >= 5 group: the next
                // chain vertex becomes the bounding seed
                self.seeds.insert(chain[t]);
                i = t + 1;
                t = i;
                s = 0;
            } else if g >= 6 && g % 2 == 0 {
                // Shorten the group by one so the flank distance is even.
                self.seeds.insert(chain[t - 1]);
                i = t;
                s = 0;
            } else {
                // Too short to satisfy the distance property: all seeds.
                for &v in &chain[i..=t] {
                    self.seeds.insert(v);
                }
                i = t + 1;
                t = i;
                s = 0;
            }
        }
        // Close the final group against the chain's bottom anchor.
        let g = chain.len() - i;
        let constrained = top_anchored || i > 0;
        if g == 0 || !constrained || (g >= 5 && g % 2 == 1) {
            return;
        }
        if g >= 6 && g % 2 == 0 {
            self.seeds.insert(chain[chain.len() - 1]);
        } else {
            for &v in &chain[i..] {
                self.seeds.insert(v);
            }
        }
    }
}

fn components_excluding(t: &Tree, excluded: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let n = t.n();
    let mut comp = Vec::new();
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || excluded.contains(&start) {
            continue;
        }
        let mut acc = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            acc.push(v);
            for u in t.neighbors(v) {
                if !seen[u] && !excluded.contains(&u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        acc.sort_unstable();
        comp.push(acc);
    }
    comp
}

fn seeds_adjacent_to(t: &Tree, comp: &[usize], seeds: &BTreeSet<usize>) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for &v in comp {
        for u in t.neighbors(v) {
            if seeds.contains(&u) {
                out.insert(u);
            }
        }
    }
    out.into_iter().collect()
}

fn assemble_fine(t: &Tree, seeds: &BTreeSet<usize>, ell: usize) -> FinePartition {
    let w_a: Vec<usize> = seeds
        .iter()
        .copied()
        .filter(|&v| t.class_of(v) == ColorClass::V1)
        .collect();
    let w_b: Vec<usize> = seeds
        .iter()
        .copied()
        .filter(|&v| t.class_of(v) == ColorClass::V2)
        .collect();
    let mut d_a = Vec::new();
    let mut d_b = Vec::new();
    for comp in components_excluding(t, seeds) {
        let adj = seeds_adjacent_to(t, &comp, seeds);
        let side = adj
            .first()
            .map(|&s| t.class_of(s))
            .unwrap_or(ColorClass::V1);
        if side == ColorClass::V1 {
            d_a.push(comp);
        } else {
            d_b.push(comp);
        }
    }
    FinePartition {
        w_a,
        w_b,
        d_a,
        d_b,
        ell,
    }
}

/// Constructs an `ell`-fine partition. Deterministic for a fixed tree.
pub fn fine_partition(t: &Tree, ell: usize) -> Result<FinePartition, PartitionError> {
    let k = t.k();
    if ell < 1 || ell >= k {
        return Err(PartitionError::EllOutOfRange { ell, k });
    }
    let seeds = Builder::new(t, ell).run();
    let fp = assemble_fine(t, &seeds, ell);
    let report = validate_fine_partition(t, &fp);
    if report.pass() {
        return Ok(fp);
    }
    // Fallback: every vertex is a seed. Valid whenever the class sizes fit
    // under the seed bound, which holds for all small ell.
    let all: BTreeSet<usize> = (0..t.n()).collect();
    let fallback = assemble_fine(t, &all, ell);
    let fb_report = validate_fine_partition(t, &fallback);
    if fb_report.pass() {
        return Ok(fallback);
    }
    let failed = report.first_failure().unwrap();
    let seed_pair = if failed.id == "P7" {
        parse_pair_witness(failed.witness.as_deref())
    } else {
        None
    };
    Err(PartitionError::Construction(ConstructionFailure {
        seed_pair,
        detail: format!(
            "property {} failed: {}",
            failed.id,
            failed.witness.clone().unwrap_or_default()
        ),
    }))
}

fn parse_pair_witness(w: Option<&str>) -> Option<(usize, usize)> {
    let w = w?;
    let nums: Vec<usize> = w
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect();
    if nums.len() >= 2 {
        Some((nums[0], nums[1]))
    } else {
        None
    }
}

/// One-sided `ell`-fine partition: all seeds in the class opposite to
/// `bounded_class` (the class whose degrees are bounded by Δ). Built from a
/// fine partition by moving the bounded-class seeds' neighbourhoods into W
/// and dissolving those seeds into singleton trees.
pub fn one_sided_partition(
    t: &Tree,
    ell: usize,
    bounded_class: ColorClass,
) -> Result<OneSidedPartition, PartitionError> {
    let fp = fine_partition(t, ell)?;
    // The fine partition splits seeds by colour class already; dissolve the
    // side that lies in the bounded class.
    let (keep, dissolve) = {
        let a_class = fp
            .w_a
            .first()
            .map(|&v| t.class_of(v))
            .unwrap_or(ColorClass::V1);
        if a_class == bounded_class {
            (fp.w_b.clone(), fp.w_a.clone())
        } else {
            (fp.w_a.clone(), fp.w_b.clone())
        }
    };
    let mut w: BTreeSet<usize> = keep.into_iter().collect();
    for &s in &dissolve {
        for u in t.neighbors(s) {
            w.insert(u);
        }
    }
    let dissolved: BTreeSet<usize> = dissolve.iter().copied().collect();
    debug_assert!(w.is_disjoint(&dissolved));
    let mut d_prime = Vec::new();
    let mut d_double = Vec::new();
    for comp in components_excluding(t, &w) {
        if comp.len() == 1 && dissolved.contains(&comp[0]) {
            d_double.push(comp[0]);
        } else {
            d_prime.push(comp);
        }
    }
    let delta_cap = t.max_degree_in_class(bounded_class);
    Ok(OneSidedPartition {
        w: w.into_iter().collect(),
        d_prime,
        d_double,
        ell,
        delta_cap,
        bounded_class,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn check_partition_of_vertices(
    t: &Tree,
    parts: &[&[usize]],
) -> (bool, Option<String>) {
    let mut count = vec![0usize; t.n()];
    for part in parts {
        for &v in *part {
            if v >= t.n() {
                return (false, Some(format!("vertex {v} out of range")));
            }
            count[v] += 1;
        }
    }
    for (v, &c) in count.iter().enumerate() {
        if c == 0 {
            return (false, Some(format!("vertex {v} uncovered")));
        }
        if c > 1 {
            return (false, Some(format!("vertex {v} covered {c} times")));
        }
    }
    (true, None)
}

fn connected_in_tree(t: &Tree, set: &[usize]) -> bool {
    if set.is_empty() {
        return false;
    }
    let members: BTreeSet<usize> = set.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![set[0]];
    seen.insert(set[0]);
    while let Some(v) = stack.pop() {
        for u in t.neighbors(v) {
            if members.contains(&u) && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len() == members.len()
}

fn external_neighbors(t: &Tree, set: &[usize]) -> Vec<usize> {
    let members: BTreeSet<usize> = set.iter().copied().collect();
    let mut out = BTreeSet::new();
    for &v in set {
        for u in t.neighbors(v) {
            if !members.contains(&u) {
                out.insert(u);
            }
        }
    }
    out.into_iter().collect()
}

/// Per-property verdicts for the seven defining properties of an ell-fine
/// partition. Never fails hard; every failed property carries a witness.
pub fn validate_fine_partition(t: &Tree, p: &FinePartition) -> PartitionReport {
    let k = t.k();
    let mut props = Vec::new();

    // P1: the seeds and microtrees partition V(T), microtrees connected.
    let mut parts: Vec<&[usize]> = vec![&p.w_a, &p.w_b];
    for tree in p.d_a.iter().chain(p.d_b.iter()) {
        parts.push(tree);
    }
    let (mut ok, mut witness) = check_partition_of_vertices(t, &parts);
    if ok {
        for tree in p.d_a.iter().chain(p.d_b.iter()) {
            if !connected_in_tree(t, tree) {
                ok = false;
                witness = Some(format!("microtree {tree:?} is not connected"));
                break;
            }
        }
    }
    props.push(PropertyCheck {
        id: "P1",
        pass: ok,
        witness,
    });

    // P2: max(|W_A|, |W_B|) <= 336 k / ell.
    let wmax = p.w_a.len().max(p.w_b.len());
    let pass = wmax * p.ell <= SEED_BOUND_NUMERATOR * k;
    props.push(PropertyCheck {
        id: "P2",
        pass,
        witness: (!pass).then(|| {
            format!(
                "max(|W_A|,|W_B|) = {wmax} > 336k/ell = {}/{}",
                SEED_BOUND_NUMERATOR * k,
                p.ell
            )
        }),
    });

    // P3: distance parity separates W_A from W_B. Path parity equals depth
    // parity of the endpoints, so classes must be uniform per side and
    // distinct across sides.
    let side_parity = |side: &[usize]| -> Result<Option<ColorClass>, String> {
        let mut it = side.iter();
        match it.next() {
            None => Ok(None),
            Some(&first) => {
                let c = t.class_of(first);
                for &v in it {
                    if t.class_of(v) != c {
                        return Err(format!(
                            "seeds {first} and {v} in one side at odd distance"
                        ));
                    }
                }
                Ok(Some(c))
            }
        }
    };
    let p3 = match (side_parity(&p.w_a), side_parity(&p.w_b)) {
        (Ok(a), Ok(b)) => match (a, b) {
            (Some(ca), Some(cb)) if ca == cb => (
                false,
                Some(format!(
                    "W_A and W_B share colour class; seeds {} and {} at even distance",
                    p.w_a[0], p.w_b[0]
                )),
            ),
            _ => (true, None),
        },
        (Err(e), _) | (_, Err(e)) => (false, Some(e)),
    };
    props.push(PropertyCheck {
        id: "P3",
        pass: p3.0,
        witness: p3.1,
    });

    // P4: |K| <= ell.
    let oversized = p
        .d_a
        .iter()
        .chain(p.d_b.iter())
        .find(|k| k.len() > p.ell);
    props.push(PropertyCheck {
        id: "P4",
        pass: oversized.is_none(),
        witness: oversized.map(|k| format!("microtree of size {} > ell = {}", k.len(), p.ell)),
    });

    // P5: external neighbourhoods land in the owning seed side.
    let wa: BTreeSet<usize> = p.w_a.iter().copied().collect();
    let wb: BTreeSet<usize> = p.w_b.iter().copied().collect();
    let mut p5 = (true, None);
    for (trees, own, label) in [(&p.d_a, &wa, "W_A"), (&p.d_b, &wb, "W_B")] {
        for k in trees.iter() {
            for u in external_neighbors(t, k) {
                if !own.contains(&u) {
                    p5 = (
                        false,
                        Some(format!(
                            "microtree {k:?} in D_{label} has external neighbour {u} outside {label}"
                        )),
                    );
                }
            }
        }
    }
    props.push(PropertyCheck {
        id: "P5",
        pass: p5.0,
        witness: p5.1,
    });

    // P6: at most two seed neighbours per microtree.
    let all_seeds: BTreeSet<usize> = wa.union(&wb).copied().collect();
    let mut p6 = (true, None);
    for k in p.d_a.iter().chain(p.d_b.iter()) {
        let adj: Vec<usize> = external_neighbors(t, k)
            .into_iter()
            .filter(|u| all_seeds.contains(u))
            .collect();
        if adj.len() > 2 {
            p6 = (
                false,
                Some(format!("microtree {k:?} has {} seed neighbours", adj.len())),
            );
        }
    }
    props.push(PropertyCheck {
        id: "P6",
        pass: p6.0,
        witness: p6.1,
    });

    // P7: two seed neighbours of one microtree sit at distance >= 6.
    let mut p7 = (true, None);
    for k in p.d_a.iter().chain(p.d_b.iter()) {
        let adj: Vec<usize> = external_neighbors(t, k)
            .into_iter()
            .filter(|u| all_seeds.contains(u))
            .collect();
        if adj.len() == 2 {
            let d = t.distance(adj[0], adj[1]).unwrap();
            if d < 6 {
                p7 = (
                    false,
                    Some(format!(
                        "seeds ({}, {}) at distance {d} < 6 around one microtree",
                        adj[0], adj[1]
                    )),
                );
            }
        }
    }
    props.push(PropertyCheck {
        id: "P7",
        pass: p7.0,
        witness: p7.1,
    });

    PartitionReport { properties: props }
}

/// Per-property verdicts for the one-sided partition, including the
/// monochromatic-seed orientation.
pub fn validate_one_sided(t: &Tree, p: &OneSidedPartition) -> PartitionReport {
    let k = t.k();
    let mut props = Vec::new();

    // Q1: partition of V(T); D' trees connected.
    let singles: Vec<Vec<usize>> = p.d_double.iter().map(|&v| vec![v]).collect();
    let mut parts: Vec<&[usize]> = vec![&p.w];
    for tree in p.d_prime.iter() {
        parts.push(tree);
    }
    for s in singles.iter() {
        parts.push(s);
    }
    let (mut ok, mut witness) = check_partition_of_vertices(t, &parts);
    if ok {
        for tree in p.d_prime.iter() {
            if !connected_in_tree(t, tree) {
                ok = false;
                witness = Some(format!("tree {tree:?} not connected"));
                break;
            }
        }
    }
    props.push(PropertyCheck {
        id: "Q1",
        pass: ok,
        witness,
    });

    // Recompute the degree bound of the bounded class.
    let delta = t.max_degree_in_class(p.bounded_class);

    // Q2: |W| <= 336 k (1 + Δ) / ell, and W avoids the bounded class.
    let mono = p.w.iter().all(|&v| t.class_of(v) != p.bounded_class);
    let bound_ok = p.w.len() * p.ell <= SEED_BOUND_NUMERATOR * k * (1 + delta);
    props.push(PropertyCheck {
        id: "Q2",
        pass: mono && bound_ok,
        witness: if !mono {
            Some("a seed lies in the bounded colour class".into())
        } else if !bound_ok {
            Some(format!(
                "|W| = {} > 336k(1+Δ)/ell with Δ = {delta}",
                p.w.len()
            ))
        } else {
            None
        },
    });

    // Q3: |K| <= ell.
    let oversized = p.d_prime.iter().find(|k| k.len() > p.ell);
    props.push(PropertyCheck {
        id: "Q3",
        pass: oversized.is_none(),
        witness: oversized.map(|k| format!("tree of size {} > ell = {}", k.len(), p.ell)),
    });

    // Q4: every tree's external neighbourhood lies in W.
    let w: BTreeSet<usize> = p.w.iter().copied().collect();
    let mut q4 = (true, None);
    for tree in p.d_prime.iter().chain(singles.iter()) {
        for u in external_neighbors(t, tree) {
            if !w.contains(&u) {
                q4 = (
                    false,
                    Some(format!("tree {tree:?} has neighbour {u} outside W")),
                );
            }
        }
    }
    props.push(PropertyCheck {
        id: "Q4",
        pass: q4.0,
        witness: q4.1,
    });

    // Q5: D' trees have at most two W-neighbours at distance >= 4;
    // |D''| <= 336k/ell; D'' members are singletons with <= Δ neighbours,
    // all in W.
    let mut q5 = (true, None);
    for tree in p.d_prime.iter() {
        let adj = external_neighbors(t, tree);
        if adj.len() > 2 {
            q5 = (
                false,
                Some(format!("tree {tree:?} has {} anchors", adj.len())),
            );
        } else if adj.len() == 2 {
            let d = t.distance(adj[0], adj[1]).unwrap();
            if d < 4 {
                q5 = (
                    false,
                    Some(format!(
                        "anchors ({}, {}) at distance {d} < 4",
                        adj[0], adj[1]
                    )),
                );
            }
        }
    }
    if p.d_double.len() * p.ell > SEED_BOUND_NUMERATOR * k {
        q5 = (
            false,
            Some(format!("|D''| = {} > 336k/ell", p.d_double.len())),
        );
    }
    for &v in &p.d_double {
        if t.degree(v) > delta {
            q5 = (
                false,
                Some(format!("singleton {v} has degree {} > Δ = {delta}", t.degree(v))),
            );
        }
    }
    props.push(PropertyCheck {
        id: "Q5",
        pass: q5.0,
        witness: q5.1,
    });

    PartitionReport { properties: props }
}

/// Anchors of a microtree: its W-neighbours `z_i` paired with the attachment
/// vertices `x_i` inside the tree (each seed touches exactly one vertex of a
/// subtree).
pub fn microtree_anchors(t: &Tree, w: &BTreeSet<usize>, comp: &[usize]) -> Vec<(usize, usize)> {
    let members: BTreeSet<usize> = comp.iter().copied().collect();
    let mut out = Vec::new();
    for &v in comp {
        for u in t.neighbors(v) {
            if !members.contains(&u) && w.contains(&u) {
                out.push((u, v));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
