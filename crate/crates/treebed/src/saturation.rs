//! The three-phase saturation embedding engine: matching structure over the
//! seed cluster's neighbourhood, reserve sets for the finishing stage,
//! occupancy thresholds (full / saturated), guarded microtree placement, and
//! the full pipeline from a raw host graph to a validated total embedding.
//!
//! Every inequality the proof consumes is evaluated exactly and recorded as
//! an assertion record; in strict (theoretical) mode a failed record aborts
//! the run, in practical mode it is flagged and the run continues.

use crate::bitset::VertexSet;
use crate::embed::{
    embed_microtree, embed_seeds, greedy_embed, validate_embedding, EmbedError, Embedding,
    MicrotreeEmbedInput, SeedEmbedInput,
};
use crate::graph::{Graph, GraphBuilder};
use crate::partition::{
    microtree_anchors, one_sided_partition, validate_one_sided, PartitionError,
};
use crate::regularity::{
    preprocess_host, regular_partition_from, typical_vertices, ClusterGraph, ErasureAudit,
    RegularityError,
};
use crate::rng;
use crate::schedule::{rat_f64, rat_str, ConstantSchedule, Mode, ScheduleCheck, ScheduleSummary};
use crate::tree::{ColorClass, Tree};
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

// ---------------------------------------------------------------------------
// Occupancy thresholds
// ---------------------------------------------------------------------------

fn big(x: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()))
}

fn bigint(x: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// occ >= |u| - 4 sqrt(eps) |u|, exactly (square-free comparison).
pub fn cluster_full(occ: usize, size: usize, eps: &BigRational) -> bool {
    if occ >= size {
        return true;
    }
    let gap = bigint(size - occ);
    &gap * &gap <= bigint(16) * eps * bigint(size) * bigint(size)
}

/// occ >= deg(v1, u) - 4 sqrt(eps) |u|, exactly.
pub fn cluster_saturated(occ: usize, size: usize, deg_v1_u: &BigRational, eps: &BigRational) -> bool {
    let occ_r = bigint(occ);
    if occ_r >= *deg_v1_u {
        return true;
    }
    let gap = deg_v1_u - occ_r;
    &gap * &gap <= bigint(16) * eps * bigint(size) * bigint(size)
}

/// occ(u) + occ(v) >= deg(v1, u ∪ v) - 8 sqrt(eps)|u| - beta k, exactly.
pub fn edge_saturated(
    occ_sum: usize,
    size: usize,
    deg_sum: &BigRational,
    eps: &BigRational,
    beta_k: &BigRational,
) -> bool {
    let target = deg_sum - beta_k;
    let occ_r = bigint(occ_sum);
    if occ_r >= target {
        return true;
    }
    let gap = target - occ_r;
    &gap * &gap <= bigint(64) * eps * bigint(size) * bigint(size)
}

/// remaining <= eps^{1/4} k, exactly: remaining^4 <= eps k^4.
pub fn within_leftover_budget(remaining: usize, k: usize, eps: &BigRational) -> bool {
    let r = bigint(remaining);
    let kk = bigint(k);
    &r * &r * &r * &r <= eps * &kk * &kk * &kk * &kk
}

// ---------------------------------------------------------------------------
// Planted blow-up fixture
// ---------------------------------------------------------------------------

pub struct PlantedHost {
    pub graph: Graph,
    pub clusters: Vec<Vec<usize>>,
    /// Index of the planted high-degree cluster.
    pub v1: usize,
}

/// Blow-up of the pipeline's cluster structure: `m` equal clusters, base
/// inter-cluster density `d_base`, and every pair touching cluster 0 planted
/// at `d_plant` so that cluster 0 carries the high-degree hypothesis.
pub fn planted_blowup_host(n: usize, m: usize, d_base: f64, d_plant: f64, seed: u64) -> PlantedHost {
    let size = n / m;
    let mut rng = rng::seeded(seed);
    let mut b = GraphBuilder::new(size * m);
    for ci in 0..m {
        for cj in ci + 1..m {
            let p = if ci == 0 || cj == 0 { d_plant } else { d_base };
            for u in ci * size..(ci + 1) * size {
                for v in cj * size..(cj + 1) * size {
                    if rng::coin(&mut rng, p) {
                        b.add_edge(u, v).unwrap();
                    }
                }
            }
        }
    }
    PlantedHost {
        graph: b.build(),
        clusters: (0..m).map(|i| (i * size..(i + 1) * size).collect()).collect(),
        v1: 0,
    }
}

// ---------------------------------------------------------------------------
// Matching structure
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize)]
pub struct CleanupAudit {
    pub clusters_deleted: Vec<usize>,
    pub pair_edges_deleted: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchingStructure {
    pub v1: usize,
    /// Matching edges as (M1-endpoint, M2-endpoint).
    pub edges: Vec<(usize, usize)>,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub o1: Vec<usize>,
    pub o2: Vec<usize>,
    pub cleanup: CleanupAudit,
    /// Cluster-graph edges dropped by the cleanup, as (o1-cluster, matched).
    pub dropped_edges: Vec<(usize, usize)>,
}

/// Greedy maximal matching in N(v1) followed by the common-neighbour
/// cleanup and the M1/M2 split. In practical mode the cleanup always drops
/// pair edges instead of whole clusters, keeping capacity.
pub fn build_matching_structure(
    cg: &ClusterGraph,
    v1: usize,
    eta: &BigRational,
    practical: bool,
) -> Result<MatchingStructure, String> {
    let m = cg.m();
    let nbrs = cg.neighbors(v1);
    let mut matched: Vec<Option<usize>> = vec![None; m];
    let mut edges = Vec::new();
    for &u in &nbrs {
        if matched[u].is_some() {
            continue;
        }
        for &w in &nbrs {
            if w > u && matched[w].is_none() && cg.has_edge(u, w) {
                matched[u] = Some(w);
                matched[w] = Some(u);
                edges.push((u, w));
                break;
            }
        }
    }
    let in_matching: BTreeSet<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut o1: Vec<usize> = nbrs
        .iter()
        .copied()
        .filter(|u| !in_matching.contains(u))
        .collect();

    // Maximality: no edge inside O1.
    for (i, &a) in o1.iter().enumerate() {
        for &b in o1.iter().skip(i + 1) {
            if cg.has_edge(a, b) {
                return Err(format!("matching not maximal: O1 edge ({a},{b})"));
            }
        }
    }

    // Cleanup: an O1 cluster adjacent to both endpoints of eta m / 40 or
    // more matching edges is deleted (or its edges into those pairs are).
    let mut cleanup = CleanupAudit::default();
    let mut dropped_edges: Vec<(usize, usize)> = Vec::new();
    let mut removed_from_o1: BTreeSet<usize> = BTreeSet::new();
    let threshold = eta * bigint(m) / bigint(40);
    for &x in &o1 {
        let common: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| cg.has_edge(x, a) && cg.has_edge(x, b))
            .collect();
        if common.is_empty() {
            continue;
        }
        if bigint(common.len()) >= threshold && !practical {
            removed_from_o1.insert(x);
            cleanup.clusters_deleted.push(x);
        } else {
            for (a, b) in common {
                dropped_edges.push((x, a));
                dropped_edges.push((x, b));
                cleanup.pair_edges_deleted += 2;
            }
        }
    }
    o1.retain(|x| !removed_from_o1.contains(x));

    let edge_dropped = |a: usize, b: usize| {
        dropped_edges
            .iter()
            .any(|&(p, q)| (p == a && q == b) || (p == b && q == a))
    };

    // Split the matching: per edge at most one endpoint may still see O1.
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    let mut split_edges = Vec::new();
    for &(a, b) in &edges {
        let a_sees = o1
            .iter()
            .any(|&x| cg.has_edge(x, a) && !edge_dropped(x, a));
        let b_sees = o1
            .iter()
            .any(|&x| cg.has_edge(x, b) && !edge_dropped(x, b));
        let (c1, c2) = match (a_sees, b_sees) {
            (true, true) => {
                return Err(format!(
                    "edge ({a},{b}) has O1 neighbours on both sides after cleanup"
                ))
            }
            (false, true) => (a, b),
            _ => {
                // only a sees O1, or neither: put the seeing side in M2
                if a_sees {
                    (b, a)
                } else {
                    (a, b)
                }
            }
        };
        m1.push(c1);
        m2.push(c2);
        split_edges.push((c1, c2));
    }

    // O2 = N(O1) minus v1 and the matching (via surviving edges).
    let mut o2: BTreeSet<usize> = BTreeSet::new();
    for &x in &o1 {
        for y in cg.neighbors(x) {
            if y != v1 && !in_matching.contains(&y) && !o1.contains(&y) && !edge_dropped(x, y) {
                o2.insert(y);
            }
        }
    }
    // N(v1) ∩ O2 = ∅ holds because N(v1) = M ∪ O1.
    for &y in &o2 {
        if cg.has_edge(v1, y) {
            return Err(format!("cluster {y} in O2 neighbours v1"));
        }
    }

    Ok(MatchingStructure {
        v1,
        edges: split_edges,
        m1,
        m2,
        o1,
        o2: o2.into_iter().collect(),
        cleanup,
        dropped_edges,
    })
}

// ---------------------------------------------------------------------------
// Reserve sets (finishing stage)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ReservePlan {
    /// Reserved vertices per cluster index.
    pub members: Vec<Vec<usize>>,
    /// (F_u cluster, G_u cluster) pairs usable by the finishing stage.
    pub pairs: Vec<(usize, usize)>,
    pub f_total: usize,
    pub budget: String,
    pub budget_pass: bool,
    pub notes: Vec<String>,
}

/// Reserve construction: F_u inside every M1/O1 cluster, a
/// same-size G_u in a neighbour (the matching partner, or an M2/O2
/// neighbour with enough unreserved room), plus the matching re-balancing
/// top-up. Vertices are taken lowest-id-first, skipping `avoid`.
pub fn reserve_sets(
    cg: &ClusterGraph,
    ms: &MatchingStructure,
    active: &[bool],
    f_size: &dyn Fn(usize) -> usize,
    avoid: &VertexSet,
    deg_v1: &BigRational,
    schedule: &ConstantSchedule,
) -> Result<ReservePlan, String> {
    let m = cg.m();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut pairs = Vec::new();
    let mut notes = Vec::new();

    let take = |members: &mut Vec<Vec<usize>>, cluster: usize, want: usize| -> Result<(), String> {
        let have = &mut members[cluster];
        let mut added = 0;
        for &v in &cg.clusters[cluster] {
            if added == want {
                break;
            }
            if avoid.contains(v) || have.contains(&v) {
                continue;
            }
            have.push(v);
            added += 1;
        }
        if added < want {
            return Err(format!(
                "cluster {cluster} lacks {want} unreserved vertices"
            ));
        }
        Ok(())
    };

    for &(u, w) in &ms.edges {
        if !active[u] || !active[w] {
            continue;
        }
        let f = f_size(u);
        if f == 0 {
            continue;
        }
        take(&mut members, u, f)?;
        take(&mut members, w, f)?;
        pairs.push((u, w));
    }
    for &u in &ms.o1 {
        if !active[u] {
            continue;
        }
        let f = f_size(u);
        if f == 0 {
            continue;
        }
        take(&mut members, u, f)?;
        // Neighbour in M2 ∪ O2 with room, lowest id first.
        let mut host = None;
        for w in cg.neighbors(u) {
            if !active[w] || w == ms.v1 {
                continue;
            }
            let in_m2 = ms.m2.contains(&w);
            let in_o2 = ms.o2.contains(&w);
            if !(in_m2 || in_o2) {
                continue;
            }
            if ms
                .dropped_edges
                .iter()
                .any(|&(p, q)| (p == u && q == w) || (p == w && q == u))
            {
                continue;
            }
            let free = cg.clusters[w]
                .iter()
                .filter(|&&v| !avoid.contains(v) && !members[w].contains(&v))
                .count();
            if free >= f {
                host = Some(w);
                break;
            }
        }
        let Some(w) = host else {
            // No usable partner (its pairs were dropped in the cleanup):
            // release this reserve set and move on.
            notes.push(format!("no reserve partner for O1 cluster {u}; F_u released"));
            members[u].clear();
            continue;
        };
        take(&mut members, w, f)?;
        pairs.push((u, w));
        // Re-balance the matching edge containing w.
        if let Some(&(a, b)) = ms.edges.iter().find(|&&(a, b)| a == w || b == w) {
            let partner = if a == w { b } else { a };
            if active[partner] {
                take(&mut members, partner, f_size(partner))?;
            }
        }
    }

    let f_total: usize = members.iter().map(Vec::len).sum();
    // |F| <= eta r deg(v1) / 100
    let budget = &schedule.eta * &schedule.r * deg_v1 / bigint(100);
    let budget_pass = bigint(f_total) <= budget;
    Ok(ReservePlan {
        members,
        pairs,
        f_total,
        budget: rat_str(&budget),
        budget_pass,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("tree precondition failed: {0}")]
    TreePrecondition(String),
    #[error("host hypothesis failed: {0}")]
    Host(#[from] RegularityError),
    #[error("tree partition failed: {0}")]
    Partition(#[from] PartitionError),
    #[error("seed embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("structural invariant violated: {0}")]
    Structural(String),
}

impl PipelineError {
    /// Exit-code class: 2 for hypothesis/precondition trouble, 1 for
    /// internal proof-inequality violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::TreePrecondition(_)
            | PipelineError::Host(_)
            | PipelineError::Partition(_) => 2,
            PipelineError::Embed(_) | PipelineError::Structural(_) => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub seed: u64,
    /// Initial cluster count handed to the decomposition (aligning the
    /// granularity with a known host structure is legitimate configuration).
    pub initial_clusters: Option<usize>,
    pub decomposition_m_cap: usize,
    pub decomposition_rounds: usize,
    /// Hard cap on total placement/unplacement events.
    pub max_events: usize,
    pub collect_decomposition: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            seed: 0,
            initial_clusters: None,
            decomposition_m_cap: 64,
            decomposition_rounds: 2,
            max_events: 1_000_000,
            collect_decomposition: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssertionRecord {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct PhaseLog {
    pub phase: String,
    pub placements: usize,
    pub unplacements: usize,
    pub vertices_placed: usize,
    pub skipped_stuck: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub schedule: ScheduleSummary,
    pub greedy_shortcut: bool,
    pub decomposition: Option<DecompSummary>,
    pub erasure: Option<ErasureAudit>,
    pub host_checks: Vec<ScheduleCheck>,
    pub structure: Option<MatchingStructure>,
    pub partition: Option<PartitionSummary>,
    pub seed_embedding: Option<SeedSummary>,
    pub nice_audit: Option<NiceAudit>,
    pub reserve: Option<ReservePlan>,
    pub phases: Vec<PhaseLog>,
    pub assertions: Vec<AssertionRecord>,
    pub finish: Option<FinishLog>,
    pub result: RunResult,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompSummary {
    pub m: usize,
    pub cluster_size: usize,
    pub garbage: usize,
    pub irregular: usize,
    pub unknown: usize,
    pub converged: bool,
    pub pair_table: Option<Vec<(usize, usize, String, bool)>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionSummary {
    pub w: usize,
    pub d_prime: usize,
    pub d_double: usize,
    pub ell: usize,
    pub validator_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedSummary {
    pub placed: usize,
    pub u_size: usize,
    pub v2_cluster: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NiceAudit {
    pub threshold_vertices: usize,
    pub not_nice_volumes: Vec<(usize, usize)>,
    pub deleted_clusters: Vec<usize>,
    pub pruning_skipped: bool,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct FinishLog {
    pub leftover_trees: usize,
    pub leftover_vertices: usize,
    pub placed_trees: usize,
    pub pair_usage: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub embedded: bool,
    pub validated: bool,
    pub domain: usize,
    pub error: Option<String>,
}

pub struct PipelineOutcome {
    pub embedding: Option<Embedding>,
    pub report: RunReport,
    pub error: Option<PipelineError>,
}

struct Microtree {
    verts: Vec<usize>,
    /// (seed z, attachment x) pairs; one or two entries.
    anchors: Vec<(usize, usize)>,
    side_u: usize,
    side_v: usize,
}

struct Engine<'a> {
    work: Graph,
    t: &'a Tree,
    sched: &'a ConstantSchedule,
    k: usize,
    cg: ClusterGraph,
    cluster_of: Vec<Option<usize>>,
    v1: usize,
    structure: MatchingStructure,
    active: Vec<bool>,
    micro: Vec<Microtree>,
    embedded_at: Vec<Option<(usize, usize)>>,
    placed_of: Vec<Vec<usize>>,
    emb: Embedding,
    f_set: VertexSet,
    f_count: Vec<usize>,
    phi_count: Vec<usize>,
    deg_v1_to: Vec<BigRational>,
    beta_k: BigRational,
    events: usize,
    max_events: usize,
    assertions: Vec<AssertionRecord>,
    strict: bool,
}

impl<'a> Engine<'a> {
    fn record(&mut self, name: &str, pass: bool, detail: String) -> Result<(), PipelineError> {
        self.assertions.push(AssertionRecord {
            name: name.to_string(),
            pass,
            detail: detail.clone(),
        });
        if !pass && self.strict {
            return Err(PipelineError::Structural(format!("{name}: {detail}")));
        }
        Ok(())
    }

    fn occ(&self, c: usize) -> usize {
        self.phi_count[c] + self.f_count[c]
    }

    fn size(&self) -> usize {
        self.cg.cluster_size
    }

    fn is_full(&self, c: usize) -> bool {
        cluster_full(self.occ(c), self.size(), &self.sched.eps)
    }

    fn is_saturated(&self, c: usize) -> bool {
        cluster_saturated(self.occ(c), self.size(), &self.deg_v1_to[c], &self.sched.eps)
    }

    fn is_edge_saturated(&self, u: usize, v: usize) -> bool {
        let deg_sum = &self.deg_v1_to[u] + &self.deg_v1_to[v];
        edge_saturated(
            self.occ(u) + self.occ(v),
            self.size(),
            &deg_sum,
            &self.sched.eps,
            &self.beta_k,
        )
    }

    fn stop_reached(&self) -> bool {
        let remaining = self.k - self.emb.domain_size();
        within_leftover_budget(remaining, self.k, &self.sched.eps)
    }

    /// V2-class members of a microtree (the side placed into `u`).
    fn class_split(&self, mt: &Microtree) -> (usize, usize) {
        (mt.side_u, mt.side_v)
    }

    fn nice(&self, mt: &Microtree, u: usize) -> bool {
        let Some(density) = self.cg.density(self.v1, u) else {
            return false;
        };
        let margin = &self.sched.eps_typical;
        let thr = (big(density) - margin) * bigint(self.size());
        mt.anchors.iter().all(|&(z, _)| {
            let img = self.emb.host_of(z).expect("seeds embedded");
            let mask = VertexSet::from_iter(self.work.n(), self.cg.clusters[u].iter().copied());
            bigint(self.work.deg_into(img, &mask)) >= thr
        })
    }

    fn place_tree(&mut self, idx: usize, u: usize, v: usize) -> Result<(), EmbedError> {
        let mt = &self.micro[idx];
        let (z1, x1) = mt.anchors[0];
        let (z2, x2) = *mt.anchors.last().unwrap();
        let mut forbidden = self.f_set.clone();
        forbidden.union_with(self.emb.used_set());
        let density = self
            .cg
            .density(u, v)
            .unwrap_or_else(|| Rational64::new(1, 10));
        let input = MicrotreeEmbedInput {
            tree: self.t,
            comp: &mt.verts,
            host: &self.work,
            u_cluster: &self.cg.clusters[u],
            v_cluster: &self.cg.clusters[v],
            anchor1: self.emb.host_of(z1).unwrap(),
            anchor2: self.emb.host_of(z2).unwrap(),
            attach1: x1,
            attach2: x2,
            forbidden: &forbidden,
            density,
            eps: to_r64(&self.sched.eps),
            typicality_margin: to_r64(&self.sched.eps_typical),
        };
        let placed = embed_microtree(&input, &mut self.emb)?;
        for &tv in &placed {
            let hv = self.emb.host_of(tv).unwrap();
            if let Some(c) = self.cluster_of[hv] {
                self.phi_count[c] += 1;
            }
        }
        self.events += placed.len();
        self.placed_of[idx] = placed;
        self.embedded_at[idx] = Some((u, v));
        Ok(())
    }

    fn unplace_tree(&mut self, idx: usize) {
        for tv in std::mem::take(&mut self.placed_of[idx]) {
            if let Some(hv) = self.emb.host_of(tv) {
                if let Some(c) = self.cluster_of[hv] {
                    self.phi_count[c] -= 1;
                }
            }
            self.emb.unplace(tv);
            self.events += 1;
        }
        self.embedded_at[idx] = None;
    }

    /// One guarded placement step on the (u receives V2, v receives V1)
    /// pair: picks the lowest eligible unembedded microtree u is nice to and
    /// that fits the free capacity. Returns which tree was placed.
    fn place_guarded(
        &mut self,
        u: usize,
        v: usize,
        log: &mut PhaseLog,
    ) -> Result<Option<usize>, PipelineError> {
        if self.events > self.max_events {
            return Err(PipelineError::Structural(
                "placement event budget exhausted".into(),
            ));
        }
        let free_u = self.size().saturating_sub(self.occ(u));
        let free_u = free_u.saturating_sub(free_u / 12);
        let free_v = self.size().saturating_sub(self.occ(v));
        let free_v = free_v.saturating_sub(free_v / 12);
        // Largest first: big microtrees only fit while occupancy is low, so
        // placing them early avoids stranding them past saturation.
        let mut candidates: Vec<usize> = (0..self.micro.len())
            .filter(|&i| self.embedded_at[i].is_none() && self.placed_of[i].is_empty())
            .collect();
        candidates.sort_by_key(|&i| (std::cmp::Reverse(self.micro[i].verts.len()), i));
        let mut remaining_volume = 0usize;
        let mut tried_any = false;
        for idx in candidates {
            let (su, sv) = self.class_split(&self.micro[idx]);
            remaining_volume += su + sv;
            if su + 1 > free_u || sv + 1 > free_v {
                continue;
            }
            if !self.nice(&self.micro[idx], u) {
                continue;
            }
            tried_any = true;
            match self.place_tree(idx, u, v) {
                Ok(()) => {
                    log.placements += 1;
                    log.vertices_placed += self.micro[idx].verts.len();
                    return Ok(Some(idx));
                }
                Err(EmbedError::Stuck(_)) => {
                    log.skipped_stuck += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            }
        }
        // No eligible tree: the guarantee says this only happens once the
        // leftover volume fits the finishing budget.
        let within = within_leftover_budget(remaining_volume, self.k, &self.sched.eps);
        if !within && !tried_any {
            self.record(
                "eligible-tree guarantee (guarded placement)",
                false,
                format!(
                    "no tree eligible for cluster {u} with {remaining_volume} vertices unembedded"
                ),
            )?;
        }
        Ok(None)
    }
}

fn to_r64(x: &BigRational) -> Rational64 {
    match (x.numer().to_i64(), x.denom().to_i64()) {
        (Some(n), Some(d)) if d != 0 => Rational64::new(n, d),
        _ => {
            let f = rat_f64(x);
            Rational64::approximate_float(f.max(1e-12)).unwrap_or_else(|| Rational64::new(1, 1_000_000_000))
        }
    }
}

/// Runs the full pipeline. Always returns a report; the embedding is present
/// only when the run succeeded end to end.
pub fn run_three_phases(
    g: &Graph,
    t: &Tree,
    schedule: &ConstantSchedule,
    opts: &PipelineOptions,
) -> PipelineOutcome {
    let start = std::time::Instant::now();
    let mut report = RunReport {
        k: t.n(),
        n: g.n(),
        seed: opts.seed,
        schedule: schedule.summary(),
        greedy_shortcut: false,
        decomposition: None,
        erasure: None,
        host_checks: Vec::new(),
        structure: None,
        partition: None,
        seed_embedding: None,
        nice_audit: None,
        reserve: None,
        phases: Vec::new(),
        assertions: Vec::new(),
        finish: None,
        result: RunResult {
            embedded: false,
            validated: false,
            domain: 0,
            error: None,
        },
        wall_ms: 0,
    };
    let outcome = run_inner(g, t, schedule, opts, &mut report);
    report.wall_ms = start.elapsed().as_millis();
    match outcome {
        Ok(emb) => {
            report.result.embedded = true;
            report.result.domain = emb.domain_size();
            report.result.validated = validate_embedding(t, g, &emb, true).is_ok();
            PipelineOutcome {
                embedding: Some(emb),
                report,
                error: None,
            }
        }
        Err(e) => {
            report.result.error = Some(e.to_string());
            PipelineOutcome {
                embedding: None,
                report,
                error: Some(e),
            }
        }
    }
}

fn run_inner(
    g: &Graph,
    t: &Tree,
    schedule: &ConstantSchedule,
    opts: &PipelineOptions,
    report: &mut RunReport,
) -> Result<Embedding, PipelineError> {
    let n = g.n();
    let k = t.n();
    let strict = schedule.strict;

    // Host hypotheses (audited; gate only in strict mode).
    let min_deg = (0..n).map(|v| g.degree(v)).min().unwrap_or(0);
    let need_min = &schedule.r * bigint(k) + &schedule.eta * bigint(n);
    let high_count = (0..n)
        .filter(|&v| bigint(g.degree(v)) >= bigint(k) + &schedule.eta * bigint(n))
        .count();
    let mut hypo_fail: Option<String> = None;
    for (name, pass, detail) in [
        (
            "delta(G) >= rk + eta n",
            bigint(min_deg) >= need_min.clone(),
            format!("min degree {min_deg} vs {}", rat_str(&need_min)),
        ),
        (
            "at least eta n vertices of degree >= k + eta n",
            bigint(high_count) >= &schedule.eta * bigint(n),
            format!("{high_count} high-degree vertices"),
        ),
    ] {
        report.host_checks.push(ScheduleCheck {
            name: name.into(),
            lhs: detail.clone(),
            rhs: String::new(),
            pass,
        });
        if !pass && strict {
            hypo_fail = Some(format!("{name}: {detail}"));
        }
    }
    if let Some(msg) = hypo_fail {
        return Err(PipelineError::TreePrecondition(msg));
    }

    // Greedy shortcut for small trees: delta >= eta n >= 2k - 1 suffices.
    // The proof splits on k vs eta n / 2 before any tree-side condition.
    if bigint(2 * k) <= &schedule.eta * bigint(n) && min_deg + 1 >= k {
        report.greedy_shortcut = true;
        return Ok(greedy_embed(t, g)?);
    }

    // Tree-side preconditions.
    let (c1, c2) = t.class_sizes();
    let (small_class, small_size) = if c1 <= c2 {
        (ColorClass::V1, c1)
    } else {
        (ColorClass::V2, c2)
    };
    let bounded_class = small_class.other();
    if bigint(small_size) > &schedule.r * bigint(k) {
        return Err(PipelineError::TreePrecondition(format!(
            "smaller colour class has {small_size} > rk vertices"
        )));
    }
    let delta_v2 = t.max_degree_in_class(bounded_class);
    if bigint(delta_v2) > &schedule.gamma * bigint(k) {
        return Err(PipelineError::TreePrecondition(format!(
            "max degree over the large class is {delta_v2} > gamma k"
        )));
    }

    // Decomposition and preprocessing.
    let eps_ver = to_r64(&schedule.eps_verdict);
    let m0 = opts
        .initial_clusters
        .unwrap_or_else(|| eps_ver.recip().ceil().to_integer() as usize);
    let decomp = regular_partition_from(
        g,
        eps_ver,
        m0,
        opts.decomposition_m_cap,
        opts.decomposition_rounds,
        opts.seed,
    );
    report.decomposition = Some(DecompSummary {
        m: decomp.m(),
        cluster_size: decomp.cluster_size(),
        garbage: decomp.garbage.len(),
        irregular: decomp.irregular_count,
        unknown: decomp.unknown_count,
        converged: decomp.converged,
        pair_table: opts.collect_decomposition.then(|| {
            decomp
                .pairs
                .iter()
                .map(|p| (p.i, p.j, p.density.to_string(), p.verdict.is_regular()))
                .collect()
        }),
    });
    let prep = preprocess_host(g, &decomp, schedule, k)?;
    report.erasure = Some(prep.erasure.clone());
    report.host_checks.extend(prep.checks.clone());
    if strict {
        if let Some(c) = prep.checks.iter().find(|c| !c.pass) {
            return Err(PipelineError::Structural(format!(
                "preprocessing bound failed: {}",
                c.name
            )));
        }
    }

    // Tree partition at ell = beta k.
    let ell = ConstantSchedule::floor_mul(&schedule.beta, k).clamp(1, k - 1);
    let partition = one_sided_partition(t, ell, bounded_class)?;
    let pr = validate_one_sided(t, &partition);
    report.partition = Some(PartitionSummary {
        w: partition.w.len(),
        d_prime: partition.d_prime.len(),
        d_double: partition.d_double.len(),
        ell,
        validator_pass: pr.pass(),
    });
    if !pr.pass() {
        return Err(PipelineError::Structural(format!(
            "one-sided partition validator failed: {:?}",
            pr.first_failure()
        )));
    }

    // Matching structure.
    let practical = schedule.mode == Mode::Practical;
    let structure = build_matching_structure(&prep.cg, prep.v1, &schedule.eta, practical)
        .map_err(PipelineError::Structural)?;
    report.structure = Some(structure.clone());
    let cg = prep.cg.clone();
    let m = cg.m();
    let size = cg.cluster_size;
    let mut active = vec![true; m];
    for &c in &structure.cleanup.clusters_deleted {
        active[c] = false;
    }

    // Engine scaffolding.
    let mut cluster_of = vec![None; n];
    for (ci, c) in cg.clusters.iter().enumerate() {
        for &v in c {
            cluster_of[v] = Some(ci);
        }
    }
    let work = prep.work;
    let v1 = prep.v1;
    let deg_v1_to: Vec<BigRational> = (0..m)
        .map(|u| {
            if u == v1 || !cg.has_edge(v1, u) {
                BigRational::zero()
            } else {
                let e = work.edges_between(&cg.clusters[v1], &cg.clusters[u]);
                BigRational::new(BigInt::from(e), BigInt::from(cg.clusters[v1].len()))
            }
        })
        .collect();

    // Fixed reserve subsets are chosen before seed embedding so the seed
    // images can be picked typical to them.
    let f_fraction = if practical {
        // max(paper formula, practical reserve fraction)
        let paper = &schedule.eta * &schedule.r * &schedule.d / bigint(300);
        if schedule.reserve_fraction > paper {
            schedule.reserve_fraction.clone()
        } else {
            paper
        }
    } else {
        &schedule.eta * &schedule.r * &schedule.d / bigint(300)
    };
    let f_size_of = |_c: usize| ConstantSchedule::floor_mul(&f_fraction, size);

    // v2 cluster: lowest O1 member, else the lowest neighbour of v1.
    let v2_cluster = structure
        .o1
        .iter()
        .copied()
        .filter(|&u| active[u])
        .min()
        .or_else(|| cg.neighbors(v1).into_iter().find(|&u| active[u]))
        .ok_or_else(|| PipelineError::Structural("v1 has no usable neighbour".into()))?;

    // U: v1-vertices non-typical to too many clusters or reserve subsets.
    let mt_threshold = {
        // sqrt(eps_typical) * m, compared exactly via squares
        let mut c = 0usize;
        while bigint((c + 1) * (c + 1)) <= &schedule.eps_typical * bigint(m * m) {
            c += 1;
        }
        c
    };
    let eps_typ = to_r64(&schedule.eps_typical);
    let mut non_typical_count = vec![0usize; n];
    for u in 0..m {
        if u == v1 || !active[u] || !cg.has_edge(v1, u) {
            continue;
        }
        let density = cg.density(v1, u).unwrap();
        let typical = typical_vertices(&work, &cg.clusters[v1], &cg.clusters[u], density, eps_typ);
        let typical: BTreeSet<usize> = typical.into_iter().collect();
        for &x in &cg.clusters[v1] {
            if !typical.contains(&x) {
                non_typical_count[x] += 1;
            }
        }
        // Reserve-subset typicality: over the fixed F-prefix of u.
        if structure.m1.contains(&u) || structure.o1.contains(&u) {
            let f_prefix: Vec<usize> = cg.clusters[u].iter().copied().take(f_size_of(u)).collect();
            if !f_prefix.is_empty() {
                let typical_f: BTreeSet<usize> =
                    typical_vertices(&work, &cg.clusters[v1], &f_prefix, density, eps_typ)
                        .into_iter()
                        .collect();
                for &x in &cg.clusters[v1] {
                    if !typical_f.contains(&x) {
                        non_typical_count[x] += 1;
                    }
                }
            }
        }
    }
    let mut u_set = VertexSet::new(n);
    for &x in &cg.clusters[v1] {
        if non_typical_count[x] > mt_threshold {
            u_set.insert(x);
        }
    }

    // Seed embedding into (v1, v2).
    let density_v1v2 = cg
        .density(v1, v2_cluster)
        .ok_or_else(|| PipelineError::Structural("v2 cluster not adjacent to v1".into()))?;
    let seed_input = SeedEmbedInput {
        tree: t,
        partition: &partition,
        host: &work,
        v1: &cg.clusters[v1],
        v2: &cg.clusters[v2_cluster],
        forbidden: &u_set,
        density: density_v1v2,
        eps: eps_typ,
    };
    let emb = embed_seeds(&seed_input)?;
    report.seed_embedding = Some(SeedSummary {
        placed: emb.domain_size(),
        u_size: u_set.count(),
        v2_cluster,
    });

    // Microtrees with anchors.
    let w_set: BTreeSet<usize> = partition.w.iter().copied().collect();
    let micro: Vec<Microtree> = partition
        .d_prime
        .iter()
        .map(|comp| {
            let anchors = microtree_anchors(t, &w_set, comp);
            let side_u = comp
                .iter()
                .filter(|&&v| t.class_of(v) == bounded_class)
                .count();
            Microtree {
                side_u,
                side_v: comp.len() - side_u,
                verts: comp.clone(),
                anchors,
            }
        })
        .collect();
    if micro.iter().any(|mt| mt.anchors.is_empty()) {
        return Err(PipelineError::Structural(
            "microtree without seed anchor".into(),
        ));
    }

    // The cluster hosting the singletons stays active throughout: its
    // occupancy is tracked like any other usage.

    let mut engine = Engine {
        work,
        t,
        sched: schedule,
        k,
        cg,
        cluster_of,
        v1,
        structure,
        active,
        micro,
        embedded_at: Vec::new(),
        placed_of: Vec::new(),
        emb,
        f_set: VertexSet::new(n),
        f_count: vec![0; m],
        phi_count: vec![0; m],
        deg_v1_to,
        beta_k: &schedule.beta * bigint(k),
        events: 0,
        max_events: opts.max_events,
        assertions: Vec::new(),
        strict,
    };
    engine.embedded_at = vec![None; engine.micro.len()];
    engine.placed_of = vec![Vec::new(); engine.micro.len()];
    // phi counts of the seed embedding (W in v1; D'' in v2).
    for tv in 0..t.n() {
        if let Some(hv) = engine.emb.host_of(tv) {
            if let Some(c) = engine.cluster_of[hv] {
                engine.phi_count[c] += 1;
            }
        }
    }

    // Nice-volume audit and pruning.
    let mut volumes = Vec::new();
    let mut to_delete = Vec::new();
    for u in 0..m {
        if u == engine.v1 || !engine.active[u] || !engine.cg.has_edge(engine.v1, u) {
            continue;
        }
        let vol: usize = (0..engine.micro.len())
            .filter(|&i| !engine.nice(&engine.micro[i], u))
            .map(|i| engine.micro[i].verts.len())
            .sum();
        volumes.push((u, vol));
        if !within_leftover_budget(vol, k, &schedule.eps) {
            to_delete.push(u);
        }
    }
    let threshold_vertices = {
        let mut v = 0usize;
        while within_leftover_budget(v + 1, k, &schedule.eps) {
            v += 1;
        }
        v
    };
    // Deleting not-nice clusters must not starve the run of capacity.
    let capacity_if_deleted: usize = (0..m)
        .filter(|&u| engine.active[u] && u != engine.v1 && !to_delete.contains(&u))
        .count()
        * size;
    let prune = schedule.strict || capacity_if_deleted >= k;
    let mut deleted = Vec::new();
    if prune {
        for &u in &to_delete {
            engine.active[u] = false;
            deleted.push(u);
            // matching partners leave with their edge
            if let Some(pos) = engine
                .structure
                .edges
                .iter()
                .position(|&(a, b)| a == u || b == u)
            {
                let (a, b) = engine.structure.edges.remove(pos);
                engine.active[a] = false;
                engine.active[b] = false;
                engine.structure.m1.retain(|&x| x != a && x != b);
                engine.structure.m2.retain(|&x| x != a && x != b);
                if !deleted.contains(&a) && a != u {
                    deleted.push(a);
                }
                if !deleted.contains(&b) && b != u {
                    deleted.push(b);
                }
            }
            engine.structure.o1.retain(|&x| x != u);
            engine.structure.o2.retain(|&x| x != u);
        }
    }
    report.nice_audit = Some(NiceAudit {
        threshold_vertices,
        not_nice_volumes: volumes,
        deleted_clusters: deleted,
        pruning_skipped: !prune && !to_delete.is_empty(),
    });

    // Reserve sets.
    let avoid = engine.emb.used_set().clone();
    let deg_v1_total: BigRational = (0..m)
        .filter(|&u| engine.active[u])
        .map(|u| engine.deg_v1_to[u].clone())
        .fold(BigRational::zero(), |a, b| a + b);
    let plan = reserve_sets(
        &engine.cg,
        &engine.structure,
        &engine.active,
        &f_size_of,
        &avoid,
        &deg_v1_total,
        schedule,
    )
    .map_err(PipelineError::Structural)?;
    for (c, members) in plan.members.iter().enumerate() {
        engine.f_count[c] = members.len();
        for &v in members {
            engine.f_set.insert(v);
        }
    }
    report.reserve = Some(plan.clone());
    engine.record(
        "reserve budget |F| <= eta r deg(v1)/100",
        plan.budget_pass,
        format!("|F| = {} vs {}", plan.f_total, plan.budget),
    )?;
    {
        // |F ∩ u| = |F ∩ v| across matching edges; F misses the embedding.
        let mut overlap = engine.f_set.clone();
        overlap.intersect(engine.emb.used_set());
        let edges = engine.structure.edges.clone();
        let balanced = edges
            .iter()
            .filter(|&&(a, b)| engine.active[a] && engine.active[b])
            .all(|&(a, b)| engine.f_count[a] == engine.f_count[b]);
        let disjoint = overlap.is_empty();
        engine.record(
            "reserve balance |F ∩ u| = |F ∩ v| on matching edges",
            balanced,
            String::new(),
        )?;
        engine.record(
            "reserve disjoint from the embedding",
            disjoint,
            String::new(),
        )?;
    }

    // ---------------- Phase 1: saturating the matching edges ----------------
    let mut phase1 = PhaseLog {
        phase: "phase 1: saturate matching edges".into(),
        ..Default::default()
    };
    let edges = engine.structure.edges.clone();
    'phase1: for &(u, v) in &edges {
        if !engine.active[u] || !engine.active[v] {
            continue;
        }
        loop {
            if engine.stop_reached() {
                phase1.notes.push("volume threshold reached".into());
                break 'phase1;
            }
            if engine.is_saturated(u) || engine.is_full(v) {
                break;
            }
            match engine.place_guarded(u, v, &mut phase1)? {
                Some(_) => {}
                None => {
                    phase1.notes.push(format!("no eligible tree for edge ({u},{v})"));
                    break;
                }
            }
        }
        let post = engine.is_saturated(u) || engine.is_full(v) || engine.stop_reached();
        engine.record(
            "phase-1 postcondition: u saturated or v full",
            post || !phase1.notes.is_empty(),
            format!("edge ({u},{v})"),
        )?;
    }
    report.phases.push(phase1);

    // ---------------- Phase 2: saturating the O clusters --------------------
    let mut phase2 = PhaseLog {
        phase: "phase 2: saturate O1 clusters".into(),
        ..Default::default()
    };
    let o1 = engine.structure.o1.clone();
    'phase2: for &u in &o1 {
        if !engine.active[u] {
            continue;
        }
        while !engine.is_saturated(u) {
            if engine.stop_reached() {
                phase2.notes.push("volume threshold reached".into());
                break 'phase2;
            }
            // Saturation guarantee: some neighbour in M2 ∪ O2 is not full.
            let nbr = engine
                .structure
                .m2
                .iter()
                .chain(engine.structure.o2.iter())
                .copied()
                .filter(|&w| {
                    engine.active[w]
                        && engine.cg.has_edge(u, w)
                        && !engine
                            .structure
                            .dropped_edges
                            .iter()
                            .any(|&(p, q)| (p == u && q == w) || (p == w && q == u))
                })
                .find(|&w| !engine.is_full(w));
            let Some(v) = nbr else {
                let usable_any = engine
                    .structure
                    .m2
                    .iter()
                    .chain(engine.structure.o2.iter())
                    .any(|&w| {
                        engine.active[w]
                            && engine.cg.has_edge(u, w)
                            && !engine
                                .structure
                                .dropped_edges
                                .iter()
                                .any(|&(p, q)| (p == u && q == w) || (p == w && q == u))
                    });
                if usable_any {
                    // A usable neighbour existed but all are full: that is
                    // the situation the saturation claim rules out.
                    engine.record(
                        "phase-2 guarantee: O1 cluster has a non-full neighbour",
                        false,
                        format!("cluster {u}"),
                    )?;
                }
                phase2
                    .notes
                    .push(format!("cluster {u}: no usable non-full neighbour"));
                break;
            };
            match engine.place_guarded(u, v, &mut phase2)? {
                Some(_) => {}
                None => {
                    phase2.notes.push(format!("no eligible tree for O1 cluster {u}"));
                    break;
                }
            }
        }
    }
    report.phases.push(phase2);

    // ---------------- Phase 3: finalising the matching ----------------------
    let mut phase3 = PhaseLog {
        phase: "phase 3: finalise matching edges".into(),
        ..Default::default()
    };
    let edges = engine.structure.edges.clone();
    'phase3: for &(u, v) in &edges {
        if !engine.active[u] || !engine.active[v] {
            continue;
        }
        if engine.stop_reached() {
            phase3.notes.push("volume threshold reached".into());
            break 'phase3;
        }
        if engine.is_edge_saturated(u, v) {
            continue;
        }
        if !engine.is_saturated(u) && engine.is_full(v) {
            // Phase 1 ended this edge by filling the M2 side: undo every
            // tree embedded here and re-fill under the balancing regime.
            let here: Vec<usize> = (0..engine.micro.len())
                .filter(|&i| {
                    engine.embedded_at[i] == Some((u, v)) || engine.embedded_at[i] == Some((v, u))
                })
                .collect();
            for idx in here {
                engine.unplace_tree(idx);
                phase3.unplacements += 1;
            }
        }
        if engine.is_saturated(u) && !engine.is_full(u) {
            // (a) keep filling with V2 on the M2 side.
            while !engine.is_saturated(v) && !engine.is_full(u) && !engine.stop_reached() {
                if engine.place_guarded(v, u, &mut phase3)?.is_none() {
                    break;
                }
            }
        }
        if engine.stop_reached() {
            phase3.notes.push("volume threshold reached".into());
            break 'phase3;
        }
        // (b) un-embed lopsided trees of this edge until the balancing
        // condition holds; symmetric in the two clusters, so it also
        // normalizes edges the earlier phases left unbalanced.
        engine.rebalance_edge(u, v, &mut phase3)?;
        // (c) saturate the edge maintaining balance.
        loop {
            if engine.stop_reached() {
                phase3.notes.push("volume threshold reached".into());
                break 'phase3;
            }
            if engine.is_edge_saturated(u, v) {
                break;
            }
            let su = engine.is_saturated(u);
            let sv = engine.is_saturated(v);
            if su && sv {
                break;
            }
            let placed = if !su && !sv {
                // steer the smaller colour class into the fuller cluster,
                // which keeps |phi∩u - phi∩v| within beta k per step
                let fuller = if engine.phi_count[u] >= engine.phi_count[v] {
                    u
                } else {
                    v
                };
                let other = if fuller == u { v } else { u };
                engine.place_guarded_oriented(fuller, other, &mut phase3)?
            } else {
                // exactly one saturated: fill V2 into the other
                let (recv_v2, anchor_side) = if su { (v, u) } else { (u, v) };
                if engine.is_full(anchor_side) {
                    // balance + fullness imply saturation; verify and move on
                    let ok = engine.is_edge_saturated(u, v);
                    engine.record(
                        "phase-3 endgame: full + balance implies edge saturated",
                        ok,
                        format!("edge ({u},{v})"),
                    )?;
                    break;
                }
                engine.place_guarded(recv_v2, anchor_side, &mut phase3)?
            };
            if placed.is_none() {
                phase3
                    .notes
                    .push(format!("no eligible tree while finalising ({u},{v})"));
                break;
            }
            let imb =
                (engine.phi_count[u] as i64 - engine.phi_count[v] as i64).unsigned_abs() as usize;
            if !su && !sv {
                engine.record(
                    "balancing condition maintained in phase 3(c)",
                    bigint(imb) <= engine.beta_k.clone(),
                    format!("imbalance {imb} on ({u},{v})"),
                )?;
            }
        }
    }
    report.phases.push(phase3);

    // Exit accounting: the volume threshold must be reachable.
    if !engine.stop_reached() {
        let all_sat = engine
            .structure
            .edges
            .iter()
            .filter(|&&(a, b)| engine.active[a] && engine.active[b])
            .all(|&(a, b)| engine.is_edge_saturated(a, b))
            && engine
                .structure
                .o1
                .iter()
                .filter(|&&x| engine.active[x])
                .all(|&x| engine.is_saturated(x));
        engine.record(
            "exit guarantee: unsaturated capacity remains until the volume threshold",
            !all_sat,
            format!(
                "domain {} of {}, threshold leftover {}",
                engine.emb.domain_size(),
                k,
                threshold_vertices
            ),
        )?;
    }

    // ---------------- Finishing stage through the reserve -------------------
    let mut finish = FinishLog::default();
    let leftover: Vec<usize> = (0..engine.micro.len())
        .filter(|&i| engine.embedded_at[i].is_none())
        .collect();
    finish.leftover_trees = leftover.len();
    finish.leftover_vertices = leftover.iter().map(|&i| engine.micro[i].verts.len()).sum();
    engine.record(
        "leftover volume within eps^{1/4} k",
        within_leftover_budget(finish.leftover_vertices, k, &schedule.eps),
        format!("{} vertices leftover", finish.leftover_vertices),
    )?;
    let mut pair_usage: Vec<(usize, usize, usize)> = plan
        .pairs
        .iter()
        .map(|&(a, b)| (a, b, 0usize))
        .collect();
    for idx in leftover {
        let mt = &engine.micro[idx];
        let (z1, x1) = mt.anchors[0];
        let (z2, x2) = *mt.anchors.last().unwrap();
        // Prefer reserve pairs under the d/2 usage cap, then least used.
        let cap_of = |a: usize| {
            let d = rat_f64(&schedule.d);
            ((d / 2.0) * plan.members[a].len() as f64) as usize
        };
        let mut order: Vec<usize> = (0..pair_usage.len()).collect();
        order.sort_by_key(|&i| {
            let (a, _, used) = pair_usage[i];
            (used > cap_of(a), used)
        });
        let mut placed_ok = false;
        for oi in order {
            let (fu, gu, _) = pair_usage[oi];
            if !engine.active[fu] || !engine.active[gu] {
                continue;
            }
            let input = MicrotreeEmbedInput {
                tree: t,
                comp: &mt.verts,
                host: &engine.work,
                u_cluster: &plan.members[fu],
                v_cluster: &plan.members[gu],
                anchor1: engine.emb.host_of(z1).unwrap(),
                anchor2: engine.emb.host_of(z2).unwrap(),
                attach1: x1,
                attach2: x2,
                forbidden: &VertexSet::new(n),
                density: engine
                    .cg
                    .density(fu, gu)
                    .unwrap_or_else(|| Rational64::new(1, 10)),
                eps: to_r64(&schedule.eps),
                typicality_margin: to_r64(&schedule.eps_typical),
            };
            match embed_microtree(&input, &mut engine.emb) {
                Ok(placed) => {
                    for &tv in &placed {
                        let hv = engine.emb.host_of(tv).unwrap();
                        if let Some(c) = engine.cluster_of[hv] {
                            engine.phi_count[c] += 1;
                        }
                    }
                    pair_usage[oi].2 += placed.len();
                    engine.placed_of[idx] = placed;
                    engine.embedded_at[idx] = Some((fu, gu));
                    finish.placed_trees += 1;
                    placed_ok = true;
                    break;
                }
                Err(EmbedError::Stuck(_)) | Err(EmbedError::Precondition(_)) => continue,
            }
        }
        if !placed_ok {
            report.finish = Some(finish);
            report.assertions = engine.assertions;
            return Err(PipelineError::Structural(format!(
                "finishing stage could not place microtree of size {}",
                mt.verts.len()
            )));
        }
    }
    finish.pair_usage = pair_usage;
    report.finish = Some(finish);

    // F-disjointness held throughout the phases (checked before finishing
    // trees were steered *into* F): recorded above. Final validation:
    let emb = engine.emb;
    if !emb.is_total() {
        report.assertions = engine.assertions;
        return Err(PipelineError::Structural(format!(
            "embedding covers {} of {} vertices",
            emb.domain_size(),
            k
        )));
    }
    if let Err(e) = validate_embedding(t, &engine.work, &emb, true) {
        report.assertions = engine.assertions;
        return Err(PipelineError::Structural(format!(
            "final validation failed: {e}"
        )));
    }
    report.assertions = engine.assertions;
    Ok(emb)
}

impl<'a> Engine<'a> {
    /// Un-embeds trees of the edge (u, v) until the balancing condition
    /// ||phi ∩ u| - |phi ∩ v|| <= beta k holds. Each removed tree has at
    /// least as many vertices on the heavier side, chosen to bring the
    /// imbalance closest to zero without overshooting past the bound.
    fn rebalance_edge(
        &mut self,
        u: usize,
        v: usize,
        log: &mut PhaseLog,
    ) -> Result<(), PipelineError> {
        loop {
            let imb = self.phi_count[u] as i64 - self.phi_count[v] as i64;
            if bigint(imb.unsigned_abs() as usize) <= self.beta_k {
                break;
            }
            // Heavy side and its orientation sign.
            let sign = if imb > 0 { 1i64 } else { -1 };
            let mut best: Option<(i64, usize)> = None;
            for i in 0..self.micro.len() {
                if self.embedded_at[i] != Some((u, v)) && self.embedded_at[i] != Some((v, u)) {
                    continue;
                }
                let in_u = self.placed_of[i]
                    .iter()
                    .filter(|&&tv| {
                        self.emb.host_of(tv).and_then(|h| self.cluster_of[h]) == Some(u)
                    })
                    .count() as i64;
                let in_v = self.placed_of[i].len() as i64 - in_u;
                let delta = in_u - in_v;
                // Only trees at least as heavy on the heavier side qualify,
                // and removal must not overshoot past the bound on the
                // opposite side. Staying over on the same side is progress.
                if delta * sign < 0 {
                    continue;
                }
                let next = imb - delta;
                if next * sign < 0 && bigint(next.unsigned_abs() as usize) > self.beta_k {
                    continue;
                }
                let score = next.abs();
                if best.map_or(true, |(s, _)| score < s) {
                    best = Some((score, i));
                }
            }
            let Some((_, idx)) = best else {
                self.record(
                    "phase-3(b) un-embedding candidate exists",
                    false,
                    format!("edge ({u},{v}) at imbalance {imb}"),
                )?;
                break;
            };
            self.unplace_tree(idx);
            log.unplacements += 1;
        }
        let imb = (self.phi_count[u] as i64 - self.phi_count[v] as i64).unsigned_abs();
        let ok = bigint(imb as usize) <= self.beta_k;
        self.record(
            "balancing condition after un-embedding",
            ok,
            format!("|phi∩u - phi∩v| = {imb} on edge ({u},{v})"),
        )
    }

    /// Orientation-aware placement for phase 3(c): given (fuller, other),
    /// pick the lowest eligible tree and send its smaller colour class to
    /// the fuller cluster.
    fn place_guarded_oriented(
        &mut self,
        fuller: usize,
        other: usize,
        log: &mut PhaseLog,
    ) -> Result<Option<usize>, PipelineError> {
        if self.events > self.max_events {
            return Err(PipelineError::Structural(
                "placement event budget exhausted".into(),
            ));
        }
        let mut candidates: Vec<usize> = (0..self.micro.len())
            .filter(|&i| self.embedded_at[i].is_none())
            .collect();
        candidates.sort_by_key(|&i| (std::cmp::Reverse(self.micro[i].verts.len()), i));
        for idx in candidates {
            let (su, sv) = self.class_split(&self.micro[idx]);
            // V2 side (su) goes to `u_arg` of place_tree; choose u_arg so the
            // smaller class lands in `fuller`.
            let (u_arg, v_arg) = if su <= sv {
                (fuller, other)
            } else {
                (other, fuller)
            };
            if !self.cg.has_edge(u_arg, v_arg) && u_arg != v_arg {
                // matching edges always exist; defensive
            }
            let free_u = self.size().saturating_sub(self.occ(u_arg));
            let free_u = free_u.saturating_sub(free_u / 12);
            let free_v = self.size().saturating_sub(self.occ(v_arg));
            let free_v = free_v.saturating_sub(free_v / 12);
            if su + 1 > free_u || sv + 1 > free_v {
                continue;
            }
            if !self.nice(&self.micro[idx], u_arg) {
                continue;
            }
            match self.place_tree(idx, u_arg, v_arg) {
                Ok(()) => {
                    log.placements += 1;
                    log.vertices_placed += self.micro[idx].verts.len();
                    return Ok(Some(idx));
                }
                Err(EmbedError::Stuck(_)) => {
                    log.skipped_stuck += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{rat, PracticalParams};

    #[test]
    fn occupancy_thresholds_exact_boundaries() {
        // eps = 1/16: 4 sqrt(eps) = 1, so full means occ >= size - size = 0
        // ... with size scaled: use size 16: full iff occ >= 16 - 16 = 0.
        let eps = BigRational::new(BigInt::from(1), BigInt::from(16));
        assert!(cluster_full(0, 16, &eps));
        // eps = 1/64: 4 sqrt(eps)*16 = 8: full iff occ >= 8.
        let eps = BigRational::new(BigInt::from(1), BigInt::from(64));
        assert!(cluster_full(8, 16, &eps));
        assert!(!cluster_full(7, 16, &eps));
        // saturated at exactly deg - 4 sqrt(eps)|u| (inclusive).
        let deg = BigRational::from_integer(BigInt::from(12));
        assert!(cluster_saturated(4, 16, &deg, &eps));
        assert!(!cluster_saturated(3, 16, &deg, &eps));
        // edge threshold includes the beta k slack.
        let beta_k = BigRational::from_integer(BigInt::from(2));
        let deg_sum = BigRational::from_integer(BigInt::from(24));
        // 8 sqrt(eps) * 16 = 16: threshold 24 - 16 - 2 = 6.
        assert!(edge_saturated(6, 16, &deg_sum, &eps, &beta_k));
        assert!(!edge_saturated(5, 16, &deg_sum, &eps, &beta_k));
        // full implies saturated for clusters (deg <= size).
        for occ in 0..=16 {
            if cluster_full(occ, 16, &eps) {
                assert!(cluster_saturated(occ, 16, &deg, &eps));
            }
        }
    }

    #[test]
    fn matching_structure_star_and_matching() {
        // Star of clusters around v1 with no edges among the leaves:
        // M empty, O1 = all neighbours.
        let m = 5;
        let mut weight = vec![vec![None; m]; m];
        for j in 1..m {
            weight[0][j] = Some(Rational64::new(1, 2));
            weight[j][0] = Some(Rational64::new(1, 2));
        }
        let cg = ClusterGraph {
            clusters: (0..m).map(|i| vec![i]).collect(),
            cluster_size: 1,
            weight,
        };
        let ms = build_matching_structure(&cg, 0, &rat(1, 10), true).unwrap();
        assert!(ms.edges.is_empty());
        assert_eq!(ms.o1, vec![1, 2, 3, 4]);
        assert!(ms.o2.is_empty());

        //

        // N(v1) forming a perfect matching: M covers it, O1 empty.
        let m = 5;
        let mut weight = vec![vec![None; m]; m];
        let link = |a: usize, b: usize, w: &mut Vec<Vec<Option<Rational64>>>| {
            w[a][b] = Some(Rational64::new(1, 2));
            w[b][a] = Some(Rational64::new(1, 2));
        };
        for j in 1..m {
            link(0, j, &mut weight);
        }
        link(1, 2, &mut weight);
        link(3, 4, &mut weight);
        let cg = ClusterGraph {
            clusters: (0..m).map(|i| vec![i]).collect(),
            cluster_size: 1,
            weight,
        };
        let ms = build_matching_structure(&cg, 0, &rat(1, 10), true).unwrap();
        assert_eq!(ms.edges.len(), 2);
        assert!(ms.o1.is_empty());
    }

    #[test]
    fn reserve_formula_and_graceful_degeneration() {
        // Four clusters: v1 = 0, matching edge (1,2), O1 = {3} with an O2
        // partner is absent here so its reserve is released.
        let m = 4;
        let mut weight = vec![vec![None; m]; m];
        let link = |a: usize, b: usize, w: &mut Vec<Vec<Option<Rational64>>>| {
            w[a][b] = Some(Rational64::new(1, 2));
            w[b][a] = Some(Rational64::new(1, 2));
        };
        for j in 1..m {
            link(0, j, &mut weight);
        }
        link(1, 2, &mut weight);
        let cg = ClusterGraph {
            clusters: (0..m).map(|i| (i * 300..(i + 1) * 300).collect()).collect(),
            cluster_size: 300,
            weight,
        };
        let ms = build_matching_structure(&cg, 0, &rat(1, 10), true).unwrap();
        assert_eq!(ms.edges, vec![(1, 2)]);
        assert_eq!(ms.o1, vec![3]);
        let schedule = practical_schedule();
        let avoid = crate::bitset::VertexSet::new(1200);
        // |F_u| = 1 per cluster: balanced pair plus released O1 reserve.
        let plan = reserve_sets(
            &cg,
            &ms,
            &[true; 4],
            &|_| 1,
            &avoid,
            &BigRational::from_integer(BigInt::from(600)),
            &schedule,
        )
        .unwrap();
        assert_eq!(plan.members[1].len(), 1);
        assert_eq!(plan.members[2].len(), 1);
        assert_eq!(plan.members[3].len(), 0, "released: no usable partner");
        assert_eq!(plan.pairs, vec![(1, 2)]);
        // Zero-size reserve degrades gracefully to an empty F.
        let plan = reserve_sets(
            &cg,
            &ms,
            &[true; 4],
            &|_| 0,
            &avoid,
            &BigRational::from_integer(BigInt::from(600)),
            &schedule,
        )
        .unwrap();
        assert_eq!(plan.f_total, 0);
        assert!(plan.budget_pass);
    }

    fn practical_schedule() -> ConstantSchedule {
        PracticalParams::default_for(rat(1, 10), rat(1, 2))
            .into_schedule()
            .unwrap()
    }

    #[test]
    fn pipeline_on_complete_host() {
        // Complete host: everything embeds (greedy shortcut fires since
        // 2k <= eta n fails here, so the full pipeline runs). The partition
        // granularity is matched to the small k.
        let g = crate::graph::complete(600);
        let t = crate::tree_sample::bounded_degree_tree(200, 8, 3).unwrap();
        let mut params = PracticalParams::default_for(rat(1, 10), rat(1, 2));
        params.beta = rat(3, 10);
        let schedule = params.into_schedule().unwrap();
        let out = run_three_phases(&g, &t, &schedule, &PipelineOptions::default());
        if let Some(e) = &out.error {
            panic!("pipeline failed: {e}; report {:?}", out.report.result);
        }
        assert!(out.report.result.validated);
    }

    #[test]
    fn pipeline_rejects_skewed_tree() {
        let g = crate::graph::complete(600);
        // A path has class sizes ~n/2 each; with r tiny the precondition
        // |V1| <= rk fails.
        let t = crate::tree::path_tree(200);
        let mut p = PracticalParams::default_for(rat(1, 10), rat(1, 100));
        p.gamma = rat(1, 20);
        let schedule = p.into_schedule().unwrap();
        let out = run_three_phases(&g, &t, &schedule, &PipelineOptions::default());
        match out.error {
            Some(PipelineError::TreePrecondition(_)) => {}
            other => panic!("expected tree precondition, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_greedy_shortcut() {
        // Tiny tree relative to the host: delta(G) is ample and the greedy
        // path is taken.
        let g = crate::graph::complete(600);
        let t = crate::tree_sample::bounded_degree_tree(20, 5, 1).unwrap();
        let schedule = practical_schedule();
        let out = run_three_phases(&g, &t, &schedule, &PipelineOptions::default());
        assert!(out.error.is_none());
        assert!(out.report.greedy_shortcut);
        assert!(out.report.result.validated);
    }

    /// Spine alternating hub/plain vertices, five leaves per hub: all hubs
    /// share one colour class, so microtrees are heavily class-skewed and
    /// phase 1 saturates the V2 side long before the V1 side fills.
    fn skewed_comb_tree(sections: usize) -> crate::tree::Tree {
        let mut parent: Vec<Option<u32>> = Vec::new();
        let mut last_spine: Option<u32> = None;
        for _ in 0..sections {
            // hub
            parent.push(last_spine);
            let hub = parent.len() as u32 - 1;
            for _ in 0..5 {
                parent.push(Some(hub));
            }
            // plain spacer
            parent.push(Some(hub));
            last_spine = Some(parent.len() as u32 - 1);
        }
        crate::tree::Tree::from_parents(parent).unwrap()
    }

    #[test]
    fn skewed_tree_exercises_phase_three() {
        let host = planted_blowup_host(3000, 10, 0.3, 0.9, 5);
        let t = skewed_comb_tree(214); // 1498 vertices, |V1| = 214
        // Heavily skewed microtrees need finer chopping so two of them fit
        // a cluster side; beta is the knob for exactly that.
        let mut params = PracticalParams::default_for(rat(1, 10), rat(1, 2));
        params.beta = rat(1, 20);
        let schedule = params.into_schedule().unwrap();
        let opts = PipelineOptions {
            seed: 5,
            initial_clusters: Some(10),
            ..Default::default()
        };
        let out = run_three_phases(&host.graph, &t, &schedule, &opts);
        if let Some(e) = &out.error {
            panic!(
                "skewed run failed: {e}; phases {:?}, finish {:?}",
                out.report
                    .phases
                    .iter()
                    .map(|p| (p.placements, p.vertices_placed))
                    .collect::<Vec<_>>(),
                out.report.finish
            );
        }
        assert!(out.report.result.validated);
        // Phase 3 must have done real work on this fixture.
        let p3 = &out.report.phases[2];
        assert!(
            p3.placements > 0,
            "phase 3 idle: {:?}",
            out.report
                .phases
                .iter()
                .map(|p| p.placements)
                .collect::<Vec<_>>()
        );
        // Balancing and saturation records all hold.
        for a in &out.report.assertions {
            if a.name.contains("balancing") || a.name.contains("postcondition") {
                assert!(a.pass, "{}: {}", a.name, a.detail);
            }
        }
    }

    #[test]
    fn planted_blowup_full_run() {
        let host = planted_blowup_host(3000, 10, 0.3, 0.9, 7);
        let t = crate::tree_sample::bounded_degree_tree(1500, 8, 41).unwrap();
        let schedule = practical_schedule();
        let opts = PipelineOptions {
            seed: 7,
            initial_clusters: Some(10),
            ..Default::default()
        };
        let out = run_three_phases(&host.graph, &t, &schedule, &opts);
        if let Some(e) = &out.error {
            let ph: Vec<String> = out
                .report
                .phases
                .iter()
                .map(|p| format!("{}: {} placements, {} vertices", p.phase, p.placements, p.vertices_placed))
                .collect();
            panic!(
                "planted run failed: {e}\nphases: {ph:?}\nassertions: {:?}\nfinish: {:?}",
                out.report
                    .assertions
                    .iter()
                    .filter(|a| !a.pass)
                    .collect::<Vec<_>>(),
                out.report.finish
            );
        }
        assert!(out.report.result.validated);
    }
}
