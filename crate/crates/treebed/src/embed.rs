//! Tree-to-graph embeddings: the injective partial map with its independent
//! validator, the greedy min-degree embedder, and the two regular-pair
//! embedding routines (seeds into a cluster pair, one microtree into a
//! regular pair anchored at already-embedded seeds).

use crate::bitset::VertexSet;
use crate::graph::Graph;
use crate::partition::OneSidedPartition;
use crate::tree::Tree;
use num_rational::Rational64;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct EmbedFailure {
    pub tree_vertex: usize,
    pub stage: &'static str,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no candidate host vertex for tree vertex {} during {}: {}", .0.tree_vertex, .0.stage, .0.detail)]
    Stuck(EmbedFailure),
}

/// Injective partial map from tree vertices to host vertices.
#[derive(Clone, Debug)]
pub struct Embedding {
    to_host: Vec<Option<u32>>,
    used: VertexSet,
    placed: usize,
}

impl Embedding {
    pub fn new(tree_n: usize, host_n: usize) -> Self {
        Embedding {
            to_host: vec![None; tree_n],
            used: VertexSet::new(host_n),
            placed: 0,
        }
    }

    pub fn place(&mut self, tv: usize, hv: usize) -> Result<(), EmbedError> {
        if self.to_host[tv].is_some() {
            return Err(EmbedError::Precondition(format!(
                "tree vertex {tv} already embedded"
            )));
        }
        if self.used.contains(hv) {
            return Err(EmbedError::Precondition(format!(
                "host vertex {hv} already used"
            )));
        }
        self.to_host[tv] = Some(hv as u32);
        self.used.insert(hv);
        self.placed += 1;
        Ok(())
    }

    pub fn unplace(&mut self, tv: usize) {
        if let Some(hv) = self.to_host[tv].take() {
            self.used.remove(hv as usize);
            self.placed -= 1;
        }
    }

    pub fn host_of(&self, tv: usize) -> Option<usize> {
        self.to_host[tv].map(|h| h as usize)
    }

    pub fn is_used(&self, hv: usize) -> bool {
        self.used.contains(hv)
    }

    pub fn used_set(&self) -> &VertexSet {
        &self.used
    }

    pub fn domain_size(&self) -> usize {
        self.placed
    }

    pub fn is_total(&self) -> bool {
        self.placed == self.to_host.len()
    }
}

/// Independent validity check: injectivity and edge preservation on the
/// embedded subforest. Recomputes everything from the raw map and shares no
/// state with the embedders.
pub fn validate_embedding(
    t: &Tree,
    g: &Graph,
    emb: &Embedding,
    require_total: bool,
) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    let mut placed = 0usize;
    for tv in 0..t.n() {
        if let Some(hv) = emb.host_of(tv) {
            placed += 1;
            if hv >= g.n() {
                return Err(format!("tree vertex {tv} mapped outside host"));
            }
            if !seen.insert(hv) {
                return Err(format!("host vertex {hv} used twice"));
            }
        }
    }
    if require_total && placed != t.n() {
        return Err(format!("embedding covers {placed} of {} vertices", t.n()));
    }
    for (a, b) in t.edges() {
        if let (Some(ha), Some(hb)) = (emb.host_of(a), emb.host_of(b)) {
            if !g.has_edge(ha, hb) {
                return Err(format!(
                    "tree edge ({a},{b}) mapped to non-edge ({ha},{hb})"
                ));
            }
        }
    }
    Ok(())
}

/// Embeds the whole tree greedily in BFS order; each vertex goes to the
/// lowest unused neighbour of its parent's image. Works whenever the host
/// minimum degree is at least |T| - 1.
pub fn greedy_embed(t: &Tree, g: &Graph) -> Result<Embedding, EmbedError> {
    let need = t.n().saturating_sub(1);
    let min_deg = (0..g.n()).map(|v| g.degree(v)).min().unwrap_or(0);
    if g.n() < t.n() || min_deg < need {
        return Err(EmbedError::Precondition(format!(
            "min degree {min_deg} below |T|-1 = {need}"
        )));
    }
    let mut emb = Embedding::new(t.n(), g.n());
    let root = t.root();
    emb.place(root, 0)?;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let img = emb.host_of(v).unwrap();
        for &c in t.children(v) {
            let c = c as usize;
            let slot = g
                .neighbors(img)
                .find(|&h| !emb.is_used(h))
                .ok_or_else(|| {
                    EmbedError::Stuck(EmbedFailure {
                        tree_vertex: c,
                        stage: "greedy",
                        detail: format!("neighbourhood of host {img} exhausted"),
                    })
                })?;
            emb.place(c, slot)?;
            queue.push_back(c);
        }
    }
    debug_assert!(validate_embedding(t, g, &emb, true).is_ok());
    Ok(emb)
}

// ---------------------------------------------------------------------------
// Seed embedding into a cluster pair
// ---------------------------------------------------------------------------

fn exact_sqrt_at_most(count: usize, coeff_num: i64, eps: Rational64, scale: usize) -> bool {
    // count <= coeff * sqrt(eps) * scale  <=>  count^2 <= coeff^2 eps scale^2
    let lhs = Rational64::from_integer((count * count) as i64);
    let rhs = Rational64::from_integer(coeff_num * coeff_num)
        * eps
        * Rational64::from_integer((scale * scale) as i64);
    lhs <= rhs
}

fn exact_sqrt_at_least(count: usize, coeff_num: i64, eps: Rational64, scale: usize) -> bool {
    let lhs = Rational64::from_integer((count * count) as i64);
    let rhs = Rational64::from_integer(coeff_num * coeff_num)
        * eps
        * Rational64::from_integer((scale * scale) as i64);
    lhs >= rhs
}

pub struct SeedEmbedInput<'a> {
    pub tree: &'a Tree,
    pub partition: &'a OneSidedPartition,
    pub host: &'a Graph,
    /// Cluster receiving W.
    pub v1: &'a [usize],
    /// Cluster receiving the D'' singletons.
    pub v2: &'a [usize],
    /// Forbidden set U inside v1.
    pub forbidden: &'a VertexSet,
    /// Density of the (v1, v2) pair.
    pub density: Rational64,
    pub eps: Rational64,
}

/// Embeds W into `v1 \ (U ∪ U')` and the D'' singletons into `v2 \ U'`,
/// where U' collects the mutually non-typical vertices of the pair. Vertices
/// are processed in depth-first order so every constrained vertex lands next
/// to its already-embedded parent.
pub fn embed_seeds(input: &SeedEmbedInput<'_>) -> Result<Embedding, EmbedError> {
    let t = input.tree;
    let g = input.host;
    let w: BTreeSet<usize> = input.partition.w.iter().copied().collect();
    let dd: BTreeSet<usize> = input.partition.d_double.iter().copied().collect();
    let total = w.len() + dd.len();

    // |U| <= 2 sqrt(eps) |v1|
    if !exact_sqrt_at_most(input.forbidden.count(), 2, input.eps, input.v1.len()) {
        return Err(EmbedError::Precondition(format!(
            "|U| = {} exceeds 2 sqrt(eps) |v1|",
            input.forbidden.count()
        )));
    }
    // |W ∪ D''| <= (d/4) |v1|
    if Rational64::from_integer(4 * total as i64)
        > input.density * Rational64::from_integer(input.v1.len() as i64)
    {
        return Err(EmbedError::Precondition(format!(
            "|W ∪ D''| = {total} exceeds (d/4)|v1| = {}",
            input.density * Rational64::new(input.v1.len() as i64, 4)
        )));
    }

    // Mutual non-typicality set U'.
    let v2_mask = VertexSet::from_iter(g.n(), input.v2.iter().copied());
    let v1_mask = VertexSet::from_iter(g.n(), input.v1.iter().copied());
    let threshold = |other: usize| (input.density - input.eps) * Rational64::from_integer(other as i64);
    let mut u_prime = VertexSet::new(g.n());
    for &x in input.v1 {
        if Rational64::from_integer(g.deg_into(x, &v2_mask) as i64) < threshold(input.v2.len()) {
            u_prime.insert(x);
        }
    }
    for &y in input.v2 {
        if Rational64::from_integer(g.deg_into(y, &v1_mask) as i64) < threshold(input.v1.len()) {
            u_prime.insert(y);
        }
    }

    // Depth-first order from a root outside D''.
    let root = (0..t.n())
        .find(|v| !dd.contains(v))
        .expect("tree has a vertex outside D''");
    let mut order = Vec::with_capacity(total);
    let mut dfs_parent = vec![usize::MAX; t.n()];
    let mut visited = vec![false; t.n()];
    let mut stack = vec![root];
    visited[root] = true;
    while let Some(v) = stack.pop() {
        if w.contains(&v) || dd.contains(&v) {
            order.push(v);
        }
        let mut nbrs: Vec<usize> = t.neighbors(v).collect();
        nbrs.sort_unstable_by(|a, b| b.cmp(a)); // pop lowest first
        for u in nbrs {
            if !visited[u] {
                visited[u] = true;
                dfs_parent[u] = v;
                stack.push(u);
            }
        }
    }
    debug_assert_eq!(order.len(), total);

    let mut emb = Embedding::new(t.n(), g.n());
    for &x in &order {
        let in_w = w.contains(&x);
        let mut cands = if in_w { v1_mask.clone() } else { v2_mask.clone() };
        cands.subtract(&u_prime);
        cands.subtract(emb.used_set());
        if in_w {
            cands.subtract(input.forbidden);
        }
        // Constrain to the parent's image when the tree parent is embedded.
        let p = dfs_parent[x];
        if p != usize::MAX {
            if let Some(pi) = emb.host_of(p) {
                debug_assert!(w.contains(&p) || dd.contains(&p));
                let pn = g.neighbor_set(pi);
                cands.intersect(&pn);
            }
        }
        let slot = cands.first().ok_or_else(|| {
            EmbedError::Stuck(EmbedFailure {
                tree_vertex: x,
                stage: if in_w { "seed into v1" } else { "singleton into v2" },
                detail: format!(
                    "candidates empty; placed {} of {total}, |U'| = {}",
                    emb.domain_size(),
                    u_prime.count()
                ),
            })
        })?;
        emb.place(x, slot)?;
    }
    // Every W image avoids U' by construction, hence is typical to v2.
    debug_assert!(input
        .partition
        .w
        .iter()
        .all(|&x| !u_prime.contains(emb.host_of(x).unwrap())));
    Ok(emb)
}

// ---------------------------------------------------------------------------
// Microtree embedding into a regular pair
// ---------------------------------------------------------------------------

pub struct MicrotreeEmbedInput<'a> {
    pub tree: &'a Tree,
    /// Vertex set of the microtree K.
    pub comp: &'a [usize],
    pub host: &'a Graph,
    /// Cluster receiving the colour class of the attachment vertices.
    pub u_cluster: &'a [usize],
    /// Cluster receiving the other class.
    pub v_cluster: &'a [usize],
    /// Images of the anchors z1, z2 (equal when x1 = x2).
    pub anchor1: usize,
    pub anchor2: usize,
    /// Attachment vertices x1, x2 inside K (same colour class).
    pub attach1: usize,
    pub attach2: usize,
    /// Forbidden vertices inside u ∪ v.
    pub forbidden: &'a VertexSet,
    pub density: Rational64,
    pub eps: Rational64,
    /// Margin used in the typicality tests; the regularity arguments take
    /// it equal to `eps`, desk-scale runs need a statistically attainable
    /// slack instead.
    pub typicality_margin: Rational64,
}

/// Embeds the microtree into `u ∪ v`, avoiding `U` and the pairwise
/// non-typical set: the x1-x2 path alternates between the clusters and is
/// closed through an edge between the two anchor neighbourhoods; the rest
/// follows greedily. Extends `emb`; on failure the partial extension is
/// rolled back.
pub fn embed_microtree(
    input: &MicrotreeEmbedInput<'_>,
    emb: &mut Embedding,
) -> Result<Vec<usize>, EmbedError> {
    let t = input.tree;
    let g = input.host;
    let comp: BTreeSet<usize> = input.comp.iter().copied().collect();
    if !comp.contains(&input.attach1) || !comp.contains(&input.attach2) {
        return Err(EmbedError::Precondition(
            "attachment vertices outside the microtree".into(),
        ));
    }
    if t.class_of(input.attach1) != t.class_of(input.attach2) {
        return Err(EmbedError::Precondition(
            "attachment vertices in different colour classes".into(),
        ));
    }
    if (input.anchor1 == input.anchor2) != (input.attach1 == input.attach2) {
        return Err(EmbedError::Precondition(
            "anchors coincide iff attachments coincide".into(),
        ));
    }

    let u_mask = VertexSet::from_iter(g.n(), input.u_cluster.iter().copied());
    let v_mask = VertexSet::from_iter(g.n(), input.v_cluster.iter().copied());
    let mut u_free = u_mask.clone();
    u_free.subtract(input.forbidden);
    let mut v_free = v_mask.clone();
    v_free.subtract(input.forbidden);
    // |u \ U| >= 4 sqrt(eps) |u| and likewise for v.
    if !exact_sqrt_at_least(u_free.count(), 4, input.eps, input.u_cluster.len()) {
        return Err(EmbedError::Precondition(format!(
            "|u \\ U| = {} below 4 sqrt(eps)|u|",
            u_free.count()
        )));
    }
    if !exact_sqrt_at_least(v_free.count(), 4, input.eps, input.v_cluster.len()) {
        return Err(EmbedError::Precondition(format!(
            "|v \\ U| = {} below 4 sqrt(eps)|v|",
            v_free.count()
        )));
    }
    // Anchor degree into u \ U at least 3 eps |u|.
    for a in [input.anchor1, input.anchor2] {
        let deg = g.deg_into(a, &u_free);
        if Rational64::from_integer(deg as i64)
            < Rational64::from_integer(3) * input.eps
                * Rational64::from_integer(input.u_cluster.len() as i64)
        {
            return Err(EmbedError::Precondition(format!(
                "anchor {a} has {deg} candidates in u \\ U, below 3 eps |u|"
            )));
        }
    }

    // Non-typicality against the depleted other side.
    let margin = input.typicality_margin;
    let thr_u = (input.density - margin) * Rational64::from_integer(v_free.count() as i64);
    let thr_v = (input.density - margin) * Rational64::from_integer(u_free.count() as i64);
    let mut u_prime = VertexSet::new(g.n());
    for x in u_mask.iter() {
        if Rational64::from_integer(g.deg_into(x, &v_free) as i64) < thr_u {
            u_prime.insert(x);
        }
    }
    for y in v_mask.iter() {
        if Rational64::from_integer(g.deg_into(y, &u_free) as i64) < thr_v {
            u_prime.insert(y);
        }
    }

    let attach_class = t.class_of(input.attach1);
    let side_of = |tv: usize| -> &VertexSet {
        if t.class_of(tv) == attach_class {
            &u_mask
        } else {
            &v_mask
        }
    };

    let mut placed_here: Vec<usize> = Vec::with_capacity(comp.len());
    let fail = |emb: &mut Embedding, placed: &[usize], tv: usize, stage: &'static str, detail: String| {
        for &p in placed {
            emb.unplace(p);
        }
        EmbedError::Stuck(EmbedFailure {
            tree_vertex: tv,
            stage,
            detail,
        })
    };

    let candidates = |emb: &Embedding,
                      side: &VertexSet,
                      u_prime: &VertexSet,
                      parent_img: Option<usize>|
     -> VertexSet {
        let mut c = side.clone();
        c.subtract(input.forbidden);
        c.subtract(u_prime);
        c.subtract(emb.used_set());
        if let Some(p) = parent_img {
            c.intersect(&g.neighbor_set(p));
        }
        c
    };

    // The x1-x2 path, alternating u/v.
    let path = tree_path(t, input.attach1, input.attach2);
    debug_assert!(path.iter().all(|p| comp.contains(p)));
    debug_assert_eq!(path.len() % 2, 1, "same colour class means odd vertex count");
    let r = path.len();
    if r == 1 {
        let c = candidates(emb, &u_mask, &u_prime, Some(input.anchor1));
        let slot = match c.first() {
            Some(s) => s,
            None => {
                return Err(fail(
                    emb,
                    &placed_here,
                    path[0],
                    "attachment",
                    "anchor neighbourhood exhausted".into(),
                ))
            }
        };
        emb.place(path[0], slot)?;
        placed_here.push(path[0]);
    } else {
        // Embed p0 .. p_{r-3} one after another.
        for (i, &pv) in path.iter().take(r - 2).enumerate() {
            let parent_img = if i == 0 {
                Some(input.anchor1)
            } else {
                emb.host_of(path[i - 1])
            };
            let c = candidates(emb, side_of(pv), &u_prime, parent_img);
            let slot = match c.first() {
                Some(s) => s,
                None => {
                    return Err(fail(
                        emb,
                        &placed_here,
                        pv,
                        "path",
                        format!("step {i} of the connecting path"),
                    ))
                }
            };
            emb.place(pv, slot)?;
            placed_here.push(pv);
        }
        // Close via an edge between N(phi(p_{r-3})) in v-side and
        // N(anchor2) in u-side.
        let a_set = candidates(emb, side_of(path[r - 2]), &u_prime, emb.host_of(path[r - 3]));
        let b_set = candidates(emb, side_of(path[r - 1]), &u_prime, Some(input.anchor2));
        let mut edge = None;
        'outer: for a in a_set.iter() {
            let mut bn = b_set.clone();
            bn.intersect(&g.neighbor_set(a));
            if let Some(b) = bn.first() {
                edge = Some((a, b));
                break 'outer;
            }
        }
        let Some((a, b)) = edge else {
            return Err(fail(
                emb,
                &placed_here,
                path[r - 2],
                "path closing",
                format!(
                    "no edge between {} and {} candidates",
                    a_set.count(),
                    b_set.count()
                ),
            ));
        };
        emb.place(path[r - 2], a)?;
        placed_here.push(path[r - 2]);
        emb.place(path[r - 1], b)?;
        placed_here.push(path[r - 1]);
    }

    // Remaining vertices of K, greedily from the embedded path outward.
    let on_path: BTreeSet<usize> = path.iter().copied().collect();
    let mut queue: std::collections::VecDeque<usize> = path.iter().copied().collect();
    let mut visited: BTreeSet<usize> = on_path.clone();
    while let Some(v) = queue.pop_front() {
        let mut nbrs: Vec<usize> = t
            .neighbors(v)
            .filter(|x| comp.contains(x) && !visited.contains(x))
            .collect();
        nbrs.sort_unstable();
        for x in nbrs {
            visited.insert(x);
            let c = candidates(emb, side_of(x), &u_prime, emb.host_of(v));
            let slot = match c.first() {
                Some(s) => s,
                None => {
                    return Err(fail(
                        emb,
                        &placed_here,
                        x,
                        "greedy fill",
                        format!("parent image {:?}", emb.host_of(v)),
                    ))
                }
            };
            emb.place(x, slot)?;
            placed_here.push(x);
            queue.push_back(x);
        }
    }
    debug_assert_eq!(placed_here.len(), comp.len());
    Ok(placed_here)
}

/// Explicit vertex path between two tree vertices, endpoints included.
pub fn tree_path(t: &Tree, x: usize, y: usize) -> Vec<usize> {
    let mut up_x = vec![x];
    let mut up_y = vec![y];
    let (mut a, mut b) = (x, y);
    while t.depth(a) > t.depth(b) {
        a = t.parent(a).unwrap();
        up_x.push(a);
    }
    while t.depth(b) > t.depth(a) {
        b = t.parent(b).unwrap();
        up_y.push(b);
    }
    while a != b {
        a = t.parent(a).unwrap();
        b = t.parent(b).unwrap();
        up_x.push(a);
        up_y.push(b);
    }
    // up_x ends at the meeting vertex; up_y also contains it when b moved.
    up_y.pop();
    up_x.extend(up_y.into_iter().rev());
    up_x
}
