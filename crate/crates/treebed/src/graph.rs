//! Undirected simple graphs over dense 0-based vertex ids, plus the degree
//! and density arithmetic used throughout: everything at the API boundary is
//! an exact rational, never a float.
//!
//! Adjacency is stored as one bitset row per vertex for small or dense
//! graphs and as sorted neighbour lists for large sparse ones; the embedding
//! and oracle hot loops intersect rows word-by-word.

use crate::bitset::VertexSet;
use crate::rng;
use num_rational::Rational64;
use thiserror::Error;

/// Graphs at or below this order always use bitset rows.
const DENSE_ORDER: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("operation undefined on the empty graph")]
    EmptyGraph,
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("vertex sets must be nonempty and disjoint: {0}")]
    BadVertexPair(String),
    #[error("average degree {got} below required {need}")]
    AverageDegreeTooLow { got: Rational64, need: Rational64 },
}

#[derive(Clone)]
enum Store {
    Dense { words: usize, rows: Vec<u64> },
    Sparse(Vec<Vec<u32>>),
}

#[derive(Clone)]
pub struct Graph {
    n: usize,
    m: usize,
    deg: Vec<u32>,
    store: Store,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n, self.m)
    }
}

/// Incremental construction buffer. Always bit-addressed; `build` picks the
/// final representation by density.
pub struct GraphBuilder {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        GraphBuilder {
            n,
            words,
            rows: vec![0; n * words],
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        if u >= self.n {
            return Err(GraphError::VertexOutOfRange(u, self.n));
        }
        if v >= self.n {
            return Err(GraphError::VertexOutOfRange(v, self.n));
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.rows[u * self.words + v / 64] |= 1 << (v % 64);
        self.rows[v * self.words + u / 64] |= 1 << (u % 64);
        Ok(())
    }

    /// Adds all edges between `a` and `b` (the sets must be disjoint).
    pub fn connect_sets(&mut self, a: &[usize], b: &[usize]) -> Result<(), GraphError> {
        for &u in a {
            for &v in b {
                self.add_edge(u, v)?;
            }
        }
        Ok(())
    }

    pub fn build(self) -> Graph {
        let mut deg = vec![0u32; self.n];
        let mut m2 = 0usize;
        for v in 0..self.n {
            let row = &self.rows[v * self.words..(v + 1) * self.words];
            let d: u32 = row.iter().map(|w| w.count_ones()).sum();
            deg[v] = d;
            m2 += d as usize;
        }
        let m = m2 / 2;
        // Keep rows if small or dense enough that lists would not pay off.
        let keep_dense = self.n <= DENSE_ORDER || m * 32 >= self.n * self.n;
        let store = if keep_dense {
            Store::Dense {
                words: self.words,
                rows: self.rows,
            }
        } else {
            let mut lists = vec![Vec::new(); self.n];
            for v in 0..self.n {
                let row = &self.rows[v * self.words..(v + 1) * self.words];
                let mut list = Vec::with_capacity(deg[v] as usize);
                for (i, &w) in row.iter().enumerate() {
                    let mut w = w;
                    while w != 0 {
                        list.push((i * 64 + w.trailing_zeros() as usize) as u32);
                        w &= w - 1;
                    }
                }
                lists[v] = list;
            }
            Store::Sparse(lists)
        };
        Graph {
            n: self.n,
            m,
            deg,
            store,
        }
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        GraphBuilder::new(n).build()
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut b = GraphBuilder::new(n);
        for &(u, v) in edges {
            b.add_edge(u, v)?;
        }
        Ok(b.build())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn degree(&self, v: usize) -> usize {
        self.deg[v] as usize
    }

    pub fn vertices(&self) -> std::ops::Range<usize> {
        0..self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        match &self.store {
            Store::Dense { words, rows } => rows[u * words + v / 64] >> (v % 64) & 1 == 1,
            Store::Sparse(lists) => lists[u].binary_search(&(v as u32)).is_ok(),
        }
    }

    /// Bitset adjacency row, available when the graph is stored densely.
    pub fn row(&self, v: usize) -> Option<&[u64]> {
        match &self.store {
            Store::Dense { words, rows } => Some(&rows[v * words..(v + 1) * words]),
            Store::Sparse(_) => None,
        }
    }

    pub fn neighbors(&self, v: usize) -> Neighbors<'_> {
        match &self.store {
            Store::Dense { words, rows } => Neighbors::Dense {
                row: &rows[v * words..(v + 1) * words],
                word_idx: 0,
                cur: rows[v * words],
            },
            Store::Sparse(lists) => Neighbors::Sparse(lists[v].iter()),
        }
    }

    pub fn neighbor_set(&self, v: usize) -> VertexSet {
        let mut s = VertexSet::new(self.n);
        for u in self.neighbors(v) {
            s.insert(u);
        }
        s
    }

    /// Count of edges between disjoint sets, by intersecting rows against a
    /// membership bitset of the smaller side.
    pub fn edges_between(&self, a: &[usize], b: &[usize]) -> u64 {
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let mask = VertexSet::from_iter(self.n, small.iter().copied());
        let mut count = 0u64;
        for &v in large {
            match self.row(v) {
                Some(row) => {
                    for (w, m) in row.iter().zip(mask.words()) {
                        count += (w & m).count_ones() as u64;
                    }
                }
                None => {
                    for u in self.neighbors(v) {
                        if mask.contains(u) {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    pub fn deg_into(&self, v: usize, mask: &VertexSet) -> usize {
        match self.row(v) {
            Some(row) => row
                .iter()
                .zip(mask.words())
                .map(|(w, m)| (w & m).count_ones() as usize)
                .sum(),
            None => self.neighbors(v).filter(|&u| mask.contains(u)).count(),
        }
    }

    /// Induced subgraph on `verts` (deduplicated, sorted); the second return
    /// value maps new ids back to the parent graph.
    pub fn induced(&self, verts: &[usize]) -> (Graph, Vec<usize>) {
        let mut ids: Vec<usize> = verts.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut back = vec![usize::MAX; self.n];
        for (new, &old) in ids.iter().enumerate() {
            back[old] = new;
        }
        let mut b = GraphBuilder::new(ids.len());
        for (new, &old) in ids.iter().enumerate() {
            for u in self.neighbors(old) {
                if u > old && back[u] != usize::MAX {
                    b.add_edge(new, back[u]).unwrap();
                }
            }
        }
        (b.build(), ids)
    }

    /// Checks the structural invariants (symmetry, no loops). Primarily used
    /// by tests after decode paths.
    pub fn check_invariants(&self) -> bool {
        for v in 0..self.n {
            for u in self.neighbors(v) {
                if u == v || !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }
}

pub enum Neighbors<'a> {
    Dense {
        row: &'a [u64],
        word_idx: usize,
        cur: u64,
    },
    Sparse(std::slice::Iter<'a, u32>),
}

impl<'a> Iterator for Neighbors<'a> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Dense { row, word_idx, cur } => loop {
                if *cur != 0 {
                    let bit = cur.trailing_zeros() as usize;
                    *cur &= *cur - 1;
                    return Some(*word_idx * 64 + bit);
                }
                *word_idx += 1;
                if *word_idx >= row.len() {
                    return None;
                }
                *cur = row[*word_idx];
            },
            Neighbors::Sparse(it) => it.next().map(|&v| v as usize),
        }
    }
}

/// An induced subgraph together with the id-remap table back to its parent.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: Graph,
    /// `orig_ids[new] = old`.
    pub orig_ids: Vec<usize>,
}

/// Minimum degree, maximum degree and exact average degree `2|E|/n`.
pub fn degree_stats(g: &Graph) -> Result<(usize, usize, Rational64), GraphError> {
    if g.n() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let min = (0..g.n()).map(|v| g.degree(v)).min().unwrap();
    let max = (0..g.n()).map(|v| g.degree(v)).max().unwrap();
    let avg = Rational64::new(2 * g.edge_count() as i64, g.n() as i64);
    Ok((min, max, avg))
}

/// A pair of disjoint vertex sets of one graph.
#[derive(Clone, Debug)]
pub struct VertexSetPair {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl VertexSetPair {
    pub fn new(g: &Graph, x: Vec<usize>, y: Vec<usize>) -> Result<Self, GraphError> {
        if x.is_empty() || y.is_empty() {
            return Err(GraphError::BadVertexPair("empty side".into()));
        }
        let mut seen = VertexSet::new(g.n());
        for &v in x.iter().chain(y.iter()) {
            if v >= g.n() {
                return Err(GraphError::VertexOutOfRange(v, g.n()));
            }
            if seen.contains(v) {
                return Err(GraphError::BadVertexPair(format!("vertex {v} repeated")));
            }
            seen.insert(v);
        }
        Ok(VertexSetPair { x, y })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairDensity {
    pub edges: u64,
    /// e(X,Y) / (|X||Y|)
    pub density: Rational64,
    /// e(X,Y) / |X|
    pub avg_degree_x: Rational64,
}

/// Edge count, density and average X-degree of a disjoint pair.
pub fn pair_density(g: &Graph, p: &VertexSetPair) -> PairDensity {
    let e = g.edges_between(&p.x, &p.y);
    PairDensity {
        edges: e,
        density: Rational64::new(e as i64, (p.x.len() * p.y.len()) as i64),
        avg_degree_x: Rational64::new(e as i64, p.x.len() as i64),
    }
}

/// Repeatedly deletes vertices of degree `< t`; the result is the unique
/// maximal induced subgraph with minimum degree `>= t` (possibly empty).
pub fn prune_min_degree(g: &Graph, t: usize) -> Subgraph {
    let mut alive = vec![true; g.n()];
    let mut deg: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
    let mut queue: Vec<usize> = (0..g.n()).filter(|&v| deg[v] < t).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for u in g.neighbors(v) {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] < t {
                    queue.push(u);
                }
            }
        }
    }
    let verts: Vec<usize> = (0..g.n()).filter(|&v| alive[v]).collect();
    let (graph, orig_ids) = g.induced(&verts);
    Subgraph { graph, orig_ids }
}

/// Extracts a subgraph with average degree at least `k + slack` and minimum
/// degree at least `(k + slack)/2` by peeling below `ceil((k+slack)/2)`.
/// The peel maintains the average-degree floor at every step; that running
/// bound is asserted.
pub fn extract_denser_subgraph(g: &Graph, k: usize, slack: usize) -> Result<Subgraph, GraphError> {
    let need = Rational64::from_integer((k + slack) as i64);
    let (_, _, avg) = degree_stats(g)?;
    if avg < need {
        return Err(GraphError::AverageDegreeTooLow { got: avg, need });
    }
    let threshold = (k + slack).div_ceil(2);
    let mut alive = vec![true; g.n()];
    let mut deg: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
    let mut live_n = g.n() as i64;
    let mut live_2m = 2 * g.edge_count() as i64;
    let mut queue: Vec<usize> = (0..g.n()).filter(|&v| deg[v] < threshold).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        live_2m -= 2 * deg[v] as i64;
        live_n -= 1;
        assert!(
            live_n > 0 && Rational64::new(live_2m, live_n) >= need,
            "average degree dropped below k + slack during peeling"
        );
        for u in g.neighbors(v) {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] < threshold {
                    queue.push(u);
                }
            }
        }
    }
    let verts: Vec<usize> = (0..g.n()).filter(|&v| alive[v]).collect();
    let (graph, orig_ids) = g.induced(&verts);
    Ok(Subgraph { graph, orig_ids })
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

pub fn complete(n: usize) -> Graph {
    let mut b = GraphBuilder::new(n);
    for u in 0..n {
        for v in u + 1..n {
            b.add_edge(u, v).unwrap();
        }
    }
    b.build()
}

pub fn complete_bipartite(a: usize, b: usize) -> Graph {
    let mut gb = GraphBuilder::new(a + b);
    for u in 0..a {
        for v in a..a + b {
            gb.add_edge(u, v).unwrap();
        }
    }
    gb.build()
}

pub fn path(n: usize) -> Graph {
    let mut b = GraphBuilder::new(n);
    for v in 1..n {
        b.add_edge(v - 1, v).unwrap();
    }
    b.build()
}

pub fn random_gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rng::seeded(seed);
    let mut b = GraphBuilder::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng::coin(&mut rng, p) {
                b.add_edge(u, v).unwrap();
            }
        }
    }
    b.build()
}

/// Random bipartite graph with sides `0..a` and `a..a+b`.
pub fn random_bipartite(a: usize, b: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rng::seeded(seed);
    let mut gb = GraphBuilder::new(a + b);
    for u in 0..a {
        for v in a..a + b {
            if rng::coin(&mut rng, p) {
                gb.add_edge(u, v).unwrap();
            }
        }
    }
    gb.build()
}

// ---------------------------------------------------------------------------
// Plain-text adjacency ingestion: whitespace-separated edge pairs.
// ---------------------------------------------------------------------------

pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let ids: Vec<usize> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| GraphError::BadVertexPair(format!("bad token {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if ids.len() % 2 != 0 {
        return Err(GraphError::BadVertexPair("odd number of endpoints".into()));
    }
    let n = ids.iter().copied().max().map_or(0, |m| m + 1);
    let edges: Vec<(usize, usize)> = ids.chunks(2).map(|c| (c[0], c[1])).collect();
    Graph::from_edges(n, &edges)
}
