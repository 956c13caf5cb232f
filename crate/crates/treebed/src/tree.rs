//! Rooted tree representation with the 2-colouring into classes V1/V2,
//! distances, centroids and the balancedness test.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(usize, usize),
    #[error("parent array does not describe a tree: {0}")]
    NotATree(String),
    #[error("balancedness is defined for odd order, got n = {0}")]
    EvenOrder(usize),
    #[error("cannot build tree: {0}")]
    Infeasible(String),
}

/// Colour class of a tree vertex (proper 2-colouring by depth parity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorClass {
    V1,
    V2,
}

impl ColorClass {
    pub fn other(self) -> ColorClass {
        match self {
            ColorClass::V1 => ColorClass::V2,
            ColorClass::V2 => ColorClass::V1,
        }
    }
}

#[derive(Clone)]
pub struct Tree {
    n: usize,
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl std::fmt::Debug for Tree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tree(n={})", self.n)
    }
}

impl Tree {
    /// Builds from per-vertex optional parents; exactly one root expected.
    pub fn from_parents(parent: Vec<Option<u32>>) -> Result<Self, TreeError> {
        let n = parent.len();
        if n == 0 {
            return Err(TreeError::NotATree("empty vertex set".into()));
        }
        let mut roots = 0usize;
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            match *p {
                None => roots += 1,
                Some(p) => {
                    if p as usize >= n {
                        return Err(TreeError::VertexOutOfRange(p as usize, n));
                    }
                    if p as usize == v {
                        return Err(TreeError::NotATree(format!("vertex {v} is its own parent")));
                    }
                    children[p as usize].push(v as u32);
                }
            }
        }
        if roots != 1 {
            return Err(TreeError::NotATree(format!("{roots} roots")));
        }
        let root = parent.iter().position(|p| p.is_none()).unwrap();
        // Depth computation doubles as the acyclicity/connectivity check.
        let mut depth = vec![u32::MAX; n];
        let mut stack = vec![root];
        depth[root] = 0;
        let mut seen = 1usize;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if depth[c as usize] != u32::MAX {
                    return Err(TreeError::NotATree("cycle detected".into()));
                }
                depth[c as usize] = depth[v] + 1;
                seen += 1;
                stack.push(c as usize);
            }
        }
        if seen != n {
            return Err(TreeError::NotATree("disconnected".into()));
        }
        Ok(Tree {
            n,
            parent,
            children,
            depth,
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)], root: usize) -> Result<Self, TreeError> {
        if root >= n {
            return Err(TreeError::VertexOutOfRange(root, n));
        }
        if edges.len() + 1 != n {
            return Err(TreeError::NotATree(format!(
                "{} edges on {} vertices",
                edges.len(),
                n
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(TreeError::VertexOutOfRange(u.max(v), n));
            }
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        let mut parent = vec![None; n];
        let mut visited = vec![false; n];
        let mut stack = vec![root];
        visited[root] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !visited[u as usize] {
                    visited[u as usize] = true;
                    parent[u as usize] = Some(v as u32);
                    stack.push(u as usize);
                }
            }
        }
        Self::from_parents(parent)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges, the `k` of a tree on `k+1` vertices.
    pub fn k(&self) -> usize {
        self.n - 1
    }

    pub fn root(&self) -> usize {
        self.parent.iter().position(|p| p.is_none()).unwrap()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v].map(|p| p as usize)
    }

    pub fn children(&self, v: usize) -> &[u32] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent(v)
            .into_iter()
            .chain(self.children[v].iter().map(|&c| c as usize))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).filter_map(move |v| self.parent(v).map(|p| (p, v)))
    }

    /// Colour class by depth parity: even depths are V1.
    pub fn class_of(&self, v: usize) -> ColorClass {
        if self.depth[v] % 2 == 0 {
            ColorClass::V1
        } else {
            ColorClass::V2
        }
    }

    /// (|V1|, |V2|).
    pub fn class_sizes(&self) -> (usize, usize) {
        let v1 = (0..self.n)
            .filter(|&v| self.class_of(v) == ColorClass::V1)
            .count();
        (v1, self.n - v1)
    }

    pub fn vertices_in_class(&self, class: ColorClass) -> Vec<usize> {
        (0..self.n).filter(|&v| self.class_of(v) == class).collect()
    }

    pub fn max_degree_in_class(&self, class: ColorClass) -> usize {
        (0..self.n)
            .filter(|&v| self.class_of(v) == class)
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    /// Length of the unique x-y path.
    pub fn distance(&self, x: usize, y: usize) -> Result<usize, TreeError> {
        if x >= self.n || y >= self.n {
            return Err(TreeError::VertexOutOfRange(x.max(y), self.n));
        }
        let (mut a, mut b) = (x, y);
        let mut dist = 0usize;
        while self.depth[a] > self.depth[b] {
            a = self.parent(a).unwrap();
            dist += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent(b).unwrap();
            dist += 1;
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
            dist += 2;
        }
        Ok(dist)
    }

    /// Subtree sizes (vertex itself included) for the current rooting.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.n];
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(self.depth[v]));
        for v in order {
            if let Some(p) = self.parent(v) {
                size[p] += size[v];
            }
        }
        size
    }

    /// Component sizes of `T - v`.
    pub fn components_after_removal(&self, v: usize) -> Vec<usize> {
        let size = self.subtree_sizes();
        let mut comps: Vec<usize> = self.children[v]
            .iter()
            .map(|&c| size[c as usize])
            .collect();
        if self.parent(v).is_some() {
            comps.push(self.n - size[v]);
        }
        comps
    }

    /// All vertices minimizing the maximum component size after removal
    /// (equivalently, those with maximum component size at most n/2).
    /// One or two vertices; unique when n is odd.
    pub fn centroids(&self) -> Vec<usize> {
        let size = self.subtree_sizes();
        let max_comp = |v: usize| -> usize {
            let mut m = self.n - size[v];
            for &c in &self.children[v] {
                m = m.max(size[c as usize]);
            }
            m
        };
        let best = (0..self.n).map(max_comp).min().unwrap();
        let out: Vec<usize> = (0..self.n).filter(|&v| max_comp(v) == best).collect();
        debug_assert!(out.len() == 1 || out.len() == 2);
        out
    }

    /// For odd-order trees: whether the components left by removing the
    /// unique centroid can be split into two halves of (n-1)/2 vertices each.
    /// Exact subset-sum over the component sizes.
    pub fn is_balanced(&self) -> Result<bool, TreeError> {
        if self.n % 2 == 0 {
            return Err(TreeError::EvenOrder(self.n));
        }
        if self.n == 1 {
            return Ok(true);
        }
        let cents = self.centroids();
        debug_assert_eq!(cents.len(), 1, "odd-order tree has a unique centroid");
        let comps = self.components_after_removal(cents[0]);
        let target = (self.n - 1) / 2;
        Ok(subset_sum_exact(&comps, target))
    }

    /// Re-roots the tree at `new_root`, preserving vertex labels.
    pub fn rerooted(&self, new_root: usize) -> Result<Tree, TreeError> {
        let edges: Vec<(usize, usize)> = self.edges().collect();
        Tree::from_edges(self.n, &edges, new_root)
    }

    // -- parent-array text format: "n p(1) p(2) ... p(n-1)" -----------------

    /// Emits the textual parent-array form. Vertex 0 must be the root; trees
    /// rooted elsewhere are re-rooted at 0 first.
    pub fn to_parent_line(&self) -> String {
        let t = if self.root() == 0 {
            self.clone()
        } else {
            self.rerooted(0).unwrap()
        };
        let mut s = t.n.to_string();
        for v in 1..t.n {
            s.push(' ');
            s.push_str(&t.parent(v).unwrap().to_string());
        }
        s
    }

    pub fn from_parent_line(line: &str) -> Result<Self, TreeError> {
        let mut it = line.split_whitespace();
        let n: usize = it
            .next()
            .ok_or_else(|| TreeError::NotATree("empty line".into()))?
            .parse()
            .map_err(|_| TreeError::NotATree("bad vertex count".into()))?;
        let mut parent = vec![None; n];
        for v in 1..n {
            let p: usize = it
                .next()
                .ok_or_else(|| TreeError::NotATree(format!("missing parent of {v}")))?
                .parse()
                .map_err(|_| TreeError::NotATree(format!("bad parent of {v}")))?;
            if p >= n {
                return Err(TreeError::VertexOutOfRange(p, n));
            }
            parent[v] = Some(p as u32);
        }
        if it.next().is_some() {
            return Err(TreeError::NotATree("trailing tokens".into()));
        }
        Self::from_parents(parent)
    }
}

fn subset_sum_exact(sizes: &[usize], target: usize) -> bool {
    let words = target / 64 + 1;
    let mut reach = vec![0u64; words];
    reach[0] = 1;
    for &s in sizes {
        if s > target {
            continue;
        }
        let (wshift, bshift) = (s / 64, s % 64);
        for i in (wshift..words).rev() {
            let mut v = reach[i - wshift] << bshift;
            if bshift > 0 && i > wshift {
                v |= reach[i - wshift - 1] >> (64 - bshift);
            }
            reach[i] |= v;
        }
    }
    reach[target / 64] >> (target % 64) & 1 == 1
}

/// Hub vertex joined to `arms` star centres, each with `leaves` leaves.
/// `broom_tree(3, k/3 - 1)` is the k-edge spider used by the two-clique host.
pub fn broom_tree(arms: usize, leaves: usize) -> Tree {
    let n = 1 + arms * (1 + leaves);
    let mut parent = vec![None; n];
    for a in 0..arms {
        let centre = 1 + a * (1 + leaves);
        parent[centre] = Some(0u32);
        for l in 0..leaves {
            parent[centre + 1 + l] = Some(centre as u32);
        }
    }
    Tree::from_parents(parent).unwrap()
}

pub fn star(n: usize) -> Tree {
    let mut parent = vec![None; n];
    for v in 1..n {
        parent[v] = Some(0);
    }
    Tree::from_parents(parent).unwrap()
}

pub fn path_tree(n: usize) -> Tree {
    let mut parent = vec![None; n];
    for v in 1..n {
        parent[v] = Some(v as u32 - 1);
    }
    Tree::from_parents(parent).unwrap()
}

/// Average degree as an exact rational; handy in tests.
pub fn average_degree(t: &Tree) -> Rational64 {
    Rational64::new(2 * t.k() as i64, t.n() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let p5 = path_tree(5);
        assert_eq!(p5.distance(0, 4).unwrap(), 4);
        assert_eq!(p5.distance(2, 2).unwrap(), 0);
        let s = star(6);
        assert_eq!(s.distance(0, 3).unwrap(), 1);
        assert_eq!(s.distance(2, 3).unwrap(), 2);
        assert!(p5.distance(0, 9).is_err());
        // Parity matches colour classes.
        for x in 0..5 {
            for y in 0..5 {
                let d = p5.distance(x, y).unwrap();
                assert_eq!(d % 2 == 0, p5.class_of(x) == p5.class_of(y));
            }
        }
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(path_tree(5).centroids(), vec![2]);
        assert_eq!(path_tree(4).centroids(), vec![1, 2]);
        // Spider with 3 arms of 4 vertices: hub removal leaves 4,4,4 <= 6.
        let broom = broom_tree(3, 3);
        assert_eq!(broom.n(), 13);
        assert_eq!(broom.centroids(), vec![0]);
        assert_eq!(broom.components_after_removal(0), vec![4, 4, 4]);
    }

    #[test]
    fn balancedness() {
        // Star on 13: twelve singleton components split 6/6.
        assert!(star(13).is_balanced().unwrap());
        // Path on 13: sides of 6.
        assert!(path_tree(13).is_balanced().unwrap());
        // Spider 4,4,4: no subset sums to 6.
        assert!(!broom_tree(3, 3).is_balanced().unwrap());
        // Even order rejected.
        assert_eq!(path_tree(4).is_balanced(), Err(TreeError::EvenOrder(4)));
    }

    #[test]
    fn balancedness_matches_exhaustive_subsets() {
        // Direct oracle: try all 2^c subsets of the component sizes.
        fn oracle(t: &Tree) -> bool {
            let c = t.centroids()[0];
            let comps = t.components_after_removal(c);
            let target = (t.n() - 1) / 2;
            (0..1usize << comps.len()).any(|mask| {
                comps
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &s)| s)
                    .sum::<usize>()
                    == target
            })
        }
        for seed in 0..200u64 {
            let n = 3 + 2 * (seed as usize % 8);
            let t = crate::tree_sample::sample_labelled_tree(n, seed);
            assert_eq!(t.is_balanced().unwrap(), oracle(&t), "seed {seed}");
        }
    }

    #[test]
    fn recolouring_stable_under_rerooting() {
        for seed in 0..30u64 {
            let t = crate::tree_sample::sample_labelled_tree(12, seed);
            let base: Vec<ColorClass> = (0..12).map(|v| t.class_of(v)).collect();
            for r in 0..12 {
                let rr = t.rerooted(r).unwrap();
                let got: Vec<ColorClass> = (0..12).map(|v| rr.class_of(v)).collect();
                let same = base == got;
                let swapped = base
                    .iter()
                    .zip(&got)
                    .all(|(a, b)| *a == b.other());
                assert!(same || swapped, "seed {seed} root {r}");
            }
        }
    }

    #[test]
    fn parent_line_roundtrip() {
        let t = broom_tree(3, 2);
        let line = t.to_parent_line();
        let back = Tree::from_parent_line(&line).unwrap();
        assert_eq!(back.n(), t.n());
        let mut e1: Vec<_> = t.edges().collect();
        let mut e2: Vec<_> = back.edges().collect();
        e1.sort();
        e2.sort();
        assert_eq!(e1, e2);
        assert!(Tree::from_parent_line("3 0").is_err());
        assert!(Tree::from_parent_line("2 5").is_err());
    }

    #[test]
    fn rejects_malformed() {
        assert!(Tree::from_parents(vec![Some(1), Some(0)]).is_err()); // no root
        assert!(Tree::from_parents(vec![None, None]).is_err()); // two roots
        assert!(Tree::from_parents(vec![None, Some(2), Some(1)]).is_err()); // cycle
    }
}
