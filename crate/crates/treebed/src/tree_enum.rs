//! Unlabelled tree counting and exhaustive enumeration.
//!
//! Rooted trees are counted by the Euler-transform recurrence and free trees
//! by Otter's dissimilarity formula, both in exact big integers. Enumeration
//! generates canonical level sequences of rooted trees by successor stepping
//! and keeps exactly one centroid-rooted representative per free
//! isomorphism class.

use crate::tree::Tree;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumError {
    #[error("n = {0} exceeds the enumeration cap {1}")]
    AboveCap(usize, usize),
    #[error("n must be at least 1")]
    ZeroVertices,
}

pub const DEFAULT_ENUM_CAP: usize = 18;

/// Counts of unlabelled rooted (`rooted[n]`) and free (`free[n]`) trees,
/// 1-indexed; index 0 is unused and zero.
#[derive(Clone, Debug)]
pub struct TreeCounts {
    pub rooted: Vec<BigUint>,
    pub free: Vec<BigUint>,
}

/// Rooted counts r_n via the Euler-transform recurrence
/// `n * r_{n+1} = sum_{k=1..n} (sum_{d|k} d*r_d) * r_{n+1-k}`,
/// free counts s_n via Otter's formula
/// `s_n = r_n - (sum_{i+j=n} r_i r_j - [n even] r_{n/2}) / 2`.
pub fn otter_counts(max: usize) -> TreeCounts {
    assert!(max >= 1);
    let mut r = vec![BigUint::zero(); max + 1];
    r[1] = BigUint::one();
    // c[k] = sum_{d|k} d * r_d, filled incrementally.
    let mut c = vec![BigUint::zero(); max + 1];
    for n in 1..max {
        // r[n] is final here; fold d = n into all multiples.
        let dn = BigUint::from(n) * &r[n];
        let mut k = n;
        while k <= max {
            c[k] += &dn;
            k += n;
        }
        let mut acc = BigUint::zero();
        for k in 1..=n {
            acc += &c[k] * &r[n + 1 - k];
        }
        r[n + 1] = acc / BigUint::from(n);
    }
    let mut s = vec![BigUint::zero(); max + 1];
    for n in 1..=max {
        let mut cross = BigUint::zero();
        for i in 1..n {
            cross += &r[i] * &r[n - i];
        }
        let mut twice = BigUint::from(2u32) * &r[n];
        // 2*s_n = 2*r_n - cross + [n even] r_{n/2}; division is exact.
        if n % 2 == 0 {
            twice += &r[n / 2];
        }
        twice -= cross;
        debug_assert!((&twice % 2u32).is_zero());
        s[n] = twice / BigUint::from(2u32);
    }
    TreeCounts { rooted: r, free: s }
}

// ---------------------------------------------------------------------------
// Level sequences
// ---------------------------------------------------------------------------

/// Parent array (0-based ids in sequence order) from a level sequence with
/// root level 1.
pub fn levels_to_parents(levels: &[u8]) -> Vec<Option<u32>> {
    let mut parent = vec![None; levels.len()];
    let mut last_at_level = vec![0u32; levels.len() + 2];
    for (i, &l) in levels.iter().enumerate() {
        if i > 0 {
            parent[i] = Some(last_at_level[l as usize - 1]);
        }
        last_at_level[l as usize] = i as u32;
    }
    parent
}

/// Canonical level sequence of the tree rooted at `root`: children blocks
/// ordered lexicographically non-increasing, recursively.
pub fn canonical_levels(n: usize, adj: &[Vec<u32>], root: usize) -> Vec<u8> {
    fn code(v: usize, p: usize, depth: u8, adj: &[Vec<u32>]) -> Vec<u8> {
        let mut child_codes: Vec<Vec<u8>> = adj[v]
            .iter()
            .filter(|&&u| u as usize != p)
            .map(|&u| code(u as usize, v, depth + 1, adj))
            .collect();
        child_codes.sort_by(|a, b| b.cmp(a));
        let mut out = Vec::with_capacity(1 + child_codes.iter().map(Vec::len).sum::<usize>());
        out.push(depth);
        for c in child_codes {
            out.extend_from_slice(&c);
        }
        out
    }
    debug_assert!(root < n);
    code(root, usize::MAX, 1, adj)
}

fn adjacency_of_parents(parent: &[Option<u32>]) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); parent.len()];
    for (v, p) in parent.iter().enumerate() {
        if let Some(&p) = p.as_ref() {
            adj[p as usize].push(v as u32);
            adj[v].push(p);
        }
    }
    adj
}

/// Canonical code of the free isomorphism class: canonical level sequence of
/// the centroid rooting, taking the lexicographically smaller sequence when
/// there are two centroids.
pub fn free_canonical_code(t: &Tree) -> Vec<u8> {
    let parent: Vec<Option<u32>> = (0..t.n()).map(|v| t.parent(v).map(|p| p as u32)).collect();
    let adj = adjacency_of_parents(&parent);
    t.centroids()
        .into_iter()
        .map(|c| canonical_levels(t.n(), &adj, c))
        .min()
        .unwrap()
}

/// Iterator over all canonical rooted level sequences on `n` vertices
/// (Beyer-Hedetniemi successor stepping, starting from the path).
struct RootedLevelSeqs {
    levels: Vec<u8>,
    started: bool,
    done: bool,
}

impl RootedLevelSeqs {
    fn new(n: usize) -> Self {
        RootedLevelSeqs {
            levels: (1..=n as u8).collect(),
            started: false,
            done: n == 0,
        }
    }
}

impl Iterator for RootedLevelSeqs {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.levels.clone());
        }
        // Successor: rightmost level > 2 drops by one and the block from its
        // parent onward repeats cyclically.
        let p = match self.levels.iter().rposition(|&l| l > 2) {
            None => {
                self.done = true;
                return None;
            }
            Some(p) => p,
        };
        let lp = self.levels[p];
        let q = (0..p).rfind(|&i| self.levels[i] == lp - 1).unwrap();
        let period = p - q;
        for i in p..self.levels.len() {
            self.levels[i] = self.levels[i - period];
        }
        Some(self.levels.clone())
    }
}

/// One representative per isomorphism class of free trees on `n` vertices.
pub struct FreeTrees {
    seqs: RootedLevelSeqs,
    n: usize,
}

impl Iterator for FreeTrees {
    type Item = Tree;

    fn next(&mut self) -> Option<Tree> {
        loop {
            let levels = self.seqs.next()?;
            let parents = levels_to_parents(&levels);
            let t = Tree::from_parents(parents).expect("level sequence is a tree");
            if self.n == 1 {
                return Some(t);
            }
            // Emit only when this rooted sequence is the canonical rooting of
            // its free class.
            let cents = t.centroids();
            if !cents.contains(&0) {
                continue;
            }
            let adj = adjacency_of_parents(
                &(0..t.n())
                    .map(|v| t.parent(v).map(|p| p as u32))
                    .collect::<Vec<_>>(),
            );
            let min_code = cents
                .iter()
                .map(|&c| canonical_levels(self.n, &adj, c))
                .min()
                .unwrap();
            if min_code == levels {
                return Some(t);
            }
        }
    }
}

/// Streams exactly one tree per free isomorphism class on `n` vertices.
pub fn enumerate_free_trees(n: usize, cap: usize) -> Result<FreeTrees, EnumError> {
    if n == 0 {
        return Err(EnumError::ZeroVertices);
    }
    if n > cap {
        return Err(EnumError::AboveCap(n, cap));
    }
    Ok(FreeTrees {
        seqs: RootedLevelSeqs::new(n),
        n,
    })
}

pub fn free_trees_vec(n: usize) -> Vec<Tree> {
    enumerate_free_trees(n, DEFAULT_ENUM_CAP)
        .expect("within cap")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn otter_small_values() {
        let c = otter_counts(13);
        let rooted: Vec<u64> = (1..=10).map(|i| (&c.rooted[i]).try_into().unwrap()).collect();
        assert_eq!(rooted, vec![1, 1, 2, 4, 9, 20, 48, 115, 286, 719]);
        let free: Vec<u64> = (1..=13).map(|i| (&c.free[i]).try_into().unwrap()).collect();
        assert_eq!(free, vec![1, 1, 1, 2, 3, 6, 11, 23, 47, 106, 235, 551, 1301]);
    }

    #[test]
    fn rooted_enumeration_matches_counts() {
        // The level-sequence generator is an independent check of r_n.
        for n in 1..=9 {
            let got = RootedLevelSeqs::new(n).count() as u64;
            let want: u64 = (&otter_counts(n).rooted[n]).try_into().unwrap();
            assert_eq!(got, want, "n = {n}");
        }
    }

    #[test]
    fn free_enumeration_matches_counts() {
        for n in 1..=13 {
            let got = free_trees_vec(n).len() as u64;
            let want: u64 = (&otter_counts(n).free[n]).try_into().unwrap();
            assert_eq!(got, want, "n = {n}");
        }
    }

    #[test]
    fn free_trees_small_cases() {
        assert_eq!(free_trees_vec(1).len(), 1);
        assert_eq!(free_trees_vec(4).len(), 2); // path and star
        assert_eq!(free_trees_vec(7).len(), 11);
        assert!(enumerate_free_trees(25, DEFAULT_ENUM_CAP).is_err());
        assert!(enumerate_free_trees(0, DEFAULT_ENUM_CAP).is_err());
    }

    #[test]
    fn no_two_isomorphic_representatives() {
        for n in 1..=10 {
            let mut seen = HashSet::new();
            for t in free_trees_vec(n) {
                assert!(seen.insert(free_canonical_code(&t)), "dup at n = {n}");
            }
        }
    }

    #[test]
    fn balanced_class_count_bounded_by_rooted_square() {
        // Balanced trees on k+1 vertices number at most r_{k/2+1}^2.
        let counts = otter_counts(9);
        for k in [4usize, 6, 8, 10, 12, 14, 16] {
            let balanced = free_trees_vec(k + 1)
                .iter()
                .filter(|t| t.is_balanced().unwrap())
                .count();
            let half = &counts.rooted[k / 2 + 1];
            let bound = half * half;
            assert!(
                BigUint::from(balanced) <= bound,
                "k = {k}: {balanced} > {bound}"
            );
        }
    }

    #[test]
    fn canonical_levels_fixed_point_of_generator() {
        // Generated sequences are already in canonical child order.
        for n in 1..=8 {
            for levels in RootedLevelSeqs::new(n) {
                let parents = levels_to_parents(&levels);
                let adj = adjacency_of_parents(&parents);
                assert_eq!(canonical_levels(n, &adj, 0), levels);
            }
        }
    }
}
