//! Random tree generation: uniform labelled trees via Prüfer sequences, a
//! bounded-degree repair variant, and exactly uniform unlabelled free trees
//! via the count-weighted recursive decomposition of rooted trees, with the
//! root conditioned to sit at the centroid.

use crate::rng::{self, Rng};
use crate::tree::{Tree, TreeError};
use crate::tree_enum::{canonical_levels, otter_counts};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng as _;
use rand::RngCore;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Uniform labelled tree on `n` vertices (Prüfer decode), rooted at 0.
pub fn sample_labelled_tree(n: usize, seed: u64) -> Tree {
    let mut rng = rng::seeded(seed);
    sample_labelled_with(&mut rng, n)
}

fn sample_labelled_with(rng: &mut Rng, n: usize) -> Tree {
    if n == 1 {
        return Tree::from_parents(vec![None]).unwrap();
    }
    let seq: Vec<usize> = (0..n.saturating_sub(2))
        .map(|_| rng.random_range(0..n))
        .collect();
    prufer_decode(n, &seq)
}

fn prufer_decode(n: usize, seq: &[usize]) -> Tree {
    debug_assert_eq!(seq.len(), n - 2);
    let mut degree = vec![1u32; n];
    for &a in seq {
        degree[a] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(Reverse)
        .collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &a in seq {
        let Reverse(leaf) = leaves.pop().unwrap();
        edges.push((leaf, a));
        degree[a] -= 1;
        if degree[a] == 1 {
            leaves.push(Reverse(a));
        }
    }
    let Reverse(u) = leaves.pop().unwrap();
    let Reverse(v) = leaves.pop().unwrap();
    edges.push((u, v));
    Tree::from_edges(n, &edges, 0).unwrap()
}

/// Random tree with maximum degree at most `dmax`. A uniform Prüfer sequence
/// is drawn first; labels over capacity are reassigned deterministically to
/// the lowest labels with capacity to spare. Exact degree bound, not a
/// uniform distribution over bounded-degree trees.
pub fn bounded_degree_tree(n: usize, dmax: usize, seed: u64) -> Result<Tree, TreeError> {
    if n == 1 {
        return Tree::from_parents(vec![None]);
    }
    if n == 2 {
        if dmax < 1 {
            return Err(TreeError::Infeasible("two vertices need degree 1".into()));
        }
        return Tree::from_parents(vec![None, Some(0)]);
    }
    if dmax < 2 {
        return Err(TreeError::Infeasible(format!(
            "dmax = {dmax} cannot host {n} vertices"
        )));
    }
    let mut rng = rng::seeded(seed);
    let cap = dmax - 1;
    let mut seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut used = vec![0usize; n];
    let mut spare_cursor = 0usize;
    for i in 0..seq.len() {
        if used[seq[i]] == cap {
            while used[spare_cursor] >= cap {
                spare_cursor += 1;
            }
            seq[i] = spare_cursor;
        }
        used[seq[i]] += 1;
    }
    let t = prufer_decode(n, &seq);
    debug_assert!(t.max_degree() <= dmax);
    Ok(t)
}

// ---------------------------------------------------------------------------
// Uniform unlabelled free trees
// ---------------------------------------------------------------------------

/// Sampling tables for one value of `n`: rooted-tree weights and the capped
/// variant counting trees whose root subtrees stay at or below `cap`, which
/// makes the root the centroid.
pub struct UnlabelledSampler {
    n: usize,
    cap: usize,
    plain: Vec<PairTable>,
    capped: Vec<PairTable>,
    /// Number of free trees with a single centroid (= capped count at n).
    centroidal: BigUint,
    /// Number of two-centroid free trees, zero for odd n.
    bicentroidal: BigUint,
}

struct PairTable {
    /// `(d, j, cumulative weight)` in (d, j) order.
    entries: Vec<(u32, u32, BigUint)>,
    total: BigUint,
}

impl PairTable {
    fn build(m: usize, cap: usize, r: &[BigUint], target: &[BigUint]) -> PairTable {
        let mut entries = Vec::new();
        let mut acc = BigUint::zero();
        for d in 1..=cap.min(m.saturating_sub(1)) {
            let mut j = 1usize;
            while j * d <= m - 1 {
                let w = BigUint::from(d) * &r[d] * &target[m - j * d];
                if !w.is_zero() {
                    acc += w;
                    entries.push((d as u32, j as u32, acc.clone()));
                }
                j += 1;
            }
        }
        PairTable {
            entries,
            total: acc,
        }
    }

    fn pick(&self, u: &BigUint) -> (usize, usize) {
        let idx = self.entries.partition_point(|(_, _, cum)| cum <= u);
        let (d, j, _) = &self.entries[idx];
        (*d as usize, *j as usize)
    }
}

impl UnlabelledSampler {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let counts = otter_counts(n.max(2));
        let r = &counts.rooted;
        let cap = n.div_ceil(2) - if n >= 2 { 1 } else { 0 };

        // Unrestricted rooted-tree tables, validated against the recurrence
        // (m-1) * r_m = total weight.
        let mut plain = Vec::with_capacity(n + 1);
        for m in 0..=n {
            if m < 2 {
                plain.push(PairTable {
                    entries: Vec::new(),
                    total: BigUint::zero(),
                });
                continue;
            }
            let t = PairTable::build(m, m - 1, r, r);
            debug_assert_eq!(t.total, BigUint::from(m - 1) * &r[m]);
            plain.push(t);
        }

        // Capped counts R[m]: root subtrees of size at most `cap`.
        let mut capped_counts = vec![BigUint::zero(); n + 1];
        if n >= 1 {
            capped_counts[1] = BigUint::one();
        }
        let mut capped = Vec::with_capacity(n + 1);
        capped.push(PairTable {
            entries: Vec::new(),
            total: BigUint::zero(),
        });
        if n >= 1 {
            capped.push(PairTable {
                entries: Vec::new(),
                total: BigUint::zero(),
            });
        }
        for m in 2..=n {
            let t = PairTable::build(m, cap, r, &capped_counts);
            capped_counts[m] = &t.total / BigUint::from(m - 1);
            debug_assert_eq!(&t.total % BigUint::from(m - 1), BigUint::zero());
            capped.push(t);
        }

        let centroidal = capped_counts[n].clone();
        let bicentroidal = if n >= 2 && n % 2 == 0 {
            let h = &r[n / 2];
            h * (h + BigUint::one()) / BigUint::from(2u32)
        } else {
            BigUint::zero()
        };
        // Cross-check against Otter's free-tree count.
        if n >= 1 {
            let free = if n == 1 {
                BigUint::one()
            } else {
                &centroidal + &bicentroidal
            };
            assert_eq!(
                free, counts.free[n],
                "centroid decomposition disagrees with Otter counts at n = {n}"
            );
        }
        UnlabelledSampler {
            n,
            cap,
            plain,
            capped,
            centroidal,
            bicentroidal,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Uniform unlabelled rooted tree on `m <= n` vertices, as parents.
    fn sample_rooted_parents(&self, rng: &mut Rng, m: usize) -> Vec<Option<u32>> {
        self.sample_decomposed(rng, m, false)
    }

    fn sample_decomposed(&self, rng: &mut Rng, m: usize, capped: bool) -> Vec<Option<u32>> {
        if m == 1 {
            return vec![None];
        }
        if m == 2 {
            return vec![None, Some(0)];
        }
        let table = if capped {
            &self.capped[m]
        } else {
            &self.plain[m]
        };
        let u = uniform_below(rng, &table.total);
        let (d, j) = table.pick(&u);
        let mut base = self.sample_decomposed(rng, m - j * d, capped);
        let attach = self.sample_rooted_parents(rng, d);
        for _ in 0..j {
            let off = base.len() as u32;
            base.push(Some(0));
            for p in attach.iter().skip(1) {
                base.push(Some(p.unwrap() + off));
            }
        }
        base
    }

    /// Uniform unlabelled rooted tree on `n` vertices.
    pub fn sample_rooted(&self, rng: &mut Rng) -> Tree {
        Tree::from_parents(self.sample_rooted_parents(rng, self.n)).unwrap()
    }

    /// Uniform unlabelled free tree on `n` vertices. Odd orders are a single
    /// centroid-conditioned draw; even orders mix in the two-centroid case as
    /// an unordered pair of rooted halves.
    pub fn sample_free(&self, rng: &mut Rng) -> Tree {
        if self.n <= 2 {
            return Tree::from_parents(if self.n == 1 {
                vec![None]
            } else {
                vec![None, Some(0)]
            })
            .unwrap();
        }
        let total = &self.centroidal + &self.bicentroidal;
        let u = uniform_below(rng, &total);
        if u < self.bicentroidal {
            let h = self.n / 2;
            // Uniform unordered pair of rooted halves, allowing repeats.
            loop {
                let a = self.sample_rooted_parents(rng, h);
                let b = self.sample_rooted_parents(rng, h);
                let same = rooted_code(&a) == rooted_code(&b);
                if same || rng.next_u64() & 1 == 0 {
                    let mut parents = a;
                    let off = parents.len() as u32;
                    parents.push(Some(0));
                    for p in b.iter().skip(1) {
                        parents.push(Some(p.unwrap() + off));
                    }
                    return Tree::from_parents(parents).unwrap();
                }
            }
        }
        let t = Tree::from_parents(self.sample_decomposed(rng, self.n, true)).unwrap();
        debug_assert!(t.components_after_removal(t.root()).iter().all(|&c| c <= self.cap));
        t
    }
}

fn rooted_code(parents: &[Option<u32>]) -> Vec<u8> {
    let mut adj = vec![Vec::new(); parents.len()];
    for (v, p) in parents.iter().enumerate() {
        if let Some(&p) = p.as_ref() {
            adj[p as usize].push(v as u32);
            adj[v].push(p);
        }
    }
    canonical_levels(parents.len(), &adj, 0)
}

/// Uniform BigUint in `[0, bound)` by masked rejection on the top word.
fn uniform_below(rng: &mut Rng, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let words = bits.div_ceil(64) as usize;
    let top_mask = if bits % 64 == 0 {
        u64::MAX
    } else {
        (1u64 << (bits % 64)) - 1
    };
    loop {
        let mut digits = Vec::with_capacity(words);
        for i in 0..words {
            let mut w = rng.next_u64();
            if i + 1 == words {
                w &= top_mask;
            }
            digits.push(w);
        }
        let x = BigUint::from_slice(
            &digits
                .iter()
                .flat_map(|&w| [(w & 0xffff_ffff) as u32, (w >> 32) as u32])
                .collect::<Vec<u32>>(),
        );
        if &x < bound {
            return x;
        }
    }
}

/// Convenience wrapper: builds the tables and draws once.
pub fn sample_unlabelled_tree(n: usize, seed: u64) -> Tree {
    let sampler = UnlabelledSampler::new(n);
    let mut rng = rng::seeded(seed);
    sampler.sample_free(&mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_enum::{free_canonical_code, free_trees_vec};
    use std::collections::HashMap;

    #[test]
    fn labelled_basics() {
        // n = 3 is always the path.
        let t = sample_labelled_tree(3, 5);
        assert_eq!(t.max_degree(), 2);
        // Determinism.
        let a = sample_labelled_tree(8, 123).to_parent_line();
        let b = sample_labelled_tree(8, 123).to_parent_line();
        assert_eq!(a, b);
        // Uniformity sanity: all 16 labelled trees on 4 vertices show up.
        let mut seen = std::collections::HashSet::new();
        for seed in 0..400 {
            let t = sample_labelled_tree(4, seed);
            let mut e: Vec<_> = t.edges().map(|(a, b)| (a.min(b), a.max(b))).collect();
            e.sort();
            seen.insert(e);
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn bounded_degree_variants() {
        let t = bounded_degree_tree(1000, 5, 9).unwrap();
        assert!(t.max_degree() <= 5);
        assert_eq!(t.n(), 1000);
        assert!(bounded_degree_tree(10, 1, 0).is_err());
        let a = bounded_degree_tree(100, 4, 7).unwrap().to_parent_line();
        let b = bounded_degree_tree(100, 4, 7).unwrap().to_parent_line();
        assert_eq!(a, b);
    }

    #[test]
    fn unlabelled_tiny_orders() {
        for seed in 0..5 {
            assert_eq!(sample_unlabelled_tree(1, seed).n(), 1);
            assert_eq!(sample_unlabelled_tree(2, seed).n(), 2);
        }
        let t = sample_unlabelled_tree(7, 11);
        assert_eq!(t.n(), 7);
        // Determinism.
        assert_eq!(
            sample_unlabelled_tree(9, 3).to_parent_line(),
            sample_unlabelled_tree(9, 3).to_parent_line()
        );
    }

    #[test]
    fn rooted_sampler_uniform_at_n5() {
        // 9 rooted classes on 5 vertices; each within 5 sigma of uniform.
        let sampler = UnlabelledSampler::new(5);
        let mut rng = crate::rng::seeded(2024);
        let mut freq: HashMap<Vec<u8>, usize> = HashMap::new();
        let draws = 18_000usize;
        for _ in 0..draws {
            let t = sampler.sample_rooted(&mut rng);
            let parents: Vec<Option<u32>> =
                (0..t.n()).map(|v| t.parent(v).map(|p| p as u32)).collect();
            *freq.entry(rooted_code(&parents)).or_default() += 1;
        }
        assert_eq!(freq.len(), 9);
        let mean = draws as f64 / 9.0;
        let sigma = (draws as f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt();
        for (code, count) in freq {
            assert!(
                (count as f64 - mean).abs() < 5.0 * sigma,
                "class {code:?}: {count}"
            );
        }
    }

    #[test]
    fn free_sampler_uniform_small_orders() {
        // Validated against enumeration for n <= 10 (spot: 6, 7, 8, 10).
        for n in [6usize, 7, 8, 10] {
            let classes = free_trees_vec(n);
            let sampler = UnlabelledSampler::new(n);
            let mut rng = crate::rng::seeded(55 + n as u64);
            let mut freq: HashMap<Vec<u8>, usize> = HashMap::new();
            let draws = 3_000 * classes.len();
            for _ in 0..draws {
                let t = sampler.sample_free(&mut rng);
                *freq.entry(free_canonical_code(&t)).or_default() += 1;
            }
            assert_eq!(freq.len(), classes.len(), "n = {n}");
            let p = 1.0 / classes.len() as f64;
            let mean = draws as f64 * p;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            for (_, count) in freq {
                assert!(
                    (count as f64 - mean).abs() < 5.0 * sigma,
                    "n = {n}: count {count} vs mean {mean:.1}"
                );
            }
        }
    }
}
