//! Extremal host/tree constructions with arithmetic certificates: the
//! two-clique broom pair, the skewed complete-bipartite counterexample, and
//! the √k tightness host. Every claimed inequality is evaluated in exact
//! rationals from the *built* objects, never from the input parameters.

use crate::graph::{Graph, GraphBuilder};
use crate::tree::Tree;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("{0}")]
    Divisibility(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("no star-size mix reaches the required leaf total")]
    NoStarMix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HostKind {
    TwoCliques,
    CompleteBipartite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Ge,
    Gt,
    Lt,
    Le,
    Eq,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub lhs: String,
    pub relation: Relation,
    pub rhs: String,
    pub pass: bool,
}

fn cert(name: &str, lhs: BigRational, relation: Relation, rhs: BigRational) -> Certificate {
    let pass = match relation {
        Relation::Ge => lhs >= rhs,
        Relation::Gt => lhs > rhs,
        Relation::Lt => lhs < rhs,
        Relation::Le => lhs <= rhs,
        Relation::Eq => lhs == rhs,
    };
    Certificate {
        name: name.to_string(),
        lhs: crate::schedule::rat_str(&lhs),
        relation,
        rhs: crate::schedule::rat_str(&rhs),
        pass,
    }
}

fn br(x: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

#[derive(Clone, Debug)]
pub struct ConstructionReport {
    pub host: Graph,
    pub tree: Tree,
    pub certificates: Vec<Certificate>,
}

impl ConstructionReport {
    pub fn all_pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }
}

/// Spider with `arms` star centres of `leaves` leaves each, plus hosts:
/// a cut vertex complete to two K_{k/2}, or to K_{k/2,k/2}. The tree needs
/// k divisible by 6 so that k/3 and k/2 are integers.
pub fn broom_pair(k: usize, host_kind: HostKind) -> Result<ConstructionReport, ConstructionError> {
    if k == 0 || k % 6 != 0 {
        return Err(ConstructionError::Divisibility(format!(
            "k = {k} must be a positive multiple of 6 (needs k/3 and k/2 integral)"
        )));
    }
    let tree = crate::tree::broom_tree(3, k / 3 - 1);
    debug_assert_eq!(tree.n(), k + 1);
    let half = k / 2;
    let mut b = GraphBuilder::new(k + 1);
    match host_kind {
        HostKind::TwoCliques => {
            for c in 0..2 {
                let lo = 1 + c * half;
                for u in lo..lo + half {
                    b.add_edge(0, u).unwrap();
                    for v in u + 1..lo + half {
                        b.add_edge(u, v).unwrap();
                    }
                }
            }
        }
        HostKind::CompleteBipartite => {
            for u in 1..=half {
                b.add_edge(0, u).unwrap();
                for v in half + 1..=k {
                    b.add_edge(u, v).unwrap();
                }
            }
            for v in half + 1..=k {
                b.add_edge(0, v).unwrap();
            }
        }
    }
    let host = b.build();
    // Certificates recomputed from the built host.
    let max_deg = (0..host.n()).map(|v| host.degree(v)).max().unwrap();
    let min_deg = (0..host.n()).map(|v| host.degree(v)).min().unwrap();
    let certificates = vec![
        cert("host order = k + 1", br(host.n()), Relation::Eq, br(k + 1)),
        cert("tree order = k + 1", br(tree.n()), Relation::Eq, br(k + 1)),
        cert("Δ(host) >= k", br(max_deg), Relation::Ge, br(k)),
        cert("δ(host) >= k/2", br(min_deg), Relation::Ge, br(k) / br(2)),
    ];
    Ok(ConstructionReport {
        host,
        tree,
        certificates,
    })
}

/// The skew counterexample: two complete bipartite blocks with classes of
/// sizes rk + ηn and k/2 + ηn plus ηn extra vertices complete to both
/// larger classes; the tree is a hub complete to rk star centres. Every
/// size expression must come out integral, otherwise the construction is
/// refused (callers may pre-round the inputs).
pub fn skew_counterexample(
    r: &BigRational,
    eta: &BigRational,
    n: usize,
) -> Result<ConstructionReport, ConstructionError> {
    if !r.is_positive() || *r >= BigRational::new(BigInt::from(1), BigInt::from(3)) {
        return Err(ConstructionError::OutOfRange(format!(
            "r = {} not in (0, 1/3)",
            crate::schedule::rat_str(r)
        )));
    }
    if !eta.is_positive() || *eta >= BigRational::one() {
        return Err(ConstructionError::OutOfRange("eta not in (0,1)".into()));
    }
    let n_r = br(n);
    // k = (1 - 5 eta) n / (1 + 2 r)
    let k_r = (BigRational::one() - br(5) * eta) * &n_r / (BigRational::one() + br(2) * r);
    let as_usize = |x: &BigRational, what: &str| -> Result<usize, ConstructionError> {
        if !x.is_integer() || !x.is_positive() {
            return Err(ConstructionError::Divisibility(format!(
                "{what} = {} is not a positive integer; no rounding rule is applied",
                crate::schedule::rat_str(x)
            )));
        }
        x.to_integer()
            .to_usize()
            .ok_or_else(|| ConstructionError::OutOfRange(format!("{what} too large")))
    };
    let k = as_usize(&k_r, "k")?;
    let eta_n = as_usize(&(eta * &n_r), "eta n")?;
    let small = as_usize(&(r * &k_r + eta * &n_r), "rk + eta n")?;
    let big = as_usize(&(&k_r / br(2) + eta * &n_r), "k/2 + eta n")?;
    debug_assert_eq!(2 * small + 2 * big + eta_n, n);

    // Host: blocks [0, small), [small, small+big) and the mirrored pair,
    // plus eta_n extras complete to both big classes.
    let mut b = GraphBuilder::new(n);
    let block = |i: usize| -> (usize, usize) {
        let base = i * (small + big);
        (base, base + small)
    };
    for i in 0..2 {
        let (s0, b0) = block(i);
        for u in s0..b0 {
            for v in b0..b0 + big {
                b.add_edge(u, v).unwrap();
            }
        }
    }
    let extras = 2 * (small + big);
    for e in extras..extras + eta_n {
        for i in 0..2 {
            let (_, b0) = block(i);
            for v in b0..b0 + big {
                b.add_edge(e, v).unwrap();
            }
        }
    }
    let host = b.build();

    // Tree: hub complete to rk star centres; leaves split as evenly as
    // possible so the order is exactly k.
    let stars = as_usize(&(r * &k_r), "rk")?;
    let leaves_total = k - 1 - stars;
    let q = leaves_total / stars;
    let extra = leaves_total - q * stars; // `extra` stars get q+1 leaves
    if q == 0 {
        return Err(ConstructionError::NoStarMix);
    }
    let mut parent: Vec<Option<u32>> = vec![None; k];
    let mut next = 1usize;
    for s in 0..stars {
        let centre = next;
        parent[centre] = Some(0);
        next += 1;
        let cnt = if s < extra { q + 1 } else { q };
        for _ in 0..cnt {
            parent[next] = Some(centre as u32);
            next += 1;
        }
    }
    debug_assert_eq!(next, k);
    let tree = Tree::from_parents(parent).unwrap();

    // Certificates, all from the built objects.
    let min_deg = (0..host.n()).map(|v| host.degree(v)).min().unwrap();
    let high = (0..host.n())
        .filter(|&v| br(host.degree(v)) >= k_r.clone() + eta * &n_r)
        .count();
    let (v1, v2) = tree.class_sizes();
    let smaller_class = v1.min(v2);
    let ceil_inv_r = r.recip().ceil();
    // ceil as a rational with denominator 1
    let certificates = vec![
        cert("host order = n", br(host.n()), Relation::Eq, br(n)),
        cert("tree order = k", br(tree.n()), Relation::Eq, k_r.clone()),
        cert(
            "δ(host) >= rk + eta n",
            br(min_deg),
            Relation::Ge,
            r * &k_r + eta * &n_r,
        ),
        cert(
            "at least eta n vertices of degree >= k + eta n",
            br(high),
            Relation::Ge,
            eta * &n_r,
        ),
        cert(
            "smaller tree class = rk",
            br(smaller_class),
            Relation::Eq,
            r * &k_r,
        ),
        cert(
            "2rk + 3 eta n < (1-r)k",
            br(2) * r * &k_r + br(3) * eta * &n_r,
            Relation::Lt,
            (BigRational::one() - r) * &k_r,
        ),
        cert(
            "(1-r)k - 1 - eta n ceil(1/r) > k/2 + eta n",
            (BigRational::one() - r) * &k_r
                - BigRational::one()
                - eta * &n_r * ceil_inv_r.clone(),
            Relation::Gt,
            &k_r / br(2) + eta * &n_r,
        ),
    ];
    Ok(ConstructionReport {
        host,
        tree,
        certificates,
    })
}

fn integer_sqrt(k: usize) -> Option<usize> {
    let s = (k as f64).sqrt().round() as usize;
    for c in s.saturating_sub(1)..=s + 1 {
        if c * c == k {
            return Some(c);
        }
    }
    None
}

/// The √k tightness construction: two cliques of orders (k-1)/2 and
/// (k+1)/2 plus an independent set of (√k - 1)/2 vertices complete to both;
/// the tree is a hub joined to √k star centres, each star on √k vertices.
/// k must be an odd perfect square above 1.
pub fn sqrt_tightness(k: usize) -> Result<ConstructionReport, ConstructionError> {
    let Some(s) = integer_sqrt(k) else {
        return Err(ConstructionError::Divisibility(format!(
            "k = {k} is not a perfect square"
        )));
    };
    if k % 2 == 0 || k <= 1 {
        return Err(ConstructionError::Divisibility(format!(
            "k = {k} must be an odd square above 1"
        )));
    }
    let c1 = (k - 1) / 2;
    let c2 = (k + 1) / 2;
    let ind = (s - 1) / 2;
    let n = c1 + c2 + ind;
    let mut b = GraphBuilder::new(n);
    for (lo, hi) in [(0, c1), (c1, c1 + c2)] {
        for u in lo..hi {
            for v in u + 1..hi {
                b.add_edge(u, v).unwrap();
            }
        }
    }
    for e in c1 + c2..n {
        for v in 0..c1 + c2 {
            b.add_edge(e, v).unwrap();
        }
    }
    let host = b.build();
    // Tree: hub + s stars on s vertices each (centre + s-1 leaves).
    let tree = crate::tree::broom_tree(s, s - 1);
    debug_assert_eq!(tree.n(), 1 + s * s);

    let high_fraction = BigRational::new(BigInt::from(ind), BigInt::from(n));
    // 1/(2 sqrt(k)) = 1/(2s) exactly for square k.
    let bound = BigRational::new(BigInt::one(), BigInt::from(2 * s));
    // Vertex-budget arguments for the two centre placements:
    // (a) centre in the independent set forces 1 + s(s+1)/2 vertices into a
    //     part with (k+1)/2 + (sqrt k - 1)/2 slots;
    // (b) centre in a clique strands sqrt(k) - 1 host vertices, leaving
    //     fewer than k+1 usable.
    let lhs_a = br(1) + br((s + 1) / 2 * s);
    let rhs_a = br(c2 + ind);
    let usable_b = br(n) - (br(s) - br(1));
    let certificates = vec![
        cert(
            "host order = k + (sqrt k - 1)/2",
            br(host.n()),
            Relation::Eq,
            br(k + ind),
        ),
        cert("tree order = k + 1", br(tree.n()), Relation::Eq, br(k + 1)),
        cert(
            "high-degree fraction < 1/(2 sqrt k)",
            high_fraction,
            Relation::Lt,
            bound,
        ),
        cert(
            "independent-set placement overflows: 1 + s(s+1)/2 > (k+1)/2 + (s-1)/2",
            lhs_a,
            Relation::Gt,
            rhs_a,
        ),
        cert(
            "clique placement strands vertices: n - (sqrt k - 1) < k + 1",
            usable_b,
            Relation::Lt,
            br(k + 1),
        ),
    ];
    Ok(ConstructionReport {
        host,
        tree,
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::rat;

    #[test]
    fn broom_examples() {
        for kind in [HostKind::TwoCliques, HostKind::CompleteBipartite] {
            let rep = broom_pair(12, kind).unwrap();
            assert_eq!(rep.host.n(), 13);
            assert_eq!(rep.tree.n(), 13);
            assert_eq!(rep.tree.degree(0), 3);
            assert!(rep.all_pass(), "{:?}", rep.certificates);
        }
        let rep = broom_pair(6, HostKind::TwoCliques).unwrap();
        assert_eq!(rep.host.n(), 7);
        assert_eq!(rep.tree.n(), 7);
        assert!(rep.all_pass());
        assert!(matches!(
            broom_pair(7, HostKind::TwoCliques),
            Err(ConstructionError::Divisibility(_))
        ));
    }

    #[test]
    fn broom_host_degrees() {
        let rep = broom_pair(12, HostKind::TwoCliques).unwrap();
        assert_eq!(rep.host.degree(0), 12);
        let rep = broom_pair(12, HostKind::CompleteBipartite).unwrap();
        assert_eq!(rep.host.degree(0), 12);
        // bipartite side vertices keep degree k/2 + 1 >= k/2
        assert_eq!(rep.host.degree(1), 7);
    }

    #[test]
    fn skew_counterexample_acceptance_point() {
        // r = 1/4, eta = 1/100, n = 30000: every size integral and every
        // quoted inequality passes in exact rationals.
        let rep = skew_counterexample(&rat(1, 4), &rat(1, 100), 30_000).unwrap();
        assert_eq!(rep.host.n(), 30_000);
        assert_eq!(rep.tree.n(), 19_000);
        assert!(rep.all_pass(), "{:#?}", rep.certificates);
        let (v1, v2) = rep.tree.class_sizes();
        assert_eq!(v1.min(v2), 4750);
    }

    #[test]
    fn skew_rejects_bad_parameters() {
        assert!(matches!(
            skew_counterexample(&rat(1, 3), &rat(1, 100), 30_000),
            Err(ConstructionError::OutOfRange(_))
        ));
        assert!(matches!(
            skew_counterexample(&rat(2, 5), &rat(1, 100), 30_000),
            Err(ConstructionError::OutOfRange(_))
        ));
        // Non-integral sizes refuse rather than round.
        assert!(matches!(
            skew_counterexample(&rat(1, 4), &rat(1, 100), 29_999),
            Err(ConstructionError::Divisibility(_))
        ));
    }

    #[test]
    fn skew_certificates_fail_for_large_eta() {
        // eta = 1/10 at r = 3/10 breaks the counting inequalities; the
        // report keeps the failing certificate visible. Pick n so every
        // size stays integral: k = (1-5/10)n/(1+3/5) = 5n/16, need n
        // divisible by 160 for rk = 3k/10 etc.
        let rep = skew_counterexample(&rat(3, 10), &rat(1, 10), 1600).unwrap();
        assert!(!rep.all_pass());
        let failing: Vec<&Certificate> =
            rep.certificates.iter().filter(|c| !c.pass).collect();
        assert!(
            failing.iter().any(|c| c.name.contains('<') || c.name.contains('>')),
            "{failing:?}"
        );
    }

    #[test]
    fn sqrt_tightness_k9_and_k25() {
        let rep = sqrt_tightness(9).unwrap();
        assert_eq!(rep.host.n(), 10);
        assert_eq!(rep.tree.n(), 10);
        assert!(rep.all_pass(), "{:#?}", rep.certificates);

        let rep = sqrt_tightness(25).unwrap();
        // cliques 12 and 13, independent set of 2; fraction 2/27 < 1/10
        assert_eq!(rep.host.n(), 27);
        let frac = rep
            .certificates
            .iter()
            .find(|c| c.name.contains("fraction"))
            .unwrap();
        assert_eq!(frac.lhs, "2/27");
        assert!(rep.all_pass());

        assert!(sqrt_tightness(16).is_err());
        assert!(sqrt_tightness(10).is_err());
    }
}
