//! The constant schedule driving the saturation pipeline. Theoretical mode
//! evaluates the proof's constant display exactly in rationals; practical
//! mode takes user overrides, enforces only the inequalities the embedding
//! arguments consume, and records everything else as audited checks.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("inequality violated: {name}: {lhs} > {rhs}")]
    Inequality {
        name: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Theoretical,
    Practical,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleCheck {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

/// Default cap on the regularity-lemma cluster bound M(ε).
pub const M_CAP_DEFAULT: u64 = 4096;

#[derive(Clone, Debug)]
pub struct ConstantSchedule {
    pub mode: Mode,
    pub eta: BigRational,
    pub r: BigRational,
    pub d: BigRational,
    pub eps: BigRational,
    pub beta: BigRational,
    pub gamma: BigRational,
    pub n0: BigRational,
    /// M(ε), capped.
    pub m_eps: u64,
    /// ε used when certifying pair verdicts (practical runs need a
    /// statistically attainable value; theoretical mode uses ε itself).
    pub eps_verdict: BigRational,
    /// Margin used in typicality tests against cluster-sized sets.
    pub eps_typical: BigRational,
    /// Reserve-set fraction: |F_u| = max(⌊ηrd|u|/300⌋, ⌊f·|u|⌋).
    pub reserve_fraction: BigRational,
    /// Gate on every proof inequality (theoretical) or audit them only.
    pub strict: bool,
    pub checks: Vec<ScheduleCheck>,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_str(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Astronomically small theoretical constants underflow to zero.
        if x.is_positive() {
            f64::MIN_POSITIVE
        } else if x.is_negative() {
            -f64::MIN_POSITIVE
        } else {
            0.0
        }
    })
}

/// Parses "0.25", "3", or "1/400000" into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, ScheduleError> {
    let s = s.trim();
    let err = || ScheduleError::Parse(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int = if int.is_empty() { "0" } else { int };
        let neg = int.starts_with('-');
        let int_part: BigInt = int.parse().map_err(|_| err())?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let num: BigInt = frac.parse().map_err(|_| err())?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigRational::new(num, den);
        let whole = BigRational::from_integer(int_part);
        return Ok(if neg { whole - frac_part } else { whole + frac_part });
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(BigRational::from_integer(n))
}

/// M(ε) = 2^⌈1/ε⌉ capped at `cap`. The cap is configuration, not memory.
pub fn m_of_eps(eps: &BigRational, cap: u64) -> u64 {
    let log2_cap = 63 - cap.leading_zeros() as u64;
    // ceil(1/eps) >= log2(cap) iff 1 >= eps * log2_cap is violated etc.
    let inv = eps.recip();
    let ceil_inv = inv.ceil();
    let ceil_int = ceil_inv.to_integer();
    match ceil_int.to_u64() {
        Some(c) if c < log2_cap => 1u64 << c,
        _ => cap,
    }
}

fn pow_rat(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Exact evaluation of the theoretical constant display:
/// d = (ηr)²/1000, ε = (ηrd)²⁰/10¹⁵, β = min(ε/M, ηd/(10⁵ M)),
/// γ = βd/(2000 M), n0 = (2/η)(10/γ).
pub fn derive_constants(
    eta: &BigRational,
    r: &BigRational,
    mode: Mode,
) -> Result<ConstantSchedule, ScheduleError> {
    if !eta.is_positive() || *eta >= BigRational::one() {
        return Err(ScheduleError::OutOfRange(format!(
            "eta = {} not in (0,1)",
            rat_str(eta)
        )));
    }
    if !r.is_positive() {
        return Err(ScheduleError::OutOfRange(format!(
            "r = {} not positive",
            rat_str(r)
        )));
    }
    match mode {
        Mode::Theoretical => Ok(theoretical(eta.clone(), r.clone())),
        Mode::Practical => {
            PracticalParams::default_for(eta.clone(), r.clone()).into_schedule()
        }
    }
}

fn theoretical(eta: BigRational, r: BigRational) -> ConstantSchedule {
    let thousand = BigRational::from_integer(BigInt::from(1000));
    let er = &eta * &r;
    let d = pow_rat(&er, 2) / &thousand;
    let erd = &er * &d;
    let eps = pow_rat(&erd, 20) / BigRational::from_integer(BigInt::from(10u64.pow(15)));
    let m = m_of_eps(&eps, M_CAP_DEFAULT);
    let m_rat = BigRational::from_integer(BigInt::from(m));
    let beta_pair = &eps / &m_rat;
    let beta_alt = &eta * &d / (BigRational::from_integer(BigInt::from(100_000)) * &m_rat);
    let beta = if beta_pair <= beta_alt {
        beta_pair
    } else {
        beta_alt
    };
    let gamma = &beta * &d / (BigRational::from_integer(BigInt::from(2000)) * &m_rat);
    let two = BigRational::from_integer(BigInt::from(2));
    let ten = BigRational::from_integer(BigInt::from(10));
    let n0 = (&two / &eta) * (&ten / &gamma);
    let reserve = &eta * &r * &d / BigRational::from_integer(BigInt::from(300));
    let checks = vec![ScheduleCheck {
        name: "eps <= d^2/100".into(),
        lhs: rat_str(&eps),
        rhs: rat_str(&(pow_rat(&d, 2) / BigRational::from_integer(BigInt::from(100)))),
        pass: eps <= pow_rat(&d, 2) / BigRational::from_integer(BigInt::from(100)),
    }];
    ConstantSchedule {
        mode: Mode::Theoretical,
        eps_verdict: eps.clone(),
        eps_typical: eps.clone(),
        reserve_fraction: reserve,
        strict: true,
        eta,
        r,
        d,
        eps,
        beta,
        gamma,
        n0,
        m_eps: m,
        checks,
    }
}

/// User-facing overrides for practical runs.
#[derive(Clone, Debug)]
pub struct PracticalParams {
    pub eta: BigRational,
    pub r: BigRational,
    pub d: BigRational,
    pub eps: BigRational,
    pub beta: BigRational,
    pub gamma: BigRational,
    pub eps_verdict: BigRational,
    pub eps_typical: BigRational,
    pub reserve_fraction: BigRational,
}

impl PracticalParams {
    /// Defaults tuned for desk-scale hosts (thousands of vertices, ten-ish
    /// clusters): d is the density floor, eps drives the threshold formulas,
    /// the verdict and typicality epsilons are statistically attainable.
    pub fn default_for(eta: BigRational, r: BigRational) -> Self {
        PracticalParams {
            eta,
            r,
            d: rat(1, 10),
            eps: rat(1, 100_000),
            beta: rat(1, 10),
            gamma: rat(1, 20),
            eps_verdict: rat(1, 4),
            eps_typical: rat(3, 50),
            reserve_fraction: rat(9, 50),
        }
    }

    pub fn into_schedule(self) -> Result<ConstantSchedule, ScheduleError> {
        let hundred = BigRational::from_integer(BigInt::from(100));
        let d2_over_100 = pow_rat(&self.d, 2) / &hundred;
        if self.eps > d2_over_100 {
            return Err(ScheduleError::Inequality {
                name: "eps <= d^2/100",
                lhs: rat_str(&self.eps),
                rhs: rat_str(&d2_over_100),
            });
        }
        for (name, v) in [
            ("d", &self.d),
            ("eps", &self.eps),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("eps_verdict", &self.eps_verdict),
            ("eps_typical", &self.eps_typical),
            ("reserve_fraction", &self.reserve_fraction),
        ] {
            if !v.is_positive() {
                return Err(ScheduleError::OutOfRange(format!(
                    "{name} = {} must be positive",
                    rat_str(v)
                )));
            }
        }
        if self.d > BigRational::one() {
            return Err(ScheduleError::OutOfRange("d > 1".into()));
        }
        let m = m_of_eps(&self.eps, M_CAP_DEFAULT);
        let checks = vec![
            ScheduleCheck {
                name: "eps <= d^2/100".into(),
                lhs: rat_str(&self.eps),
                rhs: rat_str(&d2_over_100),
                pass: true,
            },
            ScheduleCheck {
                name: "beta matches pair-embedding derivation (eps/M)".into(),
                lhs: rat_str(&self.beta),
                rhs: rat_str(&(&self.eps / BigRational::from_integer(BigInt::from(m)))),
                pass: self.beta <= &self.eps / BigRational::from_integer(BigInt::from(m)),
            },
            ScheduleCheck {
                name: "gamma matches seed-embedding derivation (beta d / 2000 M)".into(),
                lhs: rat_str(&self.gamma),
                rhs: rat_str(
                    &(&self.beta * &self.d
                        / (BigRational::from_integer(BigInt::from(2000))
                            * BigRational::from_integer(BigInt::from(m)))),
                ),
                pass: self.gamma
                    <= &self.beta * &self.d
                        / (BigRational::from_integer(BigInt::from(2000))
                            * BigRational::from_integer(BigInt::from(m))),
            },
        ];
        let two = BigRational::from_integer(BigInt::from(2));
        let ten = BigRational::from_integer(BigInt::from(10));
        let n0 = (&two / &self.eta) * (&ten / &self.gamma);
        Ok(ConstantSchedule {
            mode: Mode::Practical,
            eta: self.eta,
            r: self.r,
            d: self.d,
            eps: self.eps,
            beta: self.beta,
            gamma: self.gamma,
            n0,
            m_eps: m,
            eps_verdict: self.eps_verdict,
            eps_typical: self.eps_typical,
            reserve_fraction: self.reserve_fraction,
            strict: false,
            checks,
        })
    }
}

impl ConstantSchedule {
    /// ⌊x · scale⌋ as usize, exact.
    pub fn floor_mul(x: &BigRational, scale: usize) -> usize {
        let v = x * BigRational::from_integer(BigInt::from(scale));
        v.floor().to_integer().to_usize().unwrap_or(0)
    }

    /// ⌈x · scale⌉ as usize, exact.
    pub fn ceil_mul(x: &BigRational, scale: usize) -> usize {
        let v = x * BigRational::from_integer(BigInt::from(scale));
        v.ceil().to_integer().to_usize().unwrap_or(0)
    }

    pub fn summary(&self) -> ScheduleSummary {
        ScheduleSummary {
            mode: self.mode,
            eta: rat_str(&self.eta),
            r: rat_str(&self.r),
            d: rat_str(&self.d),
            eps: rat_str(&self.eps),
            beta: rat_str(&self.beta),
            gamma: rat_str(&self.gamma),
            n0: rat_str(&self.n0),
            m_eps: self.m_eps,
            eps_verdict: rat_str(&self.eps_verdict),
            eps_typical: rat_str(&self.eps_typical),
            reserve_fraction: rat_str(&self.reserve_fraction),
            strict: self.strict,
            checks: self.checks.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleSummary {
    pub mode: Mode,
    pub eta: String,
    pub r: String,
    pub d: String,
    pub eps: String,
    pub beta: String,
    pub gamma: String,
    pub n0: String,
    pub m_eps: u64,
    pub eps_verdict: String,
    pub eps_typical: String,
    pub reserve_fraction: String,
    pub strict: bool,
    pub checks: Vec<ScheduleCheck>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theoretical_display_example() {
        // eta = 0.1, r = 0.5: d = 0.0025/1000 = 1/400000.
        let s = derive_constants(&rat(1, 10), &rat(1, 2), Mode::Theoretical).unwrap();
        assert_eq!(s.d, rat(1, 400_000));
        // eps = (eta r d)^20 / 10^15 stays exactly representable.
        let erd = rat(1, 10) * rat(1, 2) * rat(1, 400_000);
        let expected = pow_rat(&erd, 20) / BigRational::from_integer(BigInt::from(10u64.pow(15)));
        assert_eq!(s.eps, expected);
        assert_eq!(s.m_eps, M_CAP_DEFAULT);
        // beta = min(eps/M, eta d / 1e5 M); here eps/M is far smaller.
        assert_eq!(
            s.beta,
            &s.eps / BigRational::from_integer(BigInt::from(M_CAP_DEFAULT))
        );
        assert_eq!(
            s.gamma,
            &s.beta * &s.d
                / (BigRational::from_integer(BigInt::from(2000))
                    * BigRational::from_integer(BigInt::from(M_CAP_DEFAULT)))
        );
    }

    #[test]
    fn practical_boundary_accepted() {
        // eps = d^2/100 exactly passes.
        let mut p = PracticalParams::default_for(rat(1, 10), rat(1, 2));
        p.d = rat(1, 10);
        p.eps = rat(1, 10_000);
        assert!(p.into_schedule().is_ok());
    }

    #[test]
    fn practical_violation_rejected() {
        let mut p = PracticalParams::default_for(rat(1, 10), rat(1, 2));
        p.d = rat(1, 10);
        p.eps = rat(1, 100);
        match p.into_schedule() {
            Err(ScheduleError::Inequality { name, .. }) => {
                assert_eq!(name, "eps <= d^2/100");
            }
            other => panic!("expected inequality error, got {other:?}"),
        }
    }

    #[test]
    fn m_of_eps_cap() {
        assert_eq!(m_of_eps(&rat(1, 2), M_CAP_DEFAULT), 4); // 2^2
        assert_eq!(m_of_eps(&rat(1, 4), M_CAP_DEFAULT), 16); // 2^4
        assert_eq!(m_of_eps(&rat(1, 100), M_CAP_DEFAULT), M_CAP_DEFAULT);
    }

    #[test]
    fn parses_exact_decimals() {
        assert_eq!(parse_rational("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("1/400000").unwrap(), rat(1, 400_000));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(derive_constants(&rat(3, 2), &rat(1, 2), Mode::Theoretical).is_err());
        assert!(derive_constants(&rat(1, 10), &rat(0, 1), Mode::Theoretical).is_err());
    }
}
