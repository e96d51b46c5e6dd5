//! Rotation numbers: continued fractions, the constant-type margin δ in
//! `|α − p/q| ≥ δ/q²`, and lower bounds on the small divisors `|e^{2πinα} − 1|`.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::periodic::rotation_phase;

/// A partial quotient above this value ends the expansion.
const QUOTIENT_CUTOFF: f64 = 1e12;
/// Float frequencies keep convergents with denominators up to this size.
const FLOAT_DENOMINATOR_LIMIT: u64 = 100_000_000;
/// Terms stored for the periodic expansions of the builtin quadratic irrationals.
const QUADRATIC_DEPTH: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuedFraction {
    pub integer_part: i64,
    /// Partial quotients `a₁, a₂, …`.
    pub quotients: Vec<u64>,
    /// Convergents `p_k/q_k`, `k = 1..`, matching `quotients`.
    pub convergents: Vec<(u64, u64)>,
    /// The expansion ended before the requested depth.
    pub terminated: bool,
}

/// Standard continued-fraction expansion of `x` up to `depth` partial
/// quotients after the integer part.
pub fn continued_fraction(x: f64, depth: usize) -> Result<ContinuedFraction> {
    if depth == 0 {
        return Err(Error::InvalidFrequency("continued fraction depth must be positive".into()));
    }
    if !x.is_finite() {
        return Err(Error::InvalidFrequency(format!("{x} is not finite")));
    }
    let integer_part = x.floor();
    let mut rest = x - integer_part;
    let mut quotients = Vec::new();
    let mut convergents = Vec::new();
    // (p_{k-1}, q_{k-1}), (p_{k-2}, q_{k-2}) for the fractional part.
    let (mut p1, mut q1, mut p2, mut q2) = (0u64, 1u64, 1u64, 0u64);
    let mut terminated = false;
    while quotients.len() < depth {
        if rest == 0.0 {
            terminated = true;
            break;
        }
        let inv = 1.0 / rest;
        if inv > QUOTIENT_CUTOFF {
            terminated = true;
            break;
        }
        let a = inv.floor();
        rest = inv - a;
        let a = a as u64;
        let next = a
            .checked_mul(p1)
            .and_then(|v| v.checked_add(p2))
            .zip(a.checked_mul(q1).and_then(|v| v.checked_add(q2)));
        let Some((p, q)) = next else { break };
        quotients.push(a);
        convergents.push((p, q));
        (p2, q2, p1, q1) = (p1, q1, p, q);
    }
    Ok(ContinuedFraction { integer_part: integer_part as i64, quotients, convergents, terminated })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyKind {
    /// Quadratic irrational with a known periodic expansion and exact δ.
    ExactQuadratic { name: String },
    /// Arbitrary float; δ is estimated from computed convergents.
    Float,
    Rational { p: u64, q: u64 },
}

/// A rotation number α ∈ (0, 1), measured in turns per step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frequency {
    alpha: f64,
    cf: Vec<u64>,
    delta: f64,
    #[serde(flatten)]
    kind: FrequencyKind,
    rigorous: bool,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Frequency {
    /// `(√5 − 1)/2`, expansion `[0; 1, 1, 1, …]`.
    ///
    /// `inf_q q‖qα‖ = 1 − α = (3 − √5)/2`, attained at `q = 1`.
    pub fn golden() -> Self {
        let s5 = 5f64.sqrt();
        Self {
            alpha: (s5 - 1.0) / 2.0,
            cf: vec![1; QUADRATIC_DEPTH],
            delta: (3.0 - s5) / 2.0,
            kind: FrequencyKind::ExactQuadratic { name: "golden".into() },
            rigorous: true,
        }
    }

    /// `√2 − 1`, expansion `[0; 2, 2, 2, …]`.
    ///
    /// `inf_q q‖qα‖ = 2(3 − 2√2)`, attained at `q = 2`.
    pub fn sqrt2_minus_one() -> Self {
        let s2 = 2f64.sqrt();
        Self {
            alpha: s2 - 1.0,
            cf: vec![2; QUADRATIC_DEPTH],
            delta: 6.0 - 4.0 * s2,
            kind: FrequencyKind::ExactQuadratic { name: "sqrt2m1".into() },
            rigorous: true,
        }
    }

    pub fn rational(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::InvalidFrequency(format!("denominator must be positive, got {q}")));
        }
        let p = p.rem_euclid(q) as u64;
        if p == 0 {
            return Err(Error::InvalidFrequency("α must not be an integer".into()));
        }
        let g = gcd(p, q as u64);
        let (p, q) = (p / g, q as u64 / g);
        let cf = continued_fraction(p as f64 / q as f64, 64)?;
        Ok(Self {
            alpha: p as f64 / q as f64,
            cf: cf.quotients,
            delta: 0.0,
            kind: FrequencyKind::Rational { p, q },
            rigorous: true,
        })
    }

    /// Frequency from a float, reduced mod 1. An expansion that terminates
    /// with a small denominator is treated as that rational.
    pub fn from_float(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidFrequency(format!("{x} is not finite")));
        }
        let alpha = x.rem_euclid(1.0);
        if alpha == 0.0 {
            return Err(Error::InvalidFrequency("α must not be an integer".into()));
        }
        let cf = continued_fraction(alpha, 64)?;
        if cf.terminated {
            if let Some(&(p, q)) = cf.convergents.last() {
                if q <= 1_000_000 && (p as f64 / q as f64 - alpha).abs() < 1e-15 {
                    return Self::rational(p as i64, q as i64);
                }
            }
        }
        let mut quotients = Vec::new();
        // q₀ = 1, p₀ = 0 is the first best approximation.
        let mut delta = alpha.min(1.0 - alpha);
        for (&a, &(p, q)) in cf.quotients.iter().zip(&cf.convergents) {
            if q > FLOAT_DENOMINATOR_LIMIT {
                break;
            }
            quotients.push(a);
            delta = delta.min(q as f64 * (q as f64 * alpha - p as f64).abs());
        }
        Ok(Self { alpha, cf: quotients, delta, kind: FrequencyKind::Float, rigorous: false })
    }

    /// Accepts `golden`, `sqrt2m1`, `p/q`, or a decimal.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        match s {
            "golden" => return Ok(Self::golden()),
            "sqrt2m1" => return Ok(Self::sqrt2_minus_one()),
            _ => {}
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| Error::InvalidFrequency(format!("bad numerator in {s:?}")))?;
            let q: i64 = q.trim().parse().map_err(|_| Error::InvalidFrequency(format!("bad denominator in {s:?}")))?;
            return Self::rational(p, q);
        }
        let x: f64 = s.parse().map_err(|_| Error::InvalidFrequency(format!("cannot parse {s:?}")))?;
        Self::from_float(x)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> &FrequencyKind {
        &self.kind
    }

    pub fn partial_quotients(&self) -> &[u64] {
        &self.cf
    }

    /// Constant-type margin δ; empirical for float frequencies, 0 for rationals.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// False when δ is only an estimate.
    pub fn is_rigorous(&self) -> bool {
        self.rigorous
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.kind, FrequencyKind::Rational { .. })
    }

    pub fn denominator(&self) -> Option<u64> {
        match self.kind {
            FrequencyKind::Rational { q, .. } => Some(q),
            _ => None,
        }
    }

    /// μ with `|e^{2πimα} − 1| ≥ 1/(μ|m|)`.
    pub fn mu(&self) -> f64 {
        1.0 / (4.0 * self.delta)
    }

    /// `|e^{2πinα} − 1|` computed directly.
    pub fn divisor(&self, n: i64) -> f64 {
        // |e^{ix} − 1| = 2|sin(x/2)|
        2.0 * (PI * (n as f64 * self.alpha).rem_euclid(1.0)).sin().abs()
    }

    /// A lower bound `L(n) ≤ |e^{2πinα} − 1|`.
    ///
    /// For exact quadratic irrationals this is `4δ/|n|`, from
    /// `|sin πx| ≥ 2‖x‖` and `‖nα‖ ≥ δ/|n|`. Float frequencies return the
    /// directly computed divisor, with no claim of rigor.
    pub fn divisor_bound(&self, n: i64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Precondition("divisor bound needs a nonzero mode".into()));
        }
        match &self.kind {
            FrequencyKind::ExactQuadratic { .. } => Ok(4.0 * self.delta / n.unsigned_abs() as f64),
            FrequencyKind::Float => Ok(self.divisor(n)),
            FrequencyKind::Rational { q, .. } => {
                if n.unsigned_abs() % q == 0 {
                    Err(Error::Resonance { n })
                } else {
                    Ok(self.divisor(n))
                }
            }
        }
    }

    /// `e^{2πinα}`.
    pub fn phase(&self, n: i64) -> num_complex::Complex64 {
        rotation_phase(n, self.alpha)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FrequencyKind::ExactQuadratic { name } => write!(f, "{name}"),
            FrequencyKind::Rational { p, q } => write!(f, "{p}/{q}"),
            FrequencyKind::Float => write!(f, "{}", self.alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_expansion() {
        let cf = continued_fraction((5f64.sqrt() - 1.0) / 2.0, 10).unwrap();
        assert_eq!(cf.integer_part, 0);
        assert_eq!(cf.quotients, vec![1; 10]);
        assert_eq!(&cf.convergents[..5], &[(1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]);
    }

    #[test]
    fn terminating_expansion() {
        let cf = continued_fraction(1.0 / 3.0, 10).unwrap();
        assert_eq!(cf.quotients, vec![3]);
        assert!(cf.terminated);
        assert!(continued_fraction(0.5, 0).is_err());
    }

    #[test]
    fn sqrt2_expansion_follows_recurrence() {
        let cf = continued_fraction(2f64.sqrt() - 1.0, 12).unwrap();
        assert_eq!(cf.quotients, vec![2; 12]);
        for k in 2..cf.convergents.len() {
            let a = cf.quotients[k];
            assert_eq!(cf.convergents[k].1, a * cf.convergents[k - 1].1 + cf.convergents[k - 2].1);
            assert_eq!(cf.convergents[k].0, a * cf.convergents[k - 1].0 + cf.convergents[k - 2].0);
        }
    }

    #[test]
    fn convergents_alternate_and_approximate() {
        for x in [(5f64.sqrt() - 1.0) / 2.0, 2f64.sqrt() - 1.0, PI - 3.0, 0.1234567] {
            let cf = continued_fraction(x, 12).unwrap();
            for k in 0..cf.convergents.len() - 1 {
                let (p, q) = cf.convergents[k];
                let (_, q_next) = cf.convergents[k + 1];
                if q_next > 100_000_000 {
                    break;
                }
                let err = x - p as f64 / q as f64;
                // k = 0 is the first convergent p₁/q₁, which lies above x.
                assert_eq!(err < 0.0, k % 2 == 0, "x = {x}, k = {k}");
                assert!(err.abs() <= 1.0 / (q as f64 * q_next as f64) + 1e-16, "x = {x}, k = {k}, err = {err:e}, q = {q}, q_next = {q_next}");
            }
        }
    }

    fn brute_force_margin(alpha: f64, q_max: u64) -> f64 {
        (1..=q_max)
            .map(|q| {
                let qa = q as f64 * alpha;
                q as f64 * (qa - qa.round()).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exact_margins_match_brute_force() {
        for freq in [Frequency::golden(), Frequency::sqrt2_minus_one()] {
            let brute = brute_force_margin(freq.alpha(), 10_000);
            assert!((brute - freq.delta()).abs() < 1e-12, "{freq}: {brute} vs {}", freq.delta());
        }
    }

    #[test]
    fn divisor_bounds_hold() {
        for freq in [Frequency::golden(), Frequency::sqrt2_minus_one()] {
            for n in 1..=10_000i64 {
                for m in [n, -n] {
                    assert!(freq.divisor_bound(m).unwrap() <= freq.divisor(m), "{freq} n = {m}");
                }
            }
        }
    }

    #[test]
    fn golden_bound_is_tight_on_fibonacci() {
        let g = Frequency::golden();
        let (mut a, mut b) = (1i64, 1i64);
        for _ in 0..20 {
            let ratio = g.divisor(b) / g.divisor_bound(b).unwrap();
            assert!((1.0..=10.0).contains(&ratio), "F = {b}: ratio {ratio}");
            (a, b) = (b, a + b);
        }
        let direct = (g.phase(1) - num_complex::Complex64::new(1.0, 0.0)).norm();
        assert!(g.divisor_bound(1).unwrap() <= direct);
    }

    #[test]
    fn rational_resonance() {
        let f = Frequency::rational(2, 6).unwrap();
        assert_eq!(f.kind(), &FrequencyKind::Rational { p: 1, q: 3 });
        assert!((f.alpha() - 1.0 / 3.0).abs() < 1e-16);
        assert!(matches!(f.divisor_bound(3), Err(Error::Resonance { n: 3 })));
        assert!(f.divisor_bound(2).unwrap() > 0.0);
    }

    #[test]
    fn parsing() {
        assert_eq!(Frequency::parse("golden").unwrap(), Frequency::golden());
        assert_eq!(Frequency::parse("sqrt2m1").unwrap(), Frequency::sqrt2_minus_one());
        assert!(Frequency::parse("1/4").unwrap().is_rational());
        assert!(Frequency::parse("0.25").unwrap().is_rational());
        let f = Frequency::parse("0.7548776662466927").unwrap();
        assert_eq!(f.kind(), &FrequencyKind::Float);
        assert!(!f.is_rigorous());
        assert!(f.delta() > 0.0 && f.delta() < 0.5);
        assert!(Frequency::parse("3").is_err());
        assert!(Frequency::parse("x").is_err());
    }
}
