//! Forced maps `r₁ = r + ω₀ + εF(r, θ; ε)`, `θ₁ = θ + 2πα` and the partial
//! derivatives of `F` used by the curve iteration and the variational equation.

mod expr;

use std::f64::consts::PI;

use serde::Serialize;

pub use expr::{Expr, Var};

use crate::arithmetic::Frequency;
use crate::error::{Error, Result};
use crate::periodic::{grid, PeriodicFunction};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Partial {
    Value,
    Dr,
    Dtheta,
    Drr,
    Dthetar,
}

/// `F, F_r, F_θ, F_rr, F_θr` at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Partials {
    pub f: f64,
    pub fr: f64,
    pub ft: f64,
    pub frr: f64,
    pub ftr: f64,
}

impl Partials {
    pub fn get(&self, which: Partial) -> f64 {
        match which {
            Partial::Value => self.f,
            Partial::Dr => self.fr,
            Partial::Dtheta => self.ft,
            Partial::Drr => self.frr,
            Partial::Dthetar => self.ftr,
        }
    }
}

/// A point of the cylinder `ℝ × 𝕋` with `θ ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderPoint {
    pub r: f64,
    pub theta: f64,
}

impl CylinderPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta: normalize_angle(theta) }
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TWO_PI);
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

#[derive(Clone, Debug)]
enum MapKind {
    Zero,
    Arnold { omega: f64, k: f64, b: f64 },
    /// `ω₁ + sin(r + G₀(θ)) + b₁ sin θ` with `G₀(θ) = −A cos(θ − πα)`.
    Transformed { omega1: f64, b0: f64, b1: f64, amplitude: f64, phase: f64 },
    Linear { g: PeriodicFunction, dg: PeriodicFunction },
    RationalCounterexample { q: u32 },
    ThetaOnly { p: PeriodicFunction, dp: PeriodicFunction },
    Expression(Box<ExprMap>),
}

#[derive(Clone, Debug)]
struct ExprMap {
    f: Expr,
    fr: Expr,
    ft: Expr,
    frr: Expr,
    ftr: Expr,
    periodic: bool,
}

#[derive(Clone, Debug)]
pub struct ForcedMap {
    kind: MapKind,
    /// Constant added to `F` (the ω₁ of a one-parameter family).
    offset: f64,
    /// ω₀ in `r₁ = r + ω₀ + εF`.
    drift: f64,
    derivative_bound: Option<f64>,
}

impl ForcedMap {
    fn from_kind(kind: MapKind) -> Self {
        Self { kind, offset: 0.0, drift: 0.0, derivative_bound: None }
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self::from_kind(MapKind::Zero)
    }

    /// Forced Arnold circle map, `F = ω + k sin r + b sin θ`; with `ε = 1` the
    /// step is the raw map `x₁ = x + ω + k sin x + b sin θ`.
    pub fn arnold(omega: f64, k: f64, b: f64) -> Self {
        Self::from_kind(MapKind::Arnold { omega, k, b })
    }

    /// `r₁ = r + ω₀ + ε(ω₁ + sin r + b sin θ)`.
    pub fn arnold_scaled(omega0: f64, omega1: f64, b: f64) -> Self {
        let mut map = Self::arnold(omega1, 1.0, b);
        map.drift = omega0;
        map
    }

    /// Arnold map after the change of variables `x = r + G₀(θ)`:
    /// `F = ω₁ + sin(r + G₀(θ)) + b₁ sin θ`, where
    /// `G₀(θ) = −b₀/(2 sin πα) · cos(θ − πα)` solves `G₀(θ + 2πα) − G₀(θ) = b₀ sin θ`.
    /// The additive constant of `G₀` is fixed to zero.
    pub fn transformed_arnold(omega1: f64, b0: f64, b1: f64, alpha: &Frequency) -> Result<Self> {
        let s = (PI * alpha.alpha()).sin();
        if s.abs() < 1e-300 {
            return Err(Error::InvalidMap("sin(πα) vanishes".into()));
        }
        Ok(Self::from_kind(MapKind::Transformed {
            omega1,
            b0,
            b1,
            amplitude: b0 / (2.0 * s),
            phase: PI * alpha.alpha(),
        }))
    }

    /// `F = −r + g(θ)`, whose translated curves are known in closed form.
    pub fn linear_test(g: PeriodicFunction) -> Self {
        let dg = g.derivative();
        Self::from_kind(MapKind::Linear { g, dg })
    }

    /// `F = (1 + sin² r) sin qθ`.
    pub fn rational_counterexample(q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidMap("q must be positive".into()));
        }
        Ok(Self::from_kind(MapKind::RationalCounterexample { q }))
    }

    /// `F = p(θ)`, independent of `r` and `ε`.
    pub fn theta_only(p: PeriodicFunction) -> Self {
        let dp = p.derivative();
        Self::from_kind(MapKind::ThetaOnly { p, dp })
    }

    /// User map from an expression; partials by symbolic differentiation.
    /// A claimed 2π-periodicity in `r` is checked on sample points.
    pub fn expression(f: Expr, periodic_in_r: bool) -> Result<Self> {
        let fr = f.diff(Var::R);
        let ft = f.diff(Var::Theta);
        let frr = fr.diff(Var::R);
        let ftr = ft.diff(Var::R);
        let map = Self::from_kind(MapKind::Expression(Box::new(ExprMap {
            f,
            fr,
            ft,
            frr,
            ftr,
            periodic: periodic_in_r,
        })));
        if periodic_in_r {
            for k in 0..64 {
                let r = -10.0 + 20.0 * ((k as f64 * 0.618_033_988_75) % 1.0);
                let theta = TWO_PI * ((k as f64 * 0.414_213_562_37) % 1.0);
                let eps = 0.1 * ((k as f64 * 0.732_050_807_57) % 1.0);
                let a = map.eval(r, theta, eps);
                let b = map.eval(r + TWO_PI, theta, eps);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs()) || !a.is_finite() {
                    return Err(Error::InvalidMap(format!("F is not 2π-periodic in r (at r = {r:.4})")));
                }
            }
        }
        Ok(map)
    }

    /// The family member `F + ω₁`.
    pub fn with_offset(&self, omega1: f64) -> Self {
        let mut map = self.clone();
        map.offset += omega1;
        map
    }

    pub fn with_derivative_bound(mut self, bound: f64) -> Self {
        self.derivative_bound = Some(bound);
        self
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn periodic_in_r(&self) -> bool {
        match &self.kind {
            MapKind::Linear { .. } => false,
            MapKind::Expression(e) => e.periodic,
            _ => true,
        }
    }

    /// `G₀` of the transformed Arnold map.
    pub fn transformed_shift(&self, theta: f64) -> Option<f64> {
        match self.kind {
            MapKind::Transformed { amplitude, phase, .. } => Some(-amplitude * (theta - phase).cos()),
            _ => None,
        }
    }

    /// `A = b₀/(2 sin πα)` of the transformed Arnold map.
    pub fn transformed_amplitude(&self) -> Option<f64> {
        match self.kind {
            MapKind::Transformed { amplitude, .. } => Some(amplitude),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        let base = match &self.kind {
            MapKind::Zero => "0".to_string(),
            MapKind::Arnold { omega, k, b } => format!("arnold(omega={omega}, k={k}, b={b})"),
            MapKind::Transformed { omega1, b0, b1, .. } => {
                format!("transformed(omega1={omega1}, b0={b0}, b1={b1})")
            }
            MapKind::Linear { g, .. } => format!("linear(g order {})", g.order()),
            MapKind::RationalCounterexample { q } => format!("(1 + sin(r)^2) * sin({q}*theta)"),
            MapKind::ThetaOnly { p, .. } => format!("theta_only(p order {})", p.order()),
            MapKind::Expression(e) => e.f.to_string(),
        };
        let mut out = base;
        if self.offset != 0.0 {
            out = format!("{out} + {}", self.offset);
        }
        if self.drift != 0.0 {
            out = format!("{out}; drift {}", self.drift);
        }
        out
    }

    pub fn partials(&self, r: f64, theta: f64, eps: f64) -> Partials {
        let mut p = match &self.kind {
            MapKind::Zero => Partials::default(),
            MapKind::Arnold { omega, k, b } => {
                let (s, c) = r.sin_cos();
                Partials { f: omega + k * s + b * theta.sin(), fr: k * c, ft: b * theta.cos(), frr: -k * s, ftr: 0.0 }
            }
            MapKind::Transformed { omega1, b1, amplitude, phase, .. } => {
                let (su, cu) = (theta - phase).sin_cos();
                let g0 = -amplitude * cu;
                let dg0 = amplitude * su;
                let (s, c) = (r + g0).sin_cos();
                Partials {
                    f: omega1 + s + b1 * theta.sin(),
                    fr: c,
                    ft: c * dg0 + b1 * theta.cos(),
                    frr: -s,
                    ftr: -s * dg0,
                }
            }
            MapKind::Linear { g, dg } => {
                Partials { f: -r + g.eval(theta), fr: -1.0, ft: dg.eval(theta), frr: 0.0, ftr: 0.0 }
            }
            MapKind::RationalCounterexample { q } => {
                let q = *q as f64;
                let (sq, cq) = (q * theta).sin_cos();
                let (s, c) = r.sin_cos();
                let s2r = 2.0 * s * c;
                Partials {
                    f: (1.0 + s * s) * sq,
                    fr: s2r * sq,
                    ft: q * (1.0 + s * s) * cq,
                    frr: 2.0 * (2.0 * r).cos() * sq,
                    ftr: q * s2r * cq,
                }
            }
            MapKind::ThetaOnly { p, dp } => {
                Partials { f: p.eval(theta), fr: 0.0, ft: dp.eval(theta), frr: 0.0, ftr: 0.0 }
            }
            MapKind::Expression(e) => Partials {
                f: e.f.eval(r, theta, eps),
                fr: e.fr.eval(r, theta, eps),
                ft: e.ft.eval(r, theta, eps),
                frr: e.frr.eval(r, theta, eps),
                ftr: e.ftr.eval(r, theta, eps),
            },
        };
        p.f += self.offset;
        p
    }

    pub fn eval(&self, r: f64, theta: f64, eps: f64) -> f64 {
        self.partials(r, theta, eps).f
    }

    /// Partials at `(r_j, θ_j)` on the uniform grid `θ_j = 2πj/m`, `m = r.len()`.
    pub fn partials_on_grid(&self, r: &[f64], eps: f64) -> Vec<Partials> {
        let m = r.len();
        let (table, dtable) = match &self.kind {
            MapKind::Linear { g, dg } => (g, dg),
            MapKind::ThetaOnly { p, dp } => (p, dp),
            _ => {
                return grid(m).into_iter().zip(r).map(|(theta, &rj)| self.partials(rj, theta, eps)).collect();
            }
        };
        let g = table.samples(m);
        let dg = dtable.samples(m);
        let linear = matches!(self.kind, MapKind::Linear { .. });
        (0..m)
            .map(|j| {
                let (f, fr) = if linear { (g[j] - r[j], -1.0) } else { (g[j], 0.0) };
                Partials { f: f + self.offset, fr, ft: dg[j], frr: 0.0, ftr: 0.0 }
            })
            .collect()
    }

    /// Sampled bound on `|F|, |F_r|, |F_θ|, |F_rr|, |F_θr|` unless one was supplied.
    pub fn derivative_bound(&self, eps: f64) -> f64 {
        if let Some(k) = self.derivative_bound {
            return k;
        }
        let (lo, hi) = if self.periodic_in_r() { (0.0, TWO_PI) } else { (-10.0, 10.0) };
        let mut bound = 0.0f64;
        for i in 0..64 {
            let r = lo + (hi - lo) * i as f64 / 63.0;
            for theta in grid(64) {
                let p = self.partials(r, theta, eps);
                bound = bound.max(p.f.abs()).max(p.fr.abs()).max(p.ft.abs()).max(p.frr.abs()).max(p.ftr.abs());
            }
        }
        bound
    }

    pub fn step(&self, eps: f64, alpha: &Frequency, x: CylinderPoint) -> CylinderPoint {
        step(self, eps, alpha, x)
    }

    /// Preimage under the map, by Newton iteration on `r`.
    pub fn inverse_step(&self, eps: f64, alpha: &Frequency, x: CylinderPoint) -> Result<CylinderPoint> {
        let theta = normalize_angle(x.theta - TWO_PI * alpha.alpha());
        let mut r = x.r - self.drift - eps * self.eval(x.r, theta, eps);
        for _ in 0..50 {
            let p = self.partials(r, theta, eps);
            let g = r + self.drift + eps * p.f - x.r;
            let dg = 1.0 + eps * p.fr;
            if dg.abs() < 1e-12 {
                break;
            }
            let dr = g / dg;
            r -= dr;
            if dr.abs() <= 1e-15 * (1.0 + r.abs()) {
                return Ok(CylinderPoint { r, theta });
            }
        }
        Err(Error::Inconsistent(format!("inverse map did not converge at r = {}", x.r)))
    }
}

/// One step `r₁ = r + ω₀ + εF(r, θ; ε)`, `θ₁ = θ + 2πα mod 2π`.
pub fn step(map: &ForcedMap, eps: f64, alpha: &Frequency, x: CylinderPoint) -> CylinderPoint {
    let r = x.r + map.drift + eps * map.eval(x.r, x.theta, eps);
    CylinderPoint::new(r, x.theta + TWO_PI * alpha.alpha())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn check_partials(map: &ForcedMap, r_range: (f64, f64)) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let h = 1e-5;
        let k = map.derivative_bound(0.05);
        let tol = 1e-6 * (1.0 + k);
        for _ in 0..100 {
            let r = rng.gen_range(r_range.0..r_range.1);
            let t = rng.gen_range(0.0..TWO_PI);
            let eps = 0.05;
            let p = map.partials(r, t, eps);
            let fd_r = (map.eval(r + h, t, eps) - map.eval(r - h, t, eps)) / (2.0 * h);
            let fd_t = (map.eval(r, t + h, eps) - map.eval(r, t - h, eps)) / (2.0 * h);
            let fd_rr = (map.partials(r + h, t, eps).fr - map.partials(r - h, t, eps).fr) / (2.0 * h);
            let fd_tr = (map.partials(r + h, t, eps).ft - map.partials(r - h, t, eps).ft) / (2.0 * h);
            assert!((p.fr - fd_r).abs() < tol, "{}: F_r", map.describe());
            assert!((p.ft - fd_t).abs() < tol, "{}: F_θ", map.describe());
            assert!((p.frr - fd_rr).abs() < tol, "{}: F_rr", map.describe());
            assert!((p.ftr - fd_tr).abs() < tol, "{}: F_θr", map.describe());
            if map.periodic_in_r() {
                assert!((map.eval(r + TWO_PI, t, eps) - p.f).abs() < 1e-12 * (1.0 + k));
            }
        }
    }

    #[test]
    fn builtin_partials_are_consistent() {
        let golden = Frequency::golden();
        let g = PeriodicFunction::from_cos_sin(0.2, &[1.0, 0.3], &[0.5], 4);
        let maps = vec![
            ForcedMap::zero(),
            ForcedMap::arnold(0.3, 0.8, 1.1),
            ForcedMap::arnold_scaled(0.1, 0.2, 0.7),
            ForcedMap::transformed_arnold(0.1, 1.3, 0.4, &golden).unwrap(),
            ForcedMap::linear_test(g.clone()),
            ForcedMap::rational_counterexample(4).unwrap(),
            ForcedMap::theta_only(g),
            ForcedMap::expression(Expr::parse("sin(r)*cos(2*theta) + eps*cos(r - theta)").unwrap(), true).unwrap(),
        ];
        for map in &maps {
            check_partials(map, (-10.0, 10.0));
        }
    }

    #[test]
    fn step_examples() {
        let alpha = Frequency::golden();
        let x = CylinderPoint::new(1.5, 2.0);
        let y = ForcedMap::zero().step(0.3, &alpha, x);
        assert_eq!(y.r, 1.5);
        assert!((y.theta - normalize_angle(2.0 + TWO_PI * alpha.alpha())).abs() < 1e-15);
        let arnold = ForcedMap::arnold(0.4, 0.8, 1.1);
        assert_eq!(arnold.step(0.0, &alpha, x).r, 1.5);
        assert!((arnold.step(1.0, &alpha, CylinderPoint::new(0.0, 0.0)).r - 0.4).abs() < 1e-16);
    }

    #[test]
    fn arnold_examples() {
        let m = ForcedMap::arnold(0.4, 0.8, 1.1);
        assert_eq!(m.eval(0.0, 0.0, 0.0), 0.4);
        assert_eq!(m.partials(0.0, 0.3, 0.0).fr, 0.8);
        assert!(m.periodic_in_r());
        assert!((m.eval(TWO_PI, 0.7, 0.0) - m.eval(0.0, 0.7, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn transformed_shift_solves_cohomological_equation() {
        let alpha = Frequency::golden();
        let b0 = 1.7;
        let map = ForcedMap::transformed_arnold(0.0, b0, 0.0, &alpha).unwrap();
        for theta in grid(32) {
            let lhs = map.transformed_shift(theta + TWO_PI * alpha.alpha()).unwrap() - map.transformed_shift(theta).unwrap();
            assert!((lhs - b0 * theta.sin()).abs() <= 1e-12);
        }
        let flat = ForcedMap::transformed_arnold(0.25, 0.0, 0.3, &alpha).unwrap();
        for theta in grid(16) {
            assert_eq!(flat.transformed_shift(theta).unwrap(), 0.0);
            let expected = 0.25 + 0.7f64.sin() + 0.3 * theta.sin();
            assert!((flat.eval(0.7, theta, 0.0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_test_partials() {
        let map = ForcedMap::linear_test(PeriodicFunction::from_cos_sin(0.0, &[1.0], &[], 2));
        let p = map.partials(0.4, 1.0, 0.1);
        assert_eq!(p.fr, -1.0);
        assert_eq!(p.frr, 0.0);
        assert!(!map.periodic_in_r());
        let grid_p = map.partials_on_grid(&[0.4, 0.4, 0.4, 0.4], 0.1);
        assert!((grid_p[1].f - map.eval(0.4, PI / 2.0, 0.1)).abs() < 1e-15);
    }

    #[test]
    fn rational_counterexample_signs() {
        let q = 4;
        let map = ForcedMap::rational_counterexample(q).unwrap();
        let theta_star = PI / (2.0 * q as f64);
        for i in 0..=200 {
            let r = -10.0 + 0.1 * i as f64;
            assert!(map.eval(r, theta_star, 0.0) >= 1.0);
            assert!(map.eval(r, -theta_star, 0.0) <= -1.0);
        }
    }

    #[test]
    fn non_periodic_expression_rejected_when_claimed_periodic() {
        assert!(ForcedMap::expression(Expr::parse("r").unwrap(), true).is_err());
        assert!(ForcedMap::expression(Expr::parse("r").unwrap(), false).is_ok());
    }

    #[test]
    fn repeated_steps_accumulate_rotation() {
        let alpha = Frequency::golden();
        let map = ForcedMap::zero();
        let mut x = CylinderPoint::new(0.0, 0.3);
        let n = 1000;
        for _ in 0..n {
            x = map.step(0.1, &alpha, x);
        }
        let expected = normalize_angle(0.3 + TWO_PI * (n as f64 * alpha.alpha()).rem_euclid(1.0));
        let diff = (x.theta - expected).abs();
        assert!(diff.min(TWO_PI - diff) <= n as f64 * 1e-15);
    }

    #[test]
    fn inverse_step_round_trips() {
        let alpha = Frequency::golden();
        let map = ForcedMap::transformed_arnold(0.1, 1.0, 0.2, &alpha).unwrap();
        let x = CylinderPoint::new(0.4, 2.5);
        let y = map.step(0.05, &alpha, x);
        let z = map.inverse_step(0.05, &alpha, y).unwrap();
        assert!((z.r - x.r).abs() < 1e-13);
        assert!((z.theta - x.theta).abs() < 1e-12);
    }
}
