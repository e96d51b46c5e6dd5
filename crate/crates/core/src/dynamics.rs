//! Orbits, the linearised cocycle along an invariant curve, Birkhoff sums
//! over the rotation and the fibred rotation number.

use std::f64::consts::PI;

use serde::Serialize;

use crate::arithmetic::Frequency;
use crate::curves::TranslatedCurve;
use crate::error::{Error, Result};
use crate::maps::{CylinderPoint, ForcedMap};
use crate::periodic::{dealias_grid, PeriodicFunction};

const TWO_PI: f64 = 2.0 * PI;

/// `χ⁺ = (1/2π)∫ log(1 + εF_r(ψ(θ), θ; ε)) dθ`.
pub fn chi_plus_integral(map: &ForcedMap, curve: &TranslatedCurve) -> Result<f64> {
    let m = dealias_grid(curve.order());
    let partials = map.partials_on_grid(&curve.psi.samples(m), curve.epsilon);
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for p in &partials {
        let a = 1.0 + curve.epsilon * p.fr;
        min = min.min(a);
        sum += a.ln();
    }
    if !(min > 0.0) {
        return Err(Error::NotPositive { min });
    }
    Ok(sum / m as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleProduct {
    /// `(n, (1/n) Σ_{k<n} log a(θ₀ + 2πkα))`.
    pub log_products: Vec<(usize, f64)>,
    pub theta0: f64,
    pub chi_plus_integral: f64,
    /// `max_n n·|log_products(n) − χ⁺|`.
    pub c_emp: f64,
}

/// Tolerance on `|λ|` for treating a curve as invariant.
pub const INVARIANCE_TOLERANCE: f64 = 1e-8;

fn checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while (x as usize) < n_max {
        let n = x.round() as usize;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= 1.25;
    }
    out.push(n_max);
    out
}

/// Finite-time Lyapunov averages along the orbit of `θ₀` on an invariant curve.
pub fn lyapunov(
    curve: &TranslatedCurve,
    map: &ForcedMap,
    alpha: &Frequency,
    theta0: f64,
    n_max: usize,
) -> Result<CocycleProduct> {
    if curve.lambda.abs() > INVARIANCE_TOLERANCE {
        return Err(Error::Precondition(format!("curve is not invariant (λ = {:e})", curve.lambda)));
    }
    if n_max == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    let chi = chi_plus_integral(map, curve)?;
    let eps = curve.epsilon;
    let marks = checkpoints(n_max);
    let mut next = 0;
    let mut log_products = Vec::with_capacity(marks.len());
    let mut turns = (theta0 / TWO_PI).rem_euclid(1.0);
    let mut sum = 0.0;
    let mut c_emp = 0.0f64;
    for n in 1..=n_max {
        let theta = TWO_PI * turns;
        let a = 1.0 + eps * map.partials(curve.psi.eval(theta), theta, eps).fr;
        if !(a > 0.0) {
            return Err(Error::NotPositive { min: a });
        }
        sum += a.ln();
        turns += alpha.alpha();
        if turns >= 1.0 {
            turns -= 1.0;
        }
        if n == marks[next] {
            let avg = sum / n as f64;
            c_emp = c_emp.max(n as f64 * (avg - chi).abs());
            log_products.push((n, avg));
            next += 1;
        }
    }
    Ok(CocycleProduct { log_products, theta0, chi_plus_integral: chi, c_emp })
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffRow {
    pub n: usize,
    pub error: f64,
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub rows: Vec<BirkhoffRow>,
    pub max_scaled: f64,
    /// `Σ_{m≠0} 2|f̂_m| / |e^{2πimα} − 1|`, a bound on `n·error(n)`.
    pub trig_bound: Option<f64>,
    /// `Σ_{m≠0} 2μ|f̂_m||m|`, the constant-type form of the same bound.
    pub constant_type_bound: Option<f64>,
    /// α is rational: averages converge to the mean over a periodic orbit instead.
    pub rational: bool,
}

/// `n·|(1/n)Σ_{k<n} f(θ₀ + 2πkα) − mean f|` at each requested `n`.
pub fn birkhoff_rate(f: &PeriodicFunction, alpha: &Frequency, theta0: f64, n_list: &[usize]) -> Result<BirkhoffReport> {
    let mut wanted: Vec<usize> = n_list.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    if wanted.first() == Some(&0) {
        return Err(Error::Precondition("Birkhoff averages need n ≥ 1".into()));
    }
    let mean = f.mean();
    let mut rows = Vec::with_capacity(wanted.len());
    let mut turns = (theta0 / TWO_PI).rem_euclid(1.0);
    let mut sum = 0.0;
    let mut next = 0;
    let n_max = wanted.last().copied().unwrap_or(0);
    for n in 1..=n_max {
        sum += f.eval(TWO_PI * turns) - mean;
        turns += alpha.alpha();
        if turns >= 1.0 {
            turns -= 1.0;
        }
        if n == wanted[next] {
            let error = (sum / n as f64).abs();
            rows.push(BirkhoffRow { n, error, scaled: n as f64 * error });
            next += 1;
        }
    }
    let max_scaled = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let rational = alpha.is_rational();
    let (trig_bound, constant_type_bound) = if rational {
        (None, None)
    } else {
        let mut trig = 0.0;
        let mut ct = 0.0;
        for (m, c) in f.coeffs().iter().enumerate().skip(1) {
            // ±m contribute equally.
            trig += 2.0 * 2.0 * c.norm() / alpha.divisor(m as i64);
            ct += 2.0 * 2.0 * alpha.mu() * c.norm() * m as f64;
        }
        (Some(trig), Some(ct))
    };
    Ok(BirkhoffReport { rows, max_scaled, trig_bound, constant_type_bound, rational })
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationEstimate {
    pub n: usize,
    /// `(r_n − r₀)/n`.
    pub rho_n: f64,
    /// `(r_{2n} − r₀)/(2n)`.
    pub rho_2n: f64,
    /// `2ρ_{2n} − ρ_n`.
    pub rho: f64,
    pub tail: f64,
}

/// `ρ = lim (r_n − r₀)/n` for a lift periodic in `r`.
pub fn fibred_rotation_number(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    x0: CylinderPoint,
    n: usize,
) -> Result<RotationEstimate> {
    if !map.periodic_in_r() {
        return Err(Error::Precondition("fibred rotation number needs a map periodic in r".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    let mut x = x0;
    let mut rho_n = 0.0;
    for k in 1..=2 * n {
        x = map.step(eps, alpha, x);
        if !x.r.is_finite() {
            return Err(Error::Escape { step: k, r: x.r });
        }
        if k == n {
            rho_n = (x.r - x0.r) / n as f64;
        }
    }
    let rho_2n = (x.r - x0.r) / (2 * n) as f64;
    Ok(RotationEstimate { n, rho_n, rho_2n, rho: 2.0 * rho_2n - rho_n, tail: (rho_2n - rho_n).abs() })
}

pub const ESCAPE_RADIUS: f64 = 1e12;

/// Iterates `n_transient` steps silently, then records the next `n_keep` points.
pub fn orbit_sample(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    x0: CylinderPoint,
    n_transient: usize,
    n_keep: usize,
) -> Result<Vec<CylinderPoint>> {
    let mut x = x0;
    let mut out = Vec::with_capacity(n_keep);
    for k in 1..=n_transient + n_keep {
        x = map.step(eps, alpha, x);
        if !(x.r.abs() <= ESCAPE_RADIUS) {
            return Err(Error::Escape { step: k, r: x.r });
        }
        if k > n_transient {
            out.push(x);
        }
    }
    Ok(out)
}

/// Orbit of the inverse map; repellers of the map attract it.
pub fn backward_orbit(map: &ForcedMap, eps: f64, alpha: &Frequency, x0: CylinderPoint, n: usize) -> Result<Vec<CylinderPoint>> {
    let mut x = x0;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        x = map.inverse_step(eps, alpha, x)?;
        if !(x.r.abs() <= ESCAPE_RADIUS) {
            return Err(Error::Escape { step: k, r: x.r });
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{translated_curve, CurveOptions};

    #[test]
    fn theta_only_has_zero_exponent() {
        let alpha = Frequency::golden();
        let map = ForcedMap::theta_only(PeriodicFunction::from_cos_sin(0.0, &[1.0], &[], 16));
        let curve = translated_curve(&map, 0.1, &alpha, 0.0, &CurveOptions::default().with_order(16)).unwrap();
        let prod = lyapunov(&curve, &map, &alpha, 0.0, 100).unwrap();
        assert_eq!(prod.chi_plus_integral, 0.0);
        assert!(prod.log_products.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn linear_cocycle_is_constant() {
        let alpha = Frequency::golden();
        let eps = 0.2;
        let map = ForcedMap::linear_test(PeriodicFunction::from_cos_sin(0.0, &[1.0], &[], 16));
        let curve = translated_curve(&map, eps, &alpha, 0.0, &CurveOptions::default().with_order(16)).unwrap();
        let prod = lyapunov(&curve, &map, &alpha, 0.3, 1000).unwrap();
        assert!((prod.chi_plus_integral - (1.0 - eps).ln()).abs() < 1e-15);
        for &(_, v) in &prod.log_products {
            assert!((v - (1.0 - eps).ln()).abs() < 1e-13);
        }
        assert_eq!(prod.log_products.last().unwrap().0, 1000);
    }

    #[test]
    fn birkhoff_examples() {
        let alpha = Frequency::golden();
        let constant = birkhoff_rate(&PeriodicFunction::constant(2.0, 4), &alpha, 0.1, &[1, 10, 100]).unwrap();
        assert!(constant.rows.iter().all(|r| r.error == 0.0));
        let cos = PeriodicFunction::from_cos_sin(0.0, &[1.0], &[], 4);
        let ns: Vec<usize> = (0..=16).map(|k| 10usize.pow(5) * k / 16).filter(|&n| n > 0).collect();
        let report = birkhoff_rate(&cos, &alpha, 0.0, &ns).unwrap();
        assert!(report.max_scaled <= report.trig_bound.unwrap() + 1e-9);
        assert!(report.trig_bound.unwrap() <= report.constant_type_bound.unwrap());
        let half = Frequency::rational(1, 2).unwrap();
        let report = birkhoff_rate(&cos, &half, 0.4, &[2, 4, 100]).unwrap();
        assert!(report.rational);
        assert!(report.rows.iter().all(|r| r.error < 1e-14));
    }

    #[test]
    fn zero_map_orbits() {
        let alpha = Frequency::golden();
        let pts = orbit_sample(&ForcedMap::zero(), 0.5, &alpha, CylinderPoint::new(1.25, 0.0), 0, 50).unwrap();
        assert!(pts.iter().all(|p| p.r == 1.25));
        let first = ForcedMap::zero().step(0.5, &alpha, CylinderPoint::new(1.25, 0.0));
        assert_eq!(pts[0], first);
        let rho = fibred_rotation_number(&ForcedMap::zero(), 0.5, &alpha, CylinderPoint::new(0.0, 0.0), 100).unwrap();
        assert_eq!(rho.rho, 0.0);
    }

    #[test]
    fn escape_is_reported() {
        let alpha = Frequency::golden();
        let map = ForcedMap::expression(crate::maps::Expr::parse("r").unwrap(), false).unwrap();
        let err = orbit_sample(&map, 1.0, &alpha, CylinderPoint::new(1.0, 0.0), 100, 10);
        assert!(matches!(err, Err(Error::Escape { .. })));
    }

    #[test]
    fn checkpoints_are_geometric() {
        let c = checkpoints(1000);
        assert_eq!(c[0], 1);
        assert_eq!(*c.last().unwrap(), 1000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }
}
