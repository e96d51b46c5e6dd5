//! The bifurcation function `Φ(c) = (1/2π)∫F(ψ_c(θ), θ; ε) dθ`, whose zeros are
//! the invariant curves, and the mode-locking intervals built from its range.

use std::f64::consts::PI;

use serde::Serialize;

use crate::arithmetic::Frequency;
use crate::curves::{dpsi_dc, sweep_curves, translated_curve, CurveOptions, TranslatedCurve};
use crate::dynamics::chi_plus_integral;
use crate::error::{Error, Result};
use crate::maps::ForcedMap;
use crate::periodic::{dealias_grid, grid};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationOptions {
    pub samples_per_period: usize,
    pub tol_root: f64,
    pub tol_c: f64,
    /// Sampled `|Φ|` minima below this are polished as possible double roots.
    pub touch_tol: f64,
    /// Classification deadband is `deadband · ε`.
    pub deadband: f64,
    pub curve: CurveOptions,
}

impl Default for BifurcationOptions {
    fn default() -> Self {
        Self {
            samples_per_period: 512,
            tol_root: 1e-10,
            tol_c: 1e-12,
            touch_tol: 1e-6,
            deadband: 1e-3,
            curve: CurveOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Attractor,
    Repeller,
    Degenerate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Root {
    pub c: f64,
    pub phi: f64,
    pub dphi_dc: f64,
    pub chi_plus: f64,
    pub classification: Classification,
    /// Newton polishing failed or the root came from a tangency.
    pub degenerate_suspect: bool,
    pub lambda: f64,
    #[serde(skip)]
    pub curve: TranslatedCurve,
}

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationReport {
    pub roots: Vec<Root>,
    pub phi_samples: Vec<(f64, f64)>,
    /// `Φ` vanished at every sample: every translated curve is invariant.
    pub identically_zero: bool,
    pub mode_lock_interval: Option<ModeLockInterval>,
}

/// `(1/2π)∫F(ψ(θ), θ; ε) dθ` by the trapezoidal rule on the dealiasing grid.
pub fn phi_of_curve(map: &ForcedMap, curve: &TranslatedCurve) -> f64 {
    let m = dealias_grid(curve.order());
    let values = curve.psi.samples(m);
    map.partials_on_grid(&values, curve.epsilon).iter().map(|p| p.f).sum::<f64>() / m as f64
}

/// `Φ(c)`, checked against `−(λ + ω₀)/ε` from the curve when `ε > 0`.
pub fn phi(map: &ForcedMap, eps: f64, alpha: &Frequency, c: f64, opts: &CurveOptions) -> Result<f64> {
    let curve = translated_curve(map, eps, alpha, c, opts)?;
    if !curve.converged {
        return Err(Error::NotConverged { c });
    }
    let value = phi_of_curve(map, &curve);
    if eps > 0.0 {
        let from_lambda = -(curve.lambda + map.drift()) / eps;
        if (value - from_lambda).abs() > 1e-8 * (1.0 + value.abs()) {
            return Err(Error::Inconsistent(format!("Φ = {value} but −(λ+ω₀)/ε = {from_lambda} at c = {c}")));
        }
    }
    Ok(value)
}

/// `Φ₀(c) = (1/2π)∫F(c, θ; 0) dθ`.
pub fn phi0(map: &ForcedMap, c: f64) -> f64 {
    let thetas = grid(1024);
    thetas.iter().map(|&t| map.eval(c, t, 0.0)).sum::<f64>() / thetas.len() as f64
}

/// `Φ(c) + ω₀/ε`, which vanishes exactly when the curve of mean `c` is invariant.
fn level(map: &ForcedMap, curve: &TranslatedCurve) -> f64 {
    let drift = if map.drift() == 0.0 { 0.0 } else { map.drift() / curve.epsilon };
    phi_of_curve(map, curve) + drift
}

struct Evaluator<'a> {
    map: &'a ForcedMap,
    eps: f64,
    alpha: &'a Frequency,
    opts: &'a CurveOptions,
}

impl Evaluator<'_> {
    fn curve(&self, c: f64) -> Result<TranslatedCurve> {
        let curve = translated_curve(self.map, self.eps, self.alpha, c, self.opts)?;
        if !curve.converged {
            return Err(Error::NotConverged { c });
        }
        Ok(curve)
    }

    fn value(&self, c: f64) -> Result<(f64, TranslatedCurve)> {
        let curve = self.curve(c)?;
        Ok((level(self.map, &curve), curve))
    }

    fn samples(&self, cs: &[f64]) -> Result<Vec<(f64, TranslatedCurve)>> {
        sweep_curves(self.map, self.eps, self.alpha, cs, self.opts)
            .into_iter()
            .map(|res| {
                let curve = res?;
                if !curve.converged {
                    return Err(Error::NotConverged { c: curve.c });
                }
                Ok((level(self.map, &curve), curve))
            })
            .collect()
    }
}

fn sample_grid(lo: f64, hi: f64, per_period: usize) -> Vec<f64> {
    let n = ((per_period as f64 * (hi - lo) / TWO_PI).ceil() as usize).max(2);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn check_eps(map: &ForcedMap, eps: f64) -> Result<()> {
    if map.drift() != 0.0 && eps == 0.0 {
        return Err(Error::Precondition("a map with drift ω₀ ≠ 0 has no invariant curves at ε = 0".into()));
    }
    Ok(())
}

pub fn find_invariant_curves(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c_range: (f64, f64),
    opts: &BifurcationOptions,
) -> Result<BifurcationReport> {
    let (lo, hi) = c_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Precondition(format!("invalid c range [{lo}, {hi}]")));
    }
    check_eps(map, eps)?;
    let ev = Evaluator { map, eps, alpha, opts: &opts.curve };
    let cs = sample_grid(lo, hi, opts.samples_per_period);
    let samples = ev.samples(&cs)?;
    let phi_samples: Vec<(f64, f64)> = cs.iter().zip(&samples).map(|(&c, (v, _))| (c, *v)).collect();
    let identically_zero = phi_samples.iter().all(|&(_, v)| v.abs() <= opts.tol_root);
    let mut roots = Vec::new();
    if identically_zero {
        return Ok(BifurcationReport { roots, phi_samples, identically_zero, mode_lock_interval: None });
    }

    let mut found: Vec<(f64, bool)> = Vec::new();
    for i in 0..phi_samples.len() - 1 {
        let (c0, f0) = phi_samples[i];
        let (c1, f1) = phi_samples[i + 1];
        if f0 == 0.0 {
            found.push((c0, false));
        } else if f0 * f1 < 0.0 {
            found.push(refine_bracket(&ev, c0, f0, c1, opts)?);
        }
    }
    if let Some(&(c, f)) = phi_samples.last() {
        if f == 0.0 {
            found.push((c, false));
        }
    }
    // Tangential zeros: sampled minima of |Φ| without a sign change nearby.
    for i in 1..phi_samples.len() - 1 {
        let (f_prev, f, f_next) = (phi_samples[i - 1].1, phi_samples[i].1, phi_samples[i + 1].1);
        let is_min = f.abs() <= f_prev.abs() && f.abs() <= f_next.abs();
        let no_crossing = f_prev * f > 0.0 && f * f_next > 0.0;
        if is_min && no_crossing && f.abs() < opts.touch_tol {
            if let Ok(c) = newton(&ev, phi_samples[i].0, phi_samples[i - 1].0, phi_samples[i + 1].0, opts) {
                found.push((c, true));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.dedup_by(|b, a| (b.0 - a.0).abs() < 1e3 * opts.tol_c.max(1e-12));

    let deadband = opts.deadband * eps;
    for (c, suspect) in found {
        let (value, curve) = ev.value(c)?;
        let derivative = dpsi_dc(&curve, map, alpha)?;
        let chi_plus = chi_plus_integral(map, &curve)?;
        let classification = if chi_plus < -deadband {
            Classification::Attractor
        } else if chi_plus > deadband {
            Classification::Repeller
        } else {
            Classification::Degenerate
        };
        roots.push(Root {
            c,
            phi: value,
            dphi_dc: derivative.dphi_dc,
            chi_plus,
            classification,
            degenerate_suspect: suspect,
            lambda: curve.lambda,
            curve,
        });
    }
    Ok(BifurcationReport { roots, phi_samples, identically_zero, mode_lock_interval: None })
}

/// Bisection to width `tol_c`, then Newton with `Φ'` from the variational
/// equation; returns the root and whether Newton had to be abandoned.
fn refine_bracket(ev: &Evaluator, mut a: f64, mut fa: f64, mut b: f64, opts: &BifurcationOptions) -> Result<(f64, bool)> {
    while b - a > opts.tol_c {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let (fm, _) = ev.value(mid)?;
        if fm == 0.0 {
            return Ok((mid, false));
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let mid = 0.5 * (a + b);
    match newton(ev, mid, a - 1e-9, b + 1e-9, opts) {
        Ok(c) => Ok((c, false)),
        Err(_) => Ok((mid, true)),
    }
}

fn newton(ev: &Evaluator, start: f64, lo: f64, hi: f64, opts: &BifurcationOptions) -> Result<f64> {
    let mut c = start;
    for _ in 0..20 {
        let (f, curve) = ev.value(c)?;
        if f.abs() <= opts.tol_root {
            return Ok(c);
        }
        let d = dpsi_dc(&curve, ev.map, ev.alpha)?.dphi_dc;
        if d == 0.0 || !d.is_finite() {
            break;
        }
        c -= f / d;
        if !(c >= lo && c <= hi) {
            break;
        }
    }
    Err(Error::Inconsistent(format!("Newton iteration for Φ did not converge from c = {start}")))
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeLockInterval {
    /// `−max Φ`.
    pub omega_lower: f64,
    /// `−min Φ`.
    pub omega_upper: f64,
    pub c_at_max: f64,
    pub c_at_min: f64,
    /// `ω_* = ω*` within `tol_root`.
    pub degenerate: bool,
    /// Invariant curves found at the midpoint `ω₁`.
    pub midpoint_roots: usize,
}

/// `[ω_*, ω*]`: the `ω₁` for which `F + ω₁` has an invariant curve.
///
/// `family(ω₁)` must equal `family(0) + ω₁`; this is checked on samples.
pub fn mode_lock_interval(
    family: &(dyn Fn(f64) -> ForcedMap + Sync),
    eps: f64,
    alpha: &Frequency,
    opts: &BifurcationOptions,
) -> Result<ModeLockInterval> {
    let base = family(0.0);
    if !base.periodic_in_r() {
        return Err(Error::Precondition("mode locking needs a map that is 2π-periodic in r".into()));
    }
    let shifted = family(1.0);
    for k in 0..16 {
        let r = TWO_PI * k as f64 / 16.0;
        let t = TWO_PI * ((k as f64 * 0.618_033_988_75) % 1.0);
        let d = shifted.eval(r, t, eps) - base.eval(r, t, eps);
        if (d - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition("family must depend on ω₁ as F + ω₁".into()));
        }
    }
    check_eps(&base, eps)?;
    let ev = Evaluator { map: &base, eps, alpha, opts: &opts.curve };
    let n = opts.samples_per_period.max(8);
    let cs: Vec<f64> = (0..n).map(|i| TWO_PI * i as f64 / n as f64).collect();
    let values: Vec<f64> = ev.samples(&cs)?.into_iter().map(|(v, _)| v).collect();
    let h = TWO_PI / n as f64;
    let imax = (0..n).max_by(|&i, &j| values[i].total_cmp(&values[j])).expect("non-empty");
    let imin = (0..n).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("non-empty");
    let (c_at_max, max) = golden_section(|c| ev.value(c).map(|(v, _)| v), cs[imax], h, values[imax])?;
    let (c_at_min, neg_min) = golden_section(|c| ev.value(c).map(|(v, _)| -v), cs[imin], h, -values[imin])?;
    let omega_lower = -max;
    let omega_upper = neg_min;
    let degenerate = omega_upper - omega_lower <= opts.tol_root;
    let mut midpoint_roots = 0;
    if !degenerate {
        let mid = 0.5 * (omega_lower + omega_upper);
        let map = family(mid);
        let report = find_invariant_curves(&map, eps, alpha, (c_at_max, c_at_max + TWO_PI), opts)?;
        midpoint_roots = report.roots.len();
        if midpoint_roots < 2 {
            return Err(Error::Inconsistent(format!(
                "only {midpoint_roots} invariant curve(s) at the midpoint ω₁ = {mid} of [{omega_lower}, {omega_upper}]"
            )));
        }
    }
    Ok(ModeLockInterval { omega_lower, omega_upper, c_at_max, c_at_min, degenerate, midpoint_roots })
}

/// Maximum of `f` on `[c − h, c + h]`, where `f(c) = fc` is the best sample.
fn golden_section(f: impl Fn(f64) -> Result<f64>, c: f64, h: f64, fc: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (c - h, c + h);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-9 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x)?;
    Ok(if v >= fc { (x, v) } else { (c, fc) })
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexedInterval {
    pub n: i64,
    /// `None` when the interval misses the `ω₁` window.
    pub interval: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalsReport {
    pub base: ModeLockInterval,
    pub intervals: Vec<IndexedInterval>,
    pub window: (f64, f64),
    pub overlap_warning: Option<String>,
}

/// Intervals `I_N` of `ω₁` giving an invariant curve with `λ = 2πN`.
///
/// `ψ_c` does not depend on `ω₁`, so `λ = 2πN` reads `ε(Φ(c) + ω₁) = −2πN`
/// and `I_N = I₀ − 2πN/ε`, clipped to `window`.
pub fn intervals_in(
    family: &(dyn Fn(f64) -> ForcedMap + Sync),
    eps: f64,
    alpha: &Frequency,
    n_range: (i64, i64),
    window: (f64, f64),
    opts: &BifurcationOptions,
) -> Result<IntervalsReport> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("intervals I_N need ε > 0".into()));
    }
    let base = mode_lock_interval(family, eps, alpha, opts)?;
    let mut intervals = Vec::new();
    for n in n_range.0..=n_range.1 {
        let shift = TWO_PI * n as f64 / eps;
        let (lo, hi) = (base.omega_lower - shift, base.omega_upper - shift);
        let clipped = (lo.max(window.0), hi.min(window.1));
        intervals.push(IndexedInterval { n, interval: (clipped.0 <= clipped.1).then_some(clipped) });
    }
    let mut overlap_warning = None;
    let present: Vec<&IndexedInterval> = intervals.iter().filter(|i| i.interval.is_some()).collect();
    for w in present.windows(2) {
        let (a, b) = (w[0].interval.unwrap(), w[1].interval.unwrap());
        if a.0.max(b.0) <= a.1.min(b.1) {
            overlap_warning = Some(format!("I_{} and I_{} overlap", w[0].n, w[1].n));
        }
    }
    Ok(IntervalsReport { base, intervals, window, overlap_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::PeriodicFunction;

    fn opts(order: usize, samples: usize) -> BifurcationOptions {
        BifurcationOptions {
            samples_per_period: samples,
            curve: CurveOptions::default().with_order(order),
            ..BifurcationOptions::default()
        }
    }

    #[test]
    fn zero_map_is_identically_zero() {
        let alpha = Frequency::golden();
        assert_eq!(phi(&ForcedMap::zero(), 0.1, &alpha, 0.3, &CurveOptions::default().with_order(16)).unwrap(), 0.0);
        assert_eq!(phi0(&ForcedMap::zero(), 0.3), 0.0);
        let report = find_invariant_curves(&ForcedMap::zero(), 0.1, &alpha, (0.0, 1.0), &opts(16, 32)).unwrap();
        assert!(report.identically_zero);
        assert!(report.roots.is_empty());
    }

    #[test]
    fn linear_test_root() {
        let alpha = Frequency::golden();
        let eps = 0.1;
        let map = ForcedMap::linear_test(PeriodicFunction::from_cos_sin(0.0, &[1.0], &[], 16));
        assert!((phi(&map, eps, &alpha, 0.7, &CurveOptions::default().with_order(16)).unwrap() + 0.7).abs() < 1e-12);
        let report = find_invariant_curves(&map, eps, &alpha, (-1.0, 1.3), &opts(16, 16)).unwrap();
        assert_eq!(report.roots.len(), 1);
        let root = &report.roots[0];
        assert!(root.c.abs() < 1e-10);
        assert!((root.dphi_dc + 1.0).abs() < 1e-10);
        assert!((root.chi_plus - (1.0 - eps).ln()).abs() < 1e-12);
        assert_eq!(root.classification, Classification::Attractor);
    }

    #[test]
    fn mode_lock_requires_periodic_family() {
        let alpha = Frequency::golden();
        let family = |w: f64| ForcedMap::linear_test(PeriodicFunction::zeros(4)).with_offset(w);
        assert!(matches!(mode_lock_interval(&family, 0.1, &alpha, &opts(16, 16)), Err(Error::Precondition(_))));
    }

    #[test]
    fn sine_family_interval() {
        let alpha = Frequency::golden();
        let sin = crate::maps::Expr::parse("sin(r)").unwrap();
        let base = ForcedMap::expression(sin, true).unwrap();
        let family = move |w: f64| base.with_offset(w);
        let lock = mode_lock_interval(&family, 1e-3, &alpha, &opts(8, 64)).unwrap();
        assert!((lock.omega_lower + 1.0).abs() < 1e-9);
        assert!((lock.omega_upper - 1.0).abs() < 1e-9);
        assert_eq!(lock.midpoint_roots, 2);
    }
}
