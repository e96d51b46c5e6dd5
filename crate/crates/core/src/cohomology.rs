//! Linear functional equations over the rotation `θ ↦ θ + 2πα`:
//! the cohomological equation `G(θ+2πα) − G(θ) = p(θ)` and the twisted
//! equation `φ(θ+2πα) − a(θ)φ(θ) = p(θ) + ν`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arithmetic::Frequency;
use crate::error::{Error, Result};
use crate::maps::ForcedMap;
use crate::periodic::{dealias_grid, grid, PeriodicFunction, MEAN_TOLERANCE};

/// Smallest divisor `|e^{2πinα} − λ|` accepted for modes `|n| ≤ order`.
///
/// For constant type α the true divisors stay above `4δ/|n|`, so anything
/// below half of that at the truncation order means the input is bad.
pub fn divisor_floor(alpha: &Frequency, order: usize) -> f64 {
    (2.0 * alpha.delta() / order.max(1) as f64).max(1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinDEOptions {
    /// Collocation grid is `grid_factor · N` points.
    pub grid_factor: usize,
    /// Fail on a divisor below the floor instead of dropping that mode.
    pub strict: bool,
}

impl Default for LinDEOptions {
    fn default() -> Self {
        Self { grid_factor: 4, strict: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinDESolution {
    pub phi: PeriodicFunction,
    pub nu: f64,
    pub residual_sup: f64,
    pub divisor_floor_hit: bool,
    /// `exp(mean log a)`.
    pub lambda_a: f64,
    /// `‖φ‖_{L²} / ‖Dp‖_{L²}` (0 when `Dp = 0`).
    pub norm_ratio: f64,
}

/// Zero-mean solution of `G(θ+2πα) − G(θ) = p(θ)`.
pub fn solve_constant(p: &PeriodicFunction, alpha: &Frequency) -> Result<PeriodicFunction> {
    solve_constant_inner(p, alpha, true).map(|(g, _)| g)
}

fn solve_constant_inner(p: &PeriodicFunction, alpha: &Frequency, strict: bool) -> Result<(PeriodicFunction, bool)> {
    if let Some(q) = alpha.denominator() {
        return Err(Error::Resonance { n: q as i64 });
    }
    let mean = p.mean();
    if mean.abs() > MEAN_TOLERANCE {
        return Err(Error::Unsolvable { mean });
    }
    let floor = divisor_floor(alpha, p.order());
    let mut hit = false;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); p.order() + 1];
    for (n, out) in coeffs.iter_mut().enumerate().skip(1) {
        let d = alpha.phase(n as i64) - 1.0;
        if d.norm() < floor {
            if strict {
                return Err(Error::NearResonance { n: n as i64, divisor: d.norm(), floor });
            }
            hit = true;
            continue;
        }
        *out = p.coeffs()[n] / d;
    }
    Ok((PeriodicFunction::new(coeffs), hit))
}

/// Mode-by-mode solution of `ψ(θ+2πα) − λψ(θ) = q(θ)` for `n ≥ 1`; mode 0 is left at zero.
fn diagonal_solve(
    q: &PeriodicFunction,
    lambda: f64,
    alpha: &Frequency,
    floor: f64,
    strict: bool,
) -> Result<(PeriodicFunction, bool)> {
    let mut hit = false;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); q.order() + 1];
    for (n, out) in coeffs.iter_mut().enumerate().skip(1) {
        let d = alpha.phase(n as i64) - lambda;
        if d.norm() < floor {
            if strict {
                return Err(Error::NearResonance { n: n as i64, divisor: d.norm(), floor });
            }
            hit = true;
            continue;
        }
        *out = q.coeffs()[n] / d;
    }
    Ok((PeriodicFunction::new(coeffs), hit))
}

pub fn solve_linde(a: &PeriodicFunction, p: &PeriodicFunction, alpha: &Frequency) -> Result<LinDESolution> {
    solve_linde_with(a, p, alpha, &LinDEOptions::default())
}

/// Solves `φ(θ+2πα) − a(θ)φ(θ) = p(θ) + ν` for zero-mean `φ` and real `ν`
/// by writing `a = λ_a · b∘R_α / b` and substituting `φ = bψ`.
pub fn solve_linde_with(
    a: &PeriodicFunction,
    p: &PeriodicFunction,
    alpha: &Frequency,
    opts: &LinDEOptions,
) -> Result<LinDESolution> {
    let order = a.order().max(p.order()).max(1);
    let m = (opts.grid_factor * order).max(2 * order + 2);
    let a_vals = a.samples(m);
    let min_a = a_vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_a > 0.0) {
        return Err(Error::NotPositive { min: min_a });
    }
    let log_a = PeriodicFunction::from_samples(&a_vals.iter().map(|v| v.ln()).collect::<Vec<_>>(), order)?;
    let mean_log = log_a.mean();
    let lambda_a = mean_log.exp();
    let fluct = log_a.add_constant(-mean_log);

    let mut hit = false;
    let v = if fluct.sup_norm_bound() == 0.0 {
        PeriodicFunction::zeros(order)
    } else {
        let (v, h) = solve_constant_inner(&fluct, alpha, opts.strict)?;
        hit |= h;
        v
    };
    let b: Vec<f64> = v.samples(m).iter().map(|x| x.exp()).collect();
    let b_rot: Vec<f64> = v.shift(alpha.alpha()).samples(m).iter().map(|x| x.exp()).collect();
    let p_vals = p.samples(m);
    let q_p = PeriodicFunction::from_samples(&p_vals.iter().zip(&b_rot).map(|(x, y)| x / y).collect::<Vec<_>>(), order)?;
    let q_1 = PeriodicFunction::from_samples(&b_rot.iter().map(|y| 1.0 / y).collect::<Vec<_>>(), order)?;

    let floor = divisor_floor(alpha, order);
    let (psi_p, h1) = diagonal_solve(&q_p, lambda_a, alpha, floor, opts.strict)?;
    let (psi_1, h2) = diagonal_solve(&q_1, lambda_a, alpha, floor, opts.strict)?;
    hit |= h1 | h2;

    // Mode 0 and ν together: (1 − λ_a)s − q̂₁₀ν = q̂_p0 and mean(b·(s + ψ_p + νψ₁)) = 0.
    let mean_b = b.iter().sum::<f64>() / m as f64;
    let grid_mean = |f: &PeriodicFunction| f.samples(m).iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / m as f64;
    let m_p = grid_mean(&psi_p);
    let m_1 = grid_mean(&psi_1);
    let (a11, a12, a21, a22) = (1.0 - lambda_a, -q_1.mean(), mean_b, m_1);
    let (r1, r2) = (q_p.mean(), -m_p);
    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-300 {
        return Err(Error::NearResonance { n: 0, divisor: det.abs(), floor });
    }
    let s = (r1 * a22 - a12 * r2) / det;
    let nu = (a11 * r2 - a21 * r1) / det;

    let psi = (&psi_p + &psi_1.scale(nu)).add_constant(s);
    let phi_vals: Vec<f64> = psi.samples(m).iter().zip(&b).map(|(x, y)| x * y).collect();
    let mut phi = PeriodicFunction::from_samples(&phi_vals, order)?;
    phi = phi.add_constant(-phi.mean());

    let residual_sup = linde_residual(&phi, nu, a, p, alpha, m);
    let dp = p.derivative().sobolev_norm(0);
    let norm_ratio = if dp > 0.0 { phi.sobolev_norm(0) / dp } else { 0.0 };
    Ok(LinDESolution { phi, nu, residual_sup, divisor_floor_hit: hit, lambda_a, norm_ratio })
}

/// `sup_j |φ(θⱼ+2πα) − a(θⱼ)φ(θⱼ) − p(θⱼ) − ν|` on an `m`-point grid.
pub fn linde_residual(
    phi: &PeriodicFunction,
    nu: f64,
    a: &PeriodicFunction,
    p: &PeriodicFunction,
    alpha: &Frequency,
    m: usize,
) -> f64 {
    let shifted = phi.shift(alpha.alpha()).samples(m);
    let phi_v = phi.samples(m);
    let a_v = a.samples(m);
    let p_v = p.samples(m);
    (0..m).map(|j| (shifted[j] - a_v[j] * phi_v[j] - p_v[j] - nu).abs()).fold(0.0, f64::max)
}

/// Collocation solve of the twisted equation on an `M`-point grid as a dense
/// `(M+1) × (M+1)` system; `φ` is returned truncated to `order`.
pub fn solve_linde_dense(
    a: &PeriodicFunction,
    p: &PeriodicFunction,
    alpha: &Frequency,
    m: usize,
    order: usize,
) -> Result<LinDESolution> {
    if m < 3 {
        return Err(Error::InvalidGrid(format!("dense grid needs at least 3 points, got {m}")));
    }
    let theta = grid(m);
    let shift = 2.0 * std::f64::consts::PI * alpha.alpha();
    let a_v = a.samples(m);
    let p_v = p.samples(m);
    let half = (m - 1) / 2;
    let mut mat = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for j in 0..m {
        let x = theta[j] + shift;
        for (k, &tk) in theta.iter().enumerate() {
            let t = x - tk;
            let mut s = 1.0 + 2.0 * (1..=half).map(|n| (n as f64 * t).cos()).sum::<f64>();
            if m % 2 == 0 {
                s += (m as f64 / 2.0 * t).cos();
            }
            mat[(j, k)] = s / m as f64;
        }
        mat[(j, j)] -= a_v[j];
        mat[(j, m)] = -1.0;
        rhs[j] = p_v[j];
        mat[(m, j)] = 1.0;
    }
    let svd = mat.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::NearResonance { n: 0, divisor: smin, floor: 1e-13 * smax });
    }
    let sol = mat.lu().solve(&rhs).ok_or(Error::NearResonance { n: 0, divisor: 0.0, floor: 0.0 })?;
    let phi_vals: Vec<f64> = sol.iter().take(m).copied().collect();
    let nu = sol[m];
    let mut phi = PeriodicFunction::from_samples(&phi_vals, order)?;
    phi = phi.add_constant(-phi.mean());
    let check = dealias_grid(order.max(a.order()).max(p.order()));
    let residual_sup = linde_residual(&phi, nu, a, p, alpha, check);
    let dp = p.derivative().sobolev_norm(0);
    let norm_ratio = if dp > 0.0 { phi.sobolev_norm(0) / dp } else { 0.0 };
    Ok(LinDESolution { phi, nu, residual_sup, divisor_floor_hit: false, lambda_a: f64::NAN, norm_ratio })
}

/// One slice `H(r, ·)` of the averaging change of variables `ρ = r + εH(r, θ)`.
#[derive(Clone, Debug, Serialize)]
pub struct AveragingSlice {
    pub r: f64,
    /// `F̄(r) = (1/2π)∫F(r, θ) dθ`.
    pub mean: f64,
    pub h: PeriodicFunction,
}

/// `H(r, ·)` solving `H(r, θ+2πα) − H(r, θ) + F̃(r, θ) = 0` at a single `r`.
pub fn averaging_slice(map: &ForcedMap, eps: f64, alpha: &Frequency, r: f64, order: usize) -> Result<AveragingSlice> {
    let m = dealias_grid(order);
    let values: Vec<f64> = map.partials_on_grid(&vec![r; m], eps).iter().map(|p| p.f).collect();
    let f = PeriodicFunction::from_samples(&values, order)?;
    let mean = f.mean();
    let h = solve_constant(&(-&f.add_constant(-mean)), alpha)?;
    Ok(AveragingSlice { r, mean, h })
}

pub fn averaging_conjugacy(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    r_grid: &[f64],
    order: usize,
) -> Result<Vec<AveragingSlice>> {
    r_grid.par_iter().map(|&r| averaging_slice(map, eps, alpha, r, order)).collect()
}
