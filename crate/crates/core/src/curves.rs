//! Translated curves `r = ψ_c(θ)` with `ψ(θ+2πα) = ψ(θ) + ω₀ + εF(ψ(θ), θ; ε) + λ`
//! and mean `c`, computed by iterating the differentiated equation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::arithmetic::Frequency;
use crate::cohomology::{solve_linde_with, LinDEOptions};
use crate::error::{Error, Result};
use crate::maps::{ForcedMap, Partial};
use crate::periodic::{compose_map_partial, dealias_grid, grid, PeriodicFunction};

#[derive(Clone, Debug, Serialize)]
pub struct CurveOptions {
    /// Initial truncation order `N`.
    pub order: usize,
    /// Largest order reached by adaptive doubling.
    pub max_order: usize,
    pub adaptive: bool,
    /// Tail energy ratio above which `N` is doubled.
    pub tail_tolerance: f64,
    pub max_iter: usize,
    /// Relative stopping tolerance on `‖Dψₙ₊₁ − Dψₙ‖_{L²}`.
    pub tol_step: f64,
    pub tol_residual: f64,
    /// Admissible range of `a = 1 + εF_r∘ψ`.
    pub a_box: (f64, f64),
    pub d2_ceiling: f64,
    pub grid_factor: usize,
    /// Starting curve; its mean is reset to `c`.
    #[serde(skip)]
    pub initial: Option<PeriodicFunction>,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            order: 256,
            max_order: 4096,
            adaptive: true,
            tail_tolerance: 1e-24,
            max_iter: 200,
            tol_step: 1e-11,
            tol_residual: 1e-9,
            a_box: (0.5, 1.5),
            d2_ceiling: 1.0,
            grid_factor: 4,
            initial: None,
        }
    }
}

impl CurveOptions {
    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self.max_order = self.max_order.max(order);
        self
    }

    pub fn with_initial(mut self, initial: PeriodicFunction) -> Self {
        self.initial = Some(initial);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslatedCurve {
    pub psi: PeriodicFunction,
    pub c: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub residual_sup: f64,
    /// Residual on a grid twice as fine as the build grid.
    pub residual_fine: f64,
    pub d2_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: Option<String>,
    pub step_history: Vec<f64>,
    pub nu_history: Vec<f64>,
    pub tail_energy: f64,
    pub a_range: (f64, f64),
}

impl TranslatedCurve {
    pub fn order(&self) -> usize {
        self.psi.order()
    }
}

/// `(mean, max |x − mean|)` of `ψ∘R − ψ − ω₀ − εF(ψ, θ)` on an `m`-point grid.
pub fn functional_residual(map: &ForcedMap, eps: f64, alpha: &Frequency, psi: &PeriodicFunction, m: usize) -> (f64, f64) {
    let values = psi.samples(m);
    let shifted = psi.shift(alpha.alpha()).samples(m);
    let partials = map.partials_on_grid(&values, eps);
    let defect: Vec<f64> =
        (0..m).map(|j| shifted[j] - values[j] - map.drift() - eps * partials[j].f).collect();
    let mean = defect.iter().sum::<f64>() / m as f64;
    let sup = defect.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    (mean, sup)
}

pub fn translated_curve(map: &ForcedMap, eps: f64, alpha: &Frequency, c: f64, opts: &CurveOptions) -> Result<TranslatedCurve> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Precondition(format!("ε must be finite and non-negative, got {eps}")));
    }
    if !c.is_finite() {
        return Err(Error::Precondition(format!("mean level must be finite, got {c}")));
    }
    if opts.order == 0 {
        return Err(Error::InvalidGrid("curve order must be positive".into()));
    }
    let mut order = opts.order;
    let mut start = opts.initial.clone().map(|f| f.resized(order));
    let mut total_iterations = 0;
    let mut step_history = Vec::new();
    let mut nu_history = Vec::new();
    loop {
        let solved = iterate(map, eps, alpha, c, order, start.take(), opts)?;
        total_iterations += solved.iterations;
        step_history.extend(solved.steps);
        nu_history.extend(solved.nus);
        let psi = solved.psi;
        let tail = psi.tail_energy_ratio();
        if opts.adaptive && tail > opts.tail_tolerance && 2 * order <= opts.max_order {
            order *= 2;
            start = Some(psi.resized(order));
            continue;
        }
        let m = dealias_grid(order);
        let (lambda, residual_sup) = functional_residual(map, eps, alpha, &psi, m);
        let (_, residual_fine) = functional_residual(map, eps, alpha, &psi, 2 * m);
        let d2_norm = psi.sobolev_norm(2);
        let mut breakdown = None;
        if residual_sup > opts.tol_residual {
            breakdown = Some(format!("residual {residual_sup:e} above tolerance {:e}", opts.tol_residual));
        } else if d2_norm > opts.d2_ceiling {
            breakdown = Some(format!("‖D²ψ‖ = {d2_norm:.6} exceeds ceiling {}", opts.d2_ceiling));
        }
        return Ok(TranslatedCurve {
            psi,
            c,
            epsilon: eps,
            lambda,
            residual_sup,
            residual_fine,
            d2_norm,
            iterations: total_iterations,
            converged: breakdown.is_none(),
            breakdown,
            step_history,
            nu_history,
            tail_energy: tail,
            a_range: solved.a_range,
        });
    }
}

struct Iterated {
    psi: PeriodicFunction,
    iterations: usize,
    steps: Vec<f64>,
    nus: Vec<f64>,
    a_range: (f64, f64),
}

fn iterate(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c: f64,
    order: usize,
    start: Option<PeriodicFunction>,
    opts: &CurveOptions,
) -> Result<Iterated> {
    let mut psi = match start {
        Some(f) => f.add_constant(c - f.mean()),
        None => PeriodicFunction::constant(c, order),
    };
    let mut dpsi = psi.derivative();
    let m = dealias_grid(order);
    let linde = LinDEOptions { grid_factor: opts.grid_factor, strict: true };
    let (lo, hi) = opts.a_box;
    let mut steps = Vec::new();
    let mut nus = Vec::new();
    for iteration in 1..=opts.max_iter {
        let partials = map.partials_on_grid(&psi.samples(m), eps);
        let a_vals: Vec<f64> = partials.iter().map(|p| 1.0 + eps * p.fr).collect();
        let p_vals: Vec<f64> = partials.iter().map(|p| eps * p.ft).collect();
        let min = a_vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = a_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let a_range = (min, max);
        if !(min >= lo - 1e-12 && max <= hi + 1e-12) {
            return Err(Error::EpsilonTooLarge { eps, min, max, lo, hi, iteration });
        }
        let a = PeriodicFunction::from_samples(&a_vals, order)?;
        let p = PeriodicFunction::from_samples(&p_vals, order)?;
        let sol = solve_linde_with(&a, &p, alpha, &linde)?;
        let step = (&sol.phi - &dpsi).sobolev_norm(0);
        let scale = 1.0 + dpsi.sobolev_norm(0);
        steps.push(step);
        nus.push(sol.nu);
        dpsi = sol.phi;
        psi = dpsi.zero_mean_primitive()?.add_constant(c);
        if !step.is_finite() {
            break;
        }
        if step < opts.tol_step * scale {
            return Ok(Iterated { psi, iterations: iteration, steps, nus, a_range });
        }
    }
    let last = steps.last().copied().unwrap_or(f64::NAN);
    Err(Error::Divergence { iterations: steps.len(), last, history: steps })
}

/// `δ = ∂_cψ_c` together with `Φ'(c)`.
#[derive(Clone, Debug, Serialize)]
pub struct CurveDerivative {
    pub delta: PeriodicFunction,
    /// `Φ'(c) = mean(F_r(ψ_c, ·) δ)`.
    pub dphi_dc: f64,
    /// `−ν/ε` from the variational solve (NaN at ε = 0).
    pub dphi_dc_from_nu: f64,
    /// `‖Dδ‖_{L²}`.
    pub d_norm: f64,
    pub residual_sup: f64,
}

pub fn dpsi_dc(curve: &TranslatedCurve, map: &ForcedMap, alpha: &Frequency) -> Result<CurveDerivative> {
    if !curve.converged {
        return Err(Error::NotConverged { c: curve.c });
    }
    let eps = curve.epsilon;
    let order = curve.order();
    let fr = compose_map_partial(map, Partial::Dr, &curve.psi, eps);
    let p = fr.scale(eps);
    let a = p.add_constant(1.0);
    let sol = solve_linde_with(&a, &p, alpha, &LinDEOptions::default())?;
    let delta = sol.phi.add_constant(1.0);
    let dphi_dc = fr.product(&delta).mean();
    let dphi_dc_from_nu = if eps > 0.0 { -sol.nu / eps } else { f64::NAN };
    let d_norm = delta.derivative().sobolev_norm(0);
    debug_assert_eq!(delta.order(), order);
    Ok(CurveDerivative { delta, dphi_dc, dphi_dc_from_nu, d_norm, residual_sup: sol.residual_sup })
}

#[derive(Clone, Debug, Serialize)]
pub struct FoliationReport {
    pub curves: Vec<TranslatedCurve>,
    /// `max ‖Dψ_{c₁} − Dψ_{c₂}‖ / (ε|c₁ − c₂|)` over neighbouring levels.
    pub k_emp: f64,
    /// Smallest `min_θ (ψ_{c_j} − ψ_{c_i})` over neighbouring levels `c_i < c_j`.
    pub min_gap: f64,
}

/// Levels handled sequentially with warm starts inside one parallel task.
const SWEEP_CHUNK: usize = 8;

/// Curves for each level `c`, in input order, warm-started from the previous
/// level in the same chunk.
pub fn sweep_curves(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c_values: &[f64],
    opts: &CurveOptions,
) -> Vec<Result<TranslatedCurve>> {
    c_values
        .par_chunks(SWEEP_CHUNK)
        .flat_map_iter(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut prev: Option<TranslatedCurve> = None;
            for &c in chunk {
                let mut local = opts.clone();
                if let Some(p) = prev.as_ref().filter(|p| p.converged) {
                    local.initial = Some(p.psi.add_constant(c - p.c));
                    local.order = p.order();
                    local.max_order = local.max_order.max(local.order);
                }
                let mut res = translated_curve(map, eps, alpha, c, &local);
                if res.is_err() && local.initial.is_some() {
                    res = translated_curve(map, eps, alpha, c, opts);
                }
                prev = res.as_ref().ok().cloned();
                out.push(res);
            }
            out
        })
        .collect()
}

pub fn foliation_sweep(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c_values: &[f64],
    opts: &CurveOptions,
) -> Result<FoliationReport> {
    let mut curves = Vec::with_capacity(c_values.len());
    for res in sweep_curves(map, eps, alpha, c_values, opts) {
        let curve = res?;
        if !curve.converged {
            return Err(Error::NotConverged { c: curve.c });
        }
        curves.push(curve);
    }
    let mut order: Vec<usize> = (0..curves.len()).collect();
    order.sort_by(|&i, &j| curves[i].c.total_cmp(&curves[j].c));
    let mut k_emp = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for w in order.windows(2) {
        let (lo, hi) = (&curves[w[0]], &curves[w[1]]);
        if hi.c == lo.c {
            continue;
        }
        let n = lo.order().max(hi.order());
        let m = 2 * dealias_grid(n);
        let gap = lo
            .psi
            .samples(m)
            .iter()
            .zip(hi.psi.samples(m))
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            return Err(Error::FoliationViolation { c1: lo.c, c2: hi.c, gap });
        }
        min_gap = min_gap.min(gap);
        if eps > 0.0 {
            let diff = (&hi.psi.resized(n).derivative() - &lo.psi.resized(n).derivative()).sobolev_norm(0);
            k_emp = k_emp.max(diff / (eps * (hi.c - lo.c)));
        }
    }
    Ok(FoliationReport { curves, k_emp, min_gap })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationPoint {
    pub epsilon: f64,
    pub d2_norm: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub residual_sup: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationReport {
    pub trace: Vec<ContinuationPoint>,
    /// First ε at which the curve was lost, with the reason.
    pub breakdown: Option<(f64, String)>,
    #[serde(skip)]
    pub curves: Vec<TranslatedCurve>,
}

/// Follows the curve of mean `c` along an increasing ε ladder, warm-starting
/// each solve from the previous one, until the first breakdown.
pub fn continuation_in_eps(
    map: &ForcedMap,
    alpha: &Frequency,
    c: f64,
    ladder: &[f64],
    opts: &CurveOptions,
) -> Result<ContinuationReport> {
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("ε ladder must be strictly increasing".into()));
    }
    let mut trace = Vec::new();
    let mut curves: Vec<TranslatedCurve> = Vec::new();
    let mut breakdown = None;
    for &eps in ladder {
        let mut local = opts.clone();
        if let Some(prev) = curves.last() {
            local.initial = Some(prev.psi.clone());
            local.order = prev.order();
            local.max_order = local.max_order.max(local.order);
        }
        match translated_curve(map, eps, alpha, c, &local) {
            Ok(curve) => {
                trace.push(ContinuationPoint {
                    epsilon: eps,
                    d2_norm: curve.d2_norm,
                    lambda: curve.lambda,
                    iterations: curve.iterations,
                    residual_sup: curve.residual_sup,
                    converged: curve.converged,
                });
                if let Some(reason) = &curve.breakdown {
                    breakdown = Some((eps, reason.clone()));
                    curves.push(curve);
                    break;
                }
                curves.push(curve);
            }
            Err(e) if e.is_convergence_failure() => {
                breakdown = Some((eps, e.to_string()));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ContinuationReport { trace, breakdown, curves })
}

/// Proof that no translated curve exists for rational `α = p/q`: along any
/// orbit segment of length `q` starting at `θ*` every increment is at least
/// `margin_upper/q` on average, while starting at `θ_*` it is negative.
#[derive(Clone, Debug, Serialize)]
pub struct ObstructionCertificate {
    pub p: u64,
    pub q: u64,
    pub theta_upper: f64,
    pub theta_lower: f64,
    /// `Σ_k min_r F(r, θ* + 2πkα) > 0`.
    pub margin_upper: f64,
    /// `Σ_k max_r F(r, θ_* + 2πkα) < 0`.
    pub margin_lower: f64,
    pub r_range: (f64, f64),
    pub r_samples: usize,
    pub theta_samples: usize,
}

const OBSTRUCTION_THETA_GRID: usize = 4096;

/// Grid search for the sign obstruction; `None` means inconclusive.
pub fn rational_obstruction(map: &ForcedMap, eps: f64, alpha: &Frequency) -> Result<Option<ObstructionCertificate>> {
    let (p, q) = match alpha.kind() {
        crate::arithmetic::FrequencyKind::Rational { p, q } => (*p, *q),
        _ => return Err(Error::Precondition("obstruction search needs a rational α".into())),
    };
    let (r_range, r_samples) = if map.periodic_in_r() { ((0.0, 2.0 * PI), 512) } else { ((-10.0, 10.0), 2001) };
    let rs: Vec<f64> = (0..r_samples)
        .map(|i| {
            let span = r_range.1 - r_range.0;
            if map.periodic_in_r() {
                r_range.0 + span * i as f64 / r_samples as f64
            } else {
                r_range.0 + span * i as f64 / (r_samples - 1) as f64
            }
        })
        .collect();
    let thetas: Vec<f64> = grid(OBSTRUCTION_THETA_GRID)
        .into_iter()
        .map(|t| if t > PI { t - 2.0 * PI } else { t })
        .collect();
    let margins: Vec<(f64, f64)> = thetas
        .par_iter()
        .map(|&theta| {
            let mut lower_sum = 0.0;
            let mut upper_sum = 0.0;
            for k in 0..q {
                let tk = theta + 2.0 * PI * k as f64 * alpha.alpha();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &r in &rs {
                    let v = map.eval(r, tk, eps);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                lower_sum += lo;
                upper_sum += hi;
            }
            (lower_sum, upper_sum)
        })
        .collect();
    let pick = |key: &dyn Fn(usize) -> f64| -> usize {
        let best = (0..thetas.len()).map(key).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * (1.0 + best.abs());
        (0..thetas.len())
            .filter(|&i| key(i) >= best - tol)
            .min_by(|&i, &j| {
                let (a, b) = (thetas[i], thetas[j]);
                a.abs().total_cmp(&b.abs()).then(b.total_cmp(&a))
            })
            .expect("grid is non-empty")
    };
    let up = pick(&|i| margins[i].0);
    let down = pick(&|i| -margins[i].1);
    let (margin_upper, margin_lower) = (margins[up].0, margins[down].1);
    let scale = margins.iter().map(|(a, b)| a.abs().max(b.abs())).fold(0.0, f64::max);
    let tol = 1e-10 * (1.0 + scale);
    if margin_upper > tol && margin_lower < -tol {
        Ok(Some(ObstructionCertificate {
            p,
            q,
            theta_upper: thetas[up],
            theta_lower: thetas[down],
            margin_upper,
            margin_lower,
            r_range,
            r_samples,
            theta_samples: OBSTRUCTION_THETA_GRID,
        }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CurveOptions {
        CurveOptions::default().with_order(32)
    }

    #[test]
    fn zero_map_gives_flat_curve() {
        let curve = translated_curve(&ForcedMap::zero(), 0.3, &Frequency::golden(), 1.7, &small()).unwrap();
        assert!(curve.converged);
        assert_eq!(curve.iterations, 1);
        assert_eq!(curve.lambda, 0.0);
        assert!((curve.psi.mean() - 1.7).abs() < 1e-15);
        assert!(curve.psi.derivative().sup_norm_bound() == 0.0);
    }

    #[test]
    fn theta_only_map_is_solved_exactly() {
        let alpha = Frequency::golden();
        let p = PeriodicFunction::from_cos_sin(0.3, &[1.0, 0.5], &[0.2], 32);
        let eps = 0.2;
        let curve = translated_curve(&ForcedMap::theta_only(p.clone()), eps, &alpha, 0.4, &small()).unwrap();
        assert!((curve.lambda + eps * 0.3).abs() < 1e-13);
        let g = crate::cohomology::solve_constant(&p.add_constant(-0.3), &alpha).unwrap().scale(eps);
        assert!(curve.psi.add_constant(-0.4).max_coeff_diff(&g) < 1e-13);
    }

    #[test]
    fn arnold_curve_residual_and_mean() {
        let alpha = Frequency::golden();
        let map = ForcedMap::transformed_arnold(0.1, 0.6, 0.3, &alpha).unwrap();
        let curve = translated_curve(&map, 0.05, &alpha, 0.5, &CurveOptions::default().with_order(64)).unwrap();
        assert!(curve.converged, "{:?}", curve.breakdown);
        assert!((curve.psi.mean() - 0.5).abs() < 1e-12);
        assert!(curve.residual_fine <= 10.0 * 1e-9);
        assert!(curve.nu_history.last().unwrap().abs() < 1e-10);
    }

    #[test]
    fn rational_alpha_rejected() {
        let r = Frequency::rational(1, 4).unwrap();
        let map = ForcedMap::rational_counterexample(4).unwrap();
        let res = translated_curve(&map, 0.1, &r, 0.0, &small());
        assert!(matches!(res, Err(Error::Resonance { .. }) | Err(Error::NearResonance { .. })), "{res:?}");
    }

    #[test]
    fn obstruction_for_rational_counterexample() {
        let alpha = Frequency::rational(1, 4).unwrap();
        let cert = rational_obstruction(&ForcedMap::rational_counterexample(4).unwrap(), 0.1, &alpha).unwrap().unwrap();
        assert!((cert.theta_upper - PI / 8.0).abs() < 1e-12);
        assert!((cert.theta_lower + PI / 8.0).abs() < 1e-12);
        assert!(cert.margin_upper > 0.0 && cert.margin_lower < 0.0);

        assert!(rational_obstruction(&ForcedMap::zero(), 0.1, &alpha).unwrap().is_none());
        let half = Frequency::rational(1, 2).unwrap();
        let sin = ForcedMap::theta_only(PeriodicFunction::from_cos_sin(0.0, &[], &[1.0], 4));
        assert!(rational_obstruction(&sin, 0.1, &half).unwrap().is_none());
    }
}
