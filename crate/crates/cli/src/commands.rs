use std::f64::consts::PI;

use serde_json::{json, Value};

use qpf_core::bifurcation::{find_invariant_curves, intervals_in, mode_lock_interval};
use qpf_core::curves::{continuation_in_eps, foliation_sweep, rational_obstruction, translated_curve, TranslatedCurve};
use qpf_core::dynamics::{fibred_rotation_number, lyapunov, orbit_sample};
use qpf_core::maps::{CylinderPoint, ForcedMap};
use qpf_core::periodic::{dealias_grid, grid};
use qpf_core::{Error, Frequency};

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

/// Files to write, the `result` section of the JSON report, and the exit code.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub result: Value,
    pub exit: i32,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Self { files: Vec::new(), result, exit: EXIT_OK }
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn fail(&mut self, err: &Error) {
        self.exit = exit_code(err);
        self.result["error"] = json!({ "kind": error_kind(err), "message": err.to_string(), "detail": error_detail(err) });
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_convergence_failure() => EXIT_CONVERGENCE,
        Error::FoliationViolation { .. } | Error::Inconsistent(_) => EXIT_CONVERGENCE,
        _ => EXIT_PRECONDITION,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidGrid(_) => "invalid_grid",
        Error::NonIntegrable { .. } => "non_integrable",
        Error::InvalidFrequency(_) => "invalid_frequency",
        Error::Resonance { .. } => "resonance",
        Error::NearResonance { .. } => "near_resonance",
        Error::Unsolvable { .. } => "unsolvable",
        Error::NotPositive { .. } => "not_positive",
        Error::Expression(_) => "expression",
        Error::InvalidMap(_) => "invalid_map",
        Error::Precondition(_) => "precondition",
        Error::EpsilonTooLarge { .. } => "epsilon_too_large",
        Error::Divergence { .. } => "divergence",
        Error::NotConverged { .. } => "not_converged",
        Error::FoliationViolation { .. } => "foliation_violation",
        Error::Inconsistent(_) => "inconsistent",
        Error::Escape { .. } => "escape",
    }
}

fn error_detail(err: &Error) -> Value {
    match err {
        Error::Divergence { history, .. } => json!({ "step_history": history }),
        Error::EpsilonTooLarge { eps, min, max, lo, hi, iteration } => {
            json!({ "epsilon": eps, "a_min": min, "a_max": max, "box": [lo, hi], "iteration": iteration })
        }
        Error::NearResonance { n, divisor, floor } => json!({ "mode": n, "divisor": divisor, "floor": floor }),
        Error::Resonance { n } => json!({ "mode": n }),
        _ => Value::Null,
    }
}

pub enum CommandError {
    Config(ConfigError),
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

type CmdResult = Result<Outcome, CommandError>;

pub fn frequency_diagnostics(alpha: &Frequency) -> Value {
    json!({
        "alpha": alpha.alpha(),
        "kind": alpha.kind(),
        "delta": alpha.delta(),
        "mu": if alpha.is_rational() { Value::Null } else { json!(alpha.mu()) },
        "rigorous": alpha.is_rigorous(),
        "partial_quotients": alpha.partial_quotients().iter().take(16).collect::<Vec<_>>(),
    })
}

fn build_map(cfg: &RunConfig, alpha: &Frequency) -> Result<ForcedMap, Outcome> {
    cfg.map.build(alpha, cfg.modes).map_err(|e| {
        let mut out = Outcome::ok(json!({}));
        out.fail(&e);
        out
    })
}

fn curve_summary(curve: &TranslatedCurve) -> Value {
    json!({
        "c": curve.c,
        "epsilon": curve.epsilon,
        "lambda": curve.lambda,
        "residual_sup": curve.residual_sup,
        "residual_fine": curve.residual_fine,
        "d2_norm": curve.d2_norm,
        "iterations": curve.iterations,
        "converged": curve.converged,
        "breakdown": curve.breakdown,
        "order": curve.order(),
        "tail_energy": curve.tail_energy,
        "a_range": [curve.a_range.0, curve.a_range.1],
        "step_history": curve.step_history,
        "nu_history": curve.nu_history,
    })
}

fn curve_table(curve: &TranslatedCurve) -> String {
    let m = dealias_grid(curve.order());
    let mut t = Table::new(&["theta", "psi"]);
    for (theta, v) in grid(m).into_iter().zip(curve.psi.samples(m)) {
        t.row(&[num(theta), num(v)]);
    }
    t.finish()
}

fn linspace(range: [f64; 2], count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![range[0]];
    }
    (0..count).map(|i| range[0] + (range[1] - range[0]) * i as f64 / (count - 1) as f64).collect()
}

pub fn curve(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let c = cfg.require_c()?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let mut out = Outcome::ok(json!({}));
    if alpha.is_rational() {
        match rational_obstruction(&map, eps, &alpha) {
            Ok(cert) => out.result["obstruction"] = json!(cert),
            Err(e) => out.result["obstruction_error"] = json!(e.to_string()),
        }
    }
    match translated_curve(&map, eps, &alpha, c, &cfg.curve_options()) {
        Ok(curve) => {
            out.file("curve.csv", curve_table(&curve));
            out.file("coefficients.csv", curve.psi.to_coeff_csv());
            out.result["curve"] = curve_summary(&curve);
            if !curve.converged {
                out.exit = EXIT_CONVERGENCE;
            }
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn sweep(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let cs = linspace(cfg.c_range, cfg.c_count);
    let mut out = Outcome::ok(json!({}));
    match foliation_sweep(&map, eps, &alpha, &cs, &cfg.curve_options()) {
        Ok(report) => {
            let mut summary = Table::new(&["c", "lambda", "residual_sup", "residual_fine", "d2_norm", "iterations"]);
            let mut curves = Table::new(&["c", "theta", "psi"]);
            for curve in &report.curves {
                summary.row(&[
                    num(curve.c),
                    num(curve.lambda),
                    num(curve.residual_sup),
                    num(curve.residual_fine),
                    num(curve.d2_norm),
                    curve.iterations.to_string(),
                ]);
                for (theta, v) in grid(256).into_iter().zip(curve.psi.samples(256)) {
                    curves.row(&[num(curve.c), num(theta), num(v)]);
                }
            }
            out.file("sweep.csv", summary.finish());
            out.file("curves.csv", curves.finish());
            out.result = json!({
                "k_emp": report.k_emp,
                "min_gap": report.min_gap,
                "curves": report.curves.iter().map(|c| json!({
                    "c": c.c, "lambda": c.lambda, "residual_sup": c.residual_sup,
                    "d2_norm": c.d2_norm, "iterations": c.iterations, "order": c.order(),
                })).collect::<Vec<_>>(),
            });
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn find_invariant(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let mut out = Outcome::ok(json!({}));
    match find_invariant_curves(&map, eps, &alpha, (cfg.c_range[0], cfg.c_range[1]), &cfg.bifurcation_options()) {
        Ok(report) => {
            let mut phi = Table::new(&["c", "phi"]);
            for &(c, v) in &report.phi_samples {
                phi.row(&[num(c), num(v)]);
            }
            let mut roots = Table::new(&["root", "c", "phi", "dphi_dc", "chi_plus", "classification", "degenerate_suspect"]);
            let mut curves = Table::new(&["root", "theta", "psi"]);
            for (i, r) in report.roots.iter().enumerate() {
                roots.row(&[
                    i.to_string(),
                    num(r.c),
                    num(r.phi),
                    num(r.dphi_dc),
                    num(r.chi_plus),
                    json!(r.classification).as_str().unwrap_or_default().to_string(),
                    r.degenerate_suspect.to_string(),
                ]);
                let m = dealias_grid(r.curve.order());
                for (theta, v) in grid(m).into_iter().zip(r.curve.psi.samples(m)) {
                    curves.row(&[i.to_string(), num(theta), num(v)]);
                }
            }
            out.file("phi.csv", phi.finish());
            out.file("roots.csv", roots.finish());
            out.file("invariant_curves.csv", curves.finish());
            out.result = json!({
                "roots": report.roots.iter().map(|r| json!({
                    "c": r.c, "phi": r.phi, "dphi_dc": r.dphi_dc, "chi_plus": r.chi_plus,
                    "classification": r.classification, "degenerate_suspect": r.degenerate_suspect,
                    "lambda": r.lambda, "curve": curve_summary(&r.curve),
                })).collect::<Vec<_>>(),
                "identically_zero": report.identically_zero,
                "samples": report.phi_samples.len(),
            });
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn mode_lock(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let alpha = cfg.frequency();
    let base_spec = cfg.map.without_omega1();
    let base = match base_spec.build(&alpha, cfg.modes) {
        Ok(m) => m,
        Err(e) => {
            let mut out = Outcome::ok(json!({}));
            out.fail(&e);
            return Ok(out);
        }
    };
    let family = move |w: f64| base.with_offset(w);
    let opts = cfg.bifurcation_options();
    let mut out = Outcome::ok(json!({}));
    match mode_lock_interval(&family, eps, &alpha, &opts) {
        Ok(lock) => {
            let mut t = Table::new(&["omega_lower", "omega_upper", "c_at_max", "c_at_min"]);
            t.row(&[num(lock.omega_lower), num(lock.omega_upper), num(lock.c_at_max), num(lock.c_at_min)]);
            out.file("mode_lock.csv", t.finish());
            out.result["interval"] = json!(lock);
            if cfg.n_range != [0, 0] {
                match intervals_in(&family, eps, &alpha, (cfg.n_range[0], cfg.n_range[1]), (cfg.omega_window[0], cfg.omega_window[1]), &opts) {
                    Ok(report) => {
                        let mut t = Table::new(&["n", "omega_lower", "omega_upper"]);
                        for i in &report.intervals {
                            match i.interval {
                                Some((lo, hi)) => t.row(&[i.n.to_string(), num(lo), num(hi)]),
                                None => t.row(&[i.n.to_string(), String::new(), String::new()]),
                            }
                        }
                        out.file("intervals.csv", t.finish());
                        out.result["intervals"] = json!(report.intervals);
                        out.result["overlap_warning"] = json!(report.overlap_warning);
                    }
                    Err(e) => out.fail(&e),
                }
            }
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn lyapunov_cmd(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let mut out = Outcome::ok(json!({}));
    let curves: Vec<TranslatedCurve> = match cfg.c {
        Some(c) => match translated_curve(&map, eps, &alpha, c, &cfg.curve_options()) {
            Ok(curve) => vec![curve],
            Err(e) => {
                out.fail(&e);
                return Ok(out);
            }
        },
        None => {
            match find_invariant_curves(&map, eps, &alpha, (cfg.c_range[0], cfg.c_range[1]), &cfg.bifurcation_options()) {
                Ok(report) => report.roots.into_iter().map(|r| r.curve).collect(),
                Err(e) => {
                    out.fail(&e);
                    return Ok(out);
                }
            }
        }
    };
    let mut table = Table::new(&["curve", "c", "n", "average"]);
    let mut entries = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        match lyapunov(curve, &map, &alpha, cfg.theta0, cfg.n_max) {
            Ok(prod) => {
                for &(n, avg) in &prod.log_products {
                    table.row(&[i.to_string(), num(curve.c), n.to_string(), num(avg)]);
                }
                entries.push(json!({
                    "c": curve.c,
                    "lambda": curve.lambda,
                    "chi_plus_integral": prod.chi_plus_integral,
                    "c_emp": prod.c_emp,
                    "final_average": prod.log_products.last().map(|p| p.1),
                }));
            }
            Err(e) => {
                out.fail(&e);
                return Ok(out);
            }
        }
    }
    out.file("lyapunov.csv", table.finish());
    out.result["curves"] = json!(entries);
    Ok(out)
}

pub fn orbit(cfg: &RunConfig) -> CmdResult {
    let eps = cfg.require_epsilon()?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let x0 = CylinderPoint::new(cfg.x0[0], cfg.x0[1]);
    let mut out = Outcome::ok(json!({}));
    match orbit_sample(&map, eps, &alpha, x0, cfg.n_transient, cfg.n_keep) {
        Ok(points) => {
            let mut t = Table::new(&["n", "r", "theta"]);
            for (k, p) in points.iter().enumerate() {
                t.row(&[(cfg.n_transient + k + 1).to_string(), num(p.r), num(p.theta)]);
            }
            out.file("orbit.csv", t.finish());
            out.result["points"] = json!(points.len());
            if map.periodic_in_r() {
                match fibred_rotation_number(&map, eps, &alpha, x0, cfg.n_transient + cfg.n_keep) {
                    Ok(rho) => out.result["fibred_rotation_number"] = json!(rho),
                    Err(e) => out.fail(&e),
                }
            }
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn continuation(cfg: &RunConfig) -> CmdResult {
    let c = cfg.require_c()?;
    let ladder = cfg
        .eps_ladder
        .clone()
        .ok_or_else(|| ConfigError::Field { path: "eps_ladder".into(), message: "required by this command".into() })?;
    let alpha = cfg.frequency();
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let mut out = Outcome::ok(json!({}));
    match continuation_in_eps(&map, &alpha, c, &ladder, &cfg.curve_options()) {
        Ok(report) => {
            let mut t = Table::new(&["epsilon", "d2_norm", "lambda", "iterations", "residual_sup", "converged"]);
            for p in &report.trace {
                t.row(&[
                    num(p.epsilon),
                    num(p.d2_norm),
                    num(p.lambda),
                    p.iterations.to_string(),
                    num(p.residual_sup),
                    p.converged.to_string(),
                ]);
            }
            out.file("continuation.csv", t.finish());
            out.result = json!({
                "trace": report.trace,
                "breakdown": report.breakdown.map(|(eps, reason)| json!({ "epsilon": eps, "reason": reason })),
            });
        }
        Err(e) => out.fail(&e),
    }
    Ok(out)
}

pub fn rational_check(cfg: &RunConfig) -> CmdResult {
    let alpha = cfg.frequency();
    let eps = cfg.epsilon.unwrap_or(0.0);
    let map = match build_map(cfg, &alpha) {
        Ok(m) => m,
        Err(out) => return Ok(out),
    };
    let mut out = Outcome::ok(json!({}));
    match rational_obstruction(&map, eps, &alpha) {
        Ok(Some(cert)) => {
            let mut t = Table::new(&["theta_upper", "theta_lower", "margin_upper", "margin_lower"]);
            t.row(&[num(cert.theta_upper), num(cert.theta_lower), num(cert.margin_upper), num(cert.margin_lower)]);
            out.file("certificate.csv", t.finish());
            out.result["certificate"] = json!(cert);
            out.result["theta_upper_over_pi"] = json!(cert.theta_upper / PI);
        }
        Ok(None) => out.result["certificate"] = Value::Null,
        Err(e) => out.fail(&e),
    }
    Ok(out)
}
