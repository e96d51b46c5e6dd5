use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qpf_core::bifurcation::BifurcationOptions;
use qpf_core::curves::CurveOptions;
use qpf_core::maps::{Expr, ForcedMap};
use qpf_core::{Frequency, PeriodicFunction};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

fn field(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { path: path.to_string(), message: message.into() }
}

/// Trigonometric polynomial `a0 + Σ cos[k] cos((k+1)θ) + sin[k] sin((k+1)θ)`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigSeries {
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigSeries {
    fn to_function(&self, order: usize) -> PeriodicFunction {
        let order = order.max(self.cos.len()).max(self.sin.len());
        PeriodicFunction::from_cos_sin(self.a0, &self.cos, &self.sin, order)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.a0).chain(self.cos.iter().copied()).chain(self.sin.iter().copied())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Zero,
    Arnold {
        omega: f64,
        k: f64,
        b: f64,
    },
    ArnoldScaled {
        omega0: f64,
        omega1: f64,
        b: f64,
    },
    Transformed {
        omega1: f64,
        b0: f64,
        b1: f64,
    },
    Linear {
        g: TrigSeries,
    },
    ThetaOnly {
        p: TrigSeries,
    },
    Rationalq {
        q: u32,
    },
    Expr {
        f: String,
        #[serde(default)]
        periodic_in_r: bool,
    },
}

impl MapSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(field(&format!("map.{name}"), "must be finite"))
            }
        };
        match self {
            MapSpec::Zero => Ok(()),
            MapSpec::Arnold { omega, k, b } => {
                finite("omega", *omega)?;
                finite("k", *k)?;
                finite("b", *b)
            }
            MapSpec::ArnoldScaled { omega0, omega1, b } => {
                finite("omega0", *omega0)?;
                finite("omega1", *omega1)?;
                finite("b", *b)
            }
            MapSpec::Transformed { omega1, b0, b1 } => {
                finite("omega1", *omega1)?;
                finite("b0", *b0)?;
                finite("b1", *b1)
            }
            MapSpec::Linear { g: s } | MapSpec::ThetaOnly { p: s } => {
                if s.values().all(f64::is_finite) {
                    Ok(())
                } else {
                    Err(field("map", "series coefficients must be finite"))
                }
            }
            MapSpec::Rationalq { q } => {
                if *q == 0 {
                    Err(field("map.q", "must be positive"))
                } else {
                    Ok(())
                }
            }
            MapSpec::Expr { f, .. } => Expr::parse(f).map(|_| ()).map_err(|e| field("map.f", e.to_string())),
        }
    }

    pub fn build(&self, alpha: &Frequency, order: usize) -> qpf_core::Result<ForcedMap> {
        Ok(match self {
            MapSpec::Zero => ForcedMap::zero(),
            MapSpec::Arnold { omega, k, b } => ForcedMap::arnold(*omega, *k, *b),
            MapSpec::ArnoldScaled { omega0, omega1, b } => ForcedMap::arnold_scaled(*omega0, *omega1, *b),
            MapSpec::Transformed { omega1, b0, b1 } => ForcedMap::transformed_arnold(*omega1, *b0, *b1, alpha)?,
            MapSpec::Linear { g } => ForcedMap::linear_test(g.to_function(order)),
            MapSpec::ThetaOnly { p } => ForcedMap::theta_only(p.to_function(order)),
            MapSpec::Rationalq { q } => ForcedMap::rational_counterexample(*q)?,
            MapSpec::Expr { f, periodic_in_r } => ForcedMap::expression(Expr::parse(f)?, *periodic_in_r)?,
        })
    }

    /// The same map with its frequency parameter `ω₁` (or `ω`) set to zero;
    /// maps without one are returned unchanged.
    pub fn without_omega1(&self) -> MapSpec {
        let mut spec = self.clone();
        match &mut spec {
            MapSpec::Arnold { omega, .. } => *omega = 0.0,
            MapSpec::ArnoldScaled { omega1, .. } | MapSpec::Transformed { omega1, .. } => *omega1 = 0.0,
            _ => {}
        }
        spec
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub step: Option<f64>,
    pub residual: Option<f64>,
    pub root: Option<f64>,
    pub c: Option<f64>,
}

/// Raw configuration as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub map: MapSpec,
    pub alpha: String,
    pub epsilon: Option<f64>,
    pub eps_ladder: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub c_range: Option<[f64; 2]>,
    pub c_count: Option<usize>,
    pub modes: Option<usize>,
    pub max_modes: Option<usize>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub a_box: Option<[f64; 2]>,
    pub d2_ceiling: Option<f64>,
    pub samples_per_period: Option<usize>,
    pub theta0: Option<f64>,
    pub n_max: Option<usize>,
    pub x0: Option<[f64; 2]>,
    pub n_transient: Option<usize>,
    pub n_keep: Option<usize>,
    pub n_range: Option<[i64; 2]>,
    pub omega_window: Option<[f64; 2]>,
}

/// Configuration with every default filled in; this is what runs use and
/// what every JSON output embeds.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub map: MapSpec,
    pub alpha: String,
    pub epsilon: Option<f64>,
    pub eps_ladder: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub c_range: [f64; 2],
    pub c_count: usize,
    pub modes: usize,
    pub max_modes: usize,
    pub max_iter: usize,
    pub tol_step: f64,
    pub tol_residual: f64,
    pub tol_root: f64,
    pub tol_c: f64,
    pub a_box: [f64; 2],
    pub d2_ceiling: f64,
    pub samples_per_period: usize,
    pub theta0: f64,
    pub n_max: usize,
    pub x0: [f64; 2],
    pub n_transient: usize,
    pub n_keep: usize,
    pub n_range: [i64; 2],
    pub omega_window: [f64; 2],
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(field(path, format!("must be finite and positive, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field(path, format!("must be finite, got {v}")))
    }
}

fn nonzero(path: &str, v: usize) -> Result<usize, ConfigError> {
    if v > 0 {
        Ok(v)
    } else {
        Err(field(path, "must be positive"))
    }
}

fn range(path: &str, r: [f64; 2]) -> Result<[f64; 2], ConfigError> {
    finite(path, r[0])?;
    finite(path, r[1])?;
    if r[0] < r[1] {
        Ok(r)
    } else {
        Err(field(path, format!("lower end {} must be below upper end {}", r[0], r[1])))
    }
}

impl RawConfig {
    pub fn resolve(self, modes_override: Option<usize>) -> Result<RunConfig, ConfigError> {
        self.map.validate()?;
        Frequency::parse(&self.alpha).map_err(|e| field("alpha", e.to_string()))?;
        let epsilon = match self.epsilon {
            Some(e) if !(e.is_finite() && e >= 0.0) => return Err(field("epsilon", "must be finite and non-negative")),
            e => e,
        };
        if let Some(ladder) = &self.eps_ladder {
            if ladder.is_empty() {
                return Err(field("eps_ladder", "must not be empty"));
            }
            for (i, &e) in ladder.iter().enumerate() {
                positive(&format!("eps_ladder[{i}]"), e)?;
            }
        }
        let c = self.c.map(|c| finite("c", c)).transpose()?;
        let modes = nonzero("modes", modes_override.or(self.modes).unwrap_or(256))?;
        let max_modes = nonzero("max_modes", self.max_modes.unwrap_or(4096))?.max(modes);
        let t = &self.tolerances;
        Ok(RunConfig {
            map: self.map,
            alpha: self.alpha,
            epsilon,
            eps_ladder: self.eps_ladder,
            c,
            c_range: range("c_range", self.c_range.unwrap_or([0.0, 2.0 * PI]))?,
            c_count: nonzero("c_count", self.c_count.unwrap_or(41))?,
            modes,
            max_modes,
            max_iter: nonzero("max_iter", self.max_iter.unwrap_or(200))?,
            tol_step: positive("tolerances.step", t.step.unwrap_or(1e-11))?,
            tol_residual: positive("tolerances.residual", t.residual.unwrap_or(1e-9))?,
            tol_root: positive("tolerances.root", t.root.unwrap_or(1e-10))?,
            tol_c: positive("tolerances.c", t.c.unwrap_or(1e-12))?,
            a_box: range("a_box", self.a_box.unwrap_or([0.5, 1.5]))?,
            d2_ceiling: positive("d2_ceiling", self.d2_ceiling.unwrap_or(1.0))?,
            samples_per_period: nonzero("samples_per_period", self.samples_per_period.unwrap_or(512))?,
            theta0: finite("theta0", self.theta0.unwrap_or(0.0))?,
            n_max: nonzero("n_max", self.n_max.unwrap_or(10_000))?,
            x0: {
                let x = self.x0.unwrap_or([0.0, 0.0]);
                [finite("x0[0]", x[0])?, finite("x0[1]", x[1])?]
            },
            n_transient: self.n_transient.unwrap_or(1000),
            n_keep: nonzero("n_keep", self.n_keep.unwrap_or(1000))?,
            n_range: {
                let r = self.n_range.unwrap_or([0, 0]);
                if r[0] > r[1] {
                    return Err(field("n_range", "lower end must not exceed upper end"));
                }
                r
            },
            omega_window: range("omega_window", self.omega_window.unwrap_or([-PI, PI]))?,
        })
    }
}

pub fn load(path: &Path, modes_override: Option<usize>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse(&text, modes_override)
}

pub fn parse(text: &str, modes_override: Option<usize>) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        field(if path.is_empty() || path == "." { "config" } else { &path }, e.inner().to_string())
    })?;
    raw.resolve(modes_override)
}

impl RunConfig {
    pub fn frequency(&self) -> Frequency {
        Frequency::parse(&self.alpha).expect("validated at load")
    }

    pub fn require_epsilon(&self) -> Result<f64, ConfigError> {
        self.epsilon.ok_or_else(|| field("epsilon", "required by this command"))
    }

    pub fn require_c(&self) -> Result<f64, ConfigError> {
        self.c.ok_or_else(|| field("c", "required by this command"))
    }

    pub fn curve_options(&self) -> CurveOptions {
        CurveOptions {
            order: self.modes,
            max_order: self.max_modes,
            max_iter: self.max_iter,
            tol_step: self.tol_step,
            tol_residual: self.tol_residual,
            a_box: (self.a_box[0], self.a_box[1]),
            d2_ceiling: self.d2_ceiling,
            ..CurveOptions::default()
        }
    }

    pub fn bifurcation_options(&self) -> BifurcationOptions {
        BifurcationOptions {
            samples_per_period: self.samples_per_period,
            tol_root: self.tol_root,
            tol_c: self.tol_c,
            curve: self.curve_options(),
            ..BifurcationOptions::default()
        }
    }
}
