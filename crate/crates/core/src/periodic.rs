//! Real 2π-periodic functions stored as truncated Fourier series.
//!
//! Only the modes `0..=N` are stored; negative modes follow from Hermitian
//! symmetry `û₋ₙ = conj(ûₙ)`, so every value of [`PeriodicFunction`] is a real
//! function by construction. Nonlinear operations (products, composition with
//! a map) are evaluated on a uniform grid of `4N` points and transformed back.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::maps::{ForcedMap, Partial};

const TWO_PI: f64 = 2.0 * PI;

/// Largest |û₀| accepted by [`PeriodicFunction::zero_mean_primitive`].
pub const MEAN_TOLERANCE: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

fn fft_inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

/// Grid size used for nonlinear operations on a function of order `order`.
pub fn dealias_grid(order: usize) -> usize {
    (4 * order).max(4)
}

/// Uniform grid `θⱼ = 2πj/m`.
pub fn grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| TWO_PI * j as f64 / m as f64).collect()
}

/// `e^{2πinα}` with the phase reduced mod 1 before scaling.
pub fn rotation_phase(n: i64, alpha: f64) -> Complex64 {
    let turns = (n as f64 * alpha).rem_euclid(1.0);
    Complex64::from_polar(1.0, TWO_PI * turns)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicFunction {
    coeffs: Vec<Complex64>,
}

impl PeriodicFunction {
    /// Builds a function from the non-negative modes `û₀..û_N`.
    /// The imaginary part of `û₀` is discarded.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); order + 1] }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut f = Self::zeros(order);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    /// `a0 + Σ cosₙ cos nθ + sinₙ sin nθ` (index 0 of each slice is mode 1).
    pub fn from_cos_sin(a0: f64, cos: &[f64], sin: &[f64], order: usize) -> Self {
        let mut f = Self::constant(a0, order);
        for n in 1..=order {
            let a = cos.get(n - 1).copied().unwrap_or(0.0);
            let b = sin.get(n - 1).copied().unwrap_or(0.0);
            f.coeffs[n] = Complex64::new(a / 2.0, -b / 2.0);
        }
        f
    }

    /// Trigonometric interpolant of samples on the grid `θⱼ = 2πj/M`,
    /// truncated to modes `|n| ≤ order`.
    ///
    /// Modes above `(M-1)/2` cannot be resolved by the grid; they are left at
    /// zero, except for the Nyquist mode of an even grid which is split evenly
    /// between `±M/2`.
    pub fn from_samples(values: &[f64], order: usize) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 samples, got {m}")));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(&mut buf);
        let scale = 1.0 / m as f64;
        let mut f = Self::zeros(order);
        let resolved = (m - 1) / 2;
        for n in 0..=order.min(resolved) {
            f.coeffs[n] = buf[n] * scale;
        }
        if m % 2 == 0 && m / 2 <= order {
            f.coeffs[m / 2] = Complex64::new(buf[m / 2].re * scale / 2.0, 0.0);
        }
        f.coeffs[0].im = 0.0;
        Ok(f)
    }

    /// Samples `f` on the dealiasing grid and interpolates.
    pub fn from_fn(order: usize, f: impl Fn(f64) -> f64) -> Self {
        let m = dealias_grid(order);
        let values: Vec<f64> = grid(m).into_iter().map(f).collect();
        Self::from_samples(&values, order).expect("dealias grid has at least 4 points")
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Non-negative modes `û₀..û_N`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `ûₙ` for any integer `n` (zero beyond the truncation order).
    pub fn coeff(&self, n: i64) -> Complex64 {
        let k = n.unsigned_abs() as usize;
        match self.coeffs.get(k) {
            Some(&c) if n >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Highest mode with a nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.coeffs.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let z = Complex64::from_polar(1.0, theta);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs[1..].iter().rev() {
            acc = (acc + c) * z;
        }
        self.coeffs[0].re + 2.0 * acc.re
    }

    /// Values on the grid `θⱼ = 2πj/m`; modes above the grid's resolution
    /// are folded (aliased) onto the grid.
    pub fn samples(&self, m: usize) -> Vec<f64> {
        assert!(m > 0, "sample grid must be non-empty");
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[0] += self.coeffs[0];
        for (n, &c) in self.coeffs.iter().enumerate().skip(1) {
            buf[n % m] += c;
            buf[(m - n % m) % m] += c.conj();
        }
        fft_inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Values on the dealiasing grid.
    pub fn grid_values(&self) -> Vec<f64> {
        self.samples(dealias_grid(self.order()))
    }

    /// Truncates or zero-pads to a new order.
    pub fn resized(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, Complex64::new(0.0, 0.0));
        Self { coeffs }
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| c * Complex64::new(0.0, n as f64))
            .collect();
        Self { coeffs }
    }

    /// The primitive with zero mean; inverse of [`derivative`](Self::derivative)
    /// on zero-mean functions.
    pub fn zero_mean_primitive(&self) -> Result<Self> {
        let mean = self.mean();
        if mean.abs() > MEAN_TOLERANCE {
            return Err(Error::NonIntegrable { mean });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        for (n, (out, &c)) in coeffs.iter_mut().zip(&self.coeffs).enumerate().skip(1) {
            *out = c / Complex64::new(0.0, n as f64);
        }
        Ok(Self { coeffs })
    }

    /// `θ ↦ f(θ + 2π·turns)`.
    pub fn shift(&self, turns: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| c * rotation_phase(n as i64, turns))
            .collect();
        Self::new(coeffs)
    }

    /// `‖Dᵏf‖_{L²} = (2π Σ |n|^{2k} |ûₙ|²)^{1/2}`; `k = 0` is the L² norm.
    pub fn sobolev_norm(&self, k: u32) -> f64 {
        let mut sum = if k == 0 { self.coeffs[0].norm_sqr() } else { 0.0 };
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            sum += 2.0 * (n as f64).powi(2 * k as i32) * c.norm_sqr();
        }
        (TWO_PI * sum).sqrt()
    }

    /// `Σ |ûₙ|`, a rigorous bound on `sup |f|`.
    pub fn sup_norm_bound(&self) -> f64 {
        self.coeffs[0].norm() + 2.0 * self.coeffs[1..].iter().map(|c| c.norm()).sum::<f64>()
    }

    /// Fraction of the total energy `Σ|ûₙ|²` held by modes `|n| > N/2`.
    pub fn tail_energy_ratio(&self) -> f64 {
        let n = self.order();
        let mut total = self.coeffs[0].norm_sqr();
        let mut tail = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let e = 2.0 * c.norm_sqr();
            total += e;
            if 2 * k > n {
                tail += e;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// Pointwise product on the dealiasing grid of the larger order.
    pub fn product(&self, other: &Self) -> Self {
        let order = self.order().max(other.order());
        let m = dealias_grid(order);
        let a = self.samples(m);
        let b = other.samples(m);
        let values: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_samples(&values, order).expect("grid has at least 4 points")
    }

    /// `θ ↦ g(θ, f(θ))` evaluated on the dealiasing grid.
    pub fn compose(&self, g: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.order();
        let m = dealias_grid(order);
        let values: Vec<f64> =
            self.samples(m).iter().enumerate().map(|(j, &v)| g(TWO_PI * j as f64 / m as f64, v)).collect();
        Self::from_samples(&values, order).expect("grid has at least 4 points")
    }

    pub fn add_constant(&self, value: f64) -> Self {
        let mut f = self.clone();
        f.coeffs[0].re += value;
        f
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// Largest coefficient difference over all stored modes.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let order = self.order().max(other.order()) as i64;
        (0..=order).map(|n| (self.coeff(n) - other.coeff(n)).norm()).fold(0.0, f64::max)
    }

    /// CSV table `n,re,im` over `-N..=N`.
    pub fn to_coeff_csv(&self) -> String {
        let mut out = String::from("n,re,im\n");
        let n = self.order() as i64;
        for k in -n..=n {
            let c = self.coeff(k);
            let _ = writeln!(out, "{k},{:.16e},{:.16e}", c.re, c.im);
        }
        out
    }

    /// CSV table `theta,value` on the grid `2πj/m`.
    pub fn to_samples_csv(&self, m: usize) -> String {
        let mut out = String::from("theta,value\n");
        for (theta, v) in grid(m).into_iter().zip(self.samples(m)) {
            let _ = writeln!(out, "{theta:.16e},{v:.16e}");
        }
        out
    }
}

impl Serialize for PeriodicFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let re: Vec<f64> = self.coeffs.iter().map(|c| c.re).collect();
        let im: Vec<f64> = self.coeffs.iter().map(|c| c.im).collect();
        let mut s = serializer.serialize_struct("PeriodicFunction", 3)?;
        s.serialize_field("order", &self.order())?;
        s.serialize_field("re", &re)?;
        s.serialize_field("im", &im)?;
        s.end()
    }
}

fn zip_coeffs(
    a: &PeriodicFunction,
    b: &PeriodicFunction,
    op: impl Fn(Complex64, Complex64) -> Complex64,
) -> PeriodicFunction {
    let order = a.order().max(b.order()) as i64;
    PeriodicFunction::new((0..=order).map(|n| op(a.coeff(n), b.coeff(n))).collect())
}

impl Add for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn add(self, rhs: Self) -> PeriodicFunction {
        zip_coeffs(self, rhs, |x, y| x + y)
    }
}

impl Sub for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn sub(self, rhs: Self) -> PeriodicFunction {
        zip_coeffs(self, rhs, |x, y| x - y)
    }
}

impl Neg for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn neg(self) -> PeriodicFunction {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn mul(self, rhs: f64) -> PeriodicFunction {
        self.scale(rhs)
    }
}

/// `θ ↦ ∂F(ψ(θ), θ; ε)` for the selected partial, sampled on the dealiasing
/// grid of `psi` and truncated back to its order.
pub fn compose_map_partial(map: &ForcedMap, which: Partial, psi: &PeriodicFunction, eps: f64) -> PeriodicFunction {
    let order = psi.order();
    let m = dealias_grid(order);
    let values: Vec<f64> = map.partials_on_grid(&psi.samples(m), eps).iter().map(|p| p.get(which)).collect();
    PeriodicFunction::from_samples(&values, order).expect("grid has at least 4 points")
}
