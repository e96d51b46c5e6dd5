use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("input has mean {mean:e}; only zero-mean functions have a periodic primitive")]
    NonIntegrable { mean: f64 },

    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("resonance: e^(2πi·{n}·α) = 1 for rational α")]
    Resonance { n: i64 },

    #[error("near resonance at mode {n}: divisor {divisor:e} is below the floor {floor:e}")]
    NearResonance { n: i64, divisor: f64, floor: f64 },

    #[error("cohomological equation is unsolvable: right-hand side has mean {mean:e}")]
    Unsolvable { mean: f64 },

    #[error("coefficient a(θ) is not bounded below by a positive constant (min {min:e})")]
    NotPositive { min: f64 },

    #[error("map expression: {0}")]
    Expression(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "ε = {eps} too large: a(θ) ∈ [{min:.6}, {max:.6}] left [{lo}, {hi}] at iteration {iteration}"
    )]
    EpsilonTooLarge { eps: f64, min: f64, max: f64, lo: f64, hi: f64, iteration: usize },

    #[error("iteration did not contract after {iterations} steps (last step {last:e})")]
    Divergence { iterations: usize, last: f64, history: Vec<f64> },

    #[error("translated curve at c = {c} is not converged")]
    NotConverged { c: f64 },

    #[error("translated curves cross between c = {c1} and c = {c2} (gap {gap:e})")]
    FoliationViolation { c1: f64, c2: f64, gap: f64 },

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("orbit escaped at step {step} (r = {r:e})")]
    Escape { step: usize, r: f64 },
}

impl Error {
    /// True for failures of an iterative solve (as opposed to bad input).
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Resonance { .. }
                | Error::NearResonance { .. }
                | Error::NotPositive { .. }
                | Error::EpsilonTooLarge { .. }
                | Error::Divergence { .. }
                | Error::NotConverged { .. }
                | Error::Escape { .. }
        )
    }
}
