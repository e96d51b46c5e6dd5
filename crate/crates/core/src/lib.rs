//! Translated and invariant curves of quasi-periodically forced maps of the
//! cylinder, `r₁ = r + ω₀ + εF(r, θ; ε)`, `θ₁ = θ + 2πα`.
//!
//! Curves are computed by iterating a linear difference equation for `Dψ`
//! (see [`curves::translated_curve`]); zeros of the bifurcation function
//! ([`bifurcation::find_invariant_curves`]) give the invariant ones.

pub mod arithmetic;
pub mod bifurcation;
pub mod cohomology;
pub mod curves;
pub mod dynamics;
pub mod error;
pub mod maps;
pub mod periodic;

pub use arithmetic::{continued_fraction, ContinuedFraction, Frequency, FrequencyKind};
pub use bifurcation::{
    find_invariant_curves, intervals_in, mode_lock_interval, phi, phi0, BifurcationOptions, BifurcationReport,
    Classification, ModeLockInterval, Root,
};
pub use cohomology::{solve_constant, solve_linde, solve_linde_dense, LinDEOptions, LinDESolution};
pub use curves::{
    continuation_in_eps, dpsi_dc, foliation_sweep, rational_obstruction, translated_curve, CurveOptions,
    ObstructionCertificate, TranslatedCurve,
};
pub use dynamics::{birkhoff_rate, fibred_rotation_number, lyapunov, orbit_sample, CocycleProduct};
pub use error::{Error, Result};
pub use maps::{step, CylinderPoint, Expr, ForcedMap, Partial, Partials};
pub use periodic::PeriodicFunction;
