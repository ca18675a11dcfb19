//! Structure-preserving integrators for conditionally linear SDEs of
//! Hodgkin-Huxley type, together with the empirical studies used to
//! validate them (strong convergence, one-step consistency, invariant
//! densities, gating-range escapes, Lyapunov-type mean bounds).
//!
//! The model class couples a voltage equation that is linear in `V` given
//! the gating variables with gating dynamics that are linear in `U` given
//! the voltage:
//!
//! ```text
//! dV = (a(U) V + b(U)) dt + dzeta,
//! dU = (-diag(alpha(V) + beta(V)) U + alpha(V)) dt,
//! ```
//!
//! where `a < 0` and `alpha, beta > 0` componentwise. `dzeta` is either
//! multiplicative Brownian noise `Sigma(U) dW`, an Ornstein-Uhlenbeck
//! process driven by the same Brownian motion, or zero. Both subsystems
//! admit exact conditional flows ([`flows`]), which the splitting schemes
//! in [`schemes`] compose; tamed/truncated Euler-Maruyama variants are
//! provided for comparison.

pub mod cli;
pub mod flows;
pub mod harness;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod parallel;
pub mod schemes;

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value for {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step size {dt} is not aligned with base grid {base_dt} (ratio {ratio})")]
    GridMisaligned { dt: f64, base_dt: f64, ratio: f64 },
    #[error("noise window [{start}, {end}) out of range for path with {len} increments")]
    NoiseOutOfRange { start: usize, end: usize, len: usize },
    #[error("scheme {scheme} is not defined for the {variant} noise variant")]
    SchemeVariantMismatch { scheme: &'static str, variant: &'static str },
    #[error("reference trajectory exploded at step {step} (t = {t})")]
    ReferenceExploded { step: usize, t: f64 },
    #[error("all {n} sample paths were discarded by the truncation filter")]
    AllPathsDiscarded { n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
