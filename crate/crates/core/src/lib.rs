//! Kinetic-theory workbench for a tagged particle advected by a smooth
//! point-vortex background.
//!
//! The crate covers the full desk-scale pipeline: interaction kernels and
//! their spectral representations ([`kernels`]), mean-field equilibria and
//! renormalized potentials ([`meanfield`]), parallel ensemble simulation of
//! the N-particle dynamics ([`nbody`]), cluster-expansion cumulants and their
//! N-scaling ([`cumulants`]), the truncated limiting hierarchy on a weighted
//! symmetric tensor basis ([`hierarchy`]), and the effective coefficients and
//! evolutions that the hierarchy and ensemble runs are cross-checked against
//! ([`effective`]). The [`cli`] module orchestrates declarative experiment
//! configs and the verification suites.

pub mod cli;
pub mod cumulants;
pub mod effective;
pub mod grid;
pub mod hierarchy;
pub mod kernels;
pub mod meanfield;
pub mod modes;
pub mod nbody;
pub mod stats;

pub use kernels::{ExternalPotential, PlaneKernel, TorusKernel};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("mean-field solver failed: {0}")]
    MeanField(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("missing modes: {0}")]
    MissingModes(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("basis too large: {0}")]
    BasisOverflow(String),
    #[error("propagation failed: {0}")]
    Propagation(String),
    #[error("resolvent series diverged: {0}")]
    ResolventDiverged(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
