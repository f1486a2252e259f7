//! Effective coefficients and effective evolutions: the constant torus
//! diffusion matrix A and its next-order correction B, the Gaussian-case
//! radial diffusion field and single-particle operator T_β with the
//! oscillatory main term, the non-degenerate coefficient a_β through
//! limiting-absorption resolvents, and the Fokker–Planck / wave solvers.

mod abeta;
mod diffusion;
mod fp;
mod main_term;
mod resolvent;
mod tbeta;
mod wave;

pub use abeta::{compute_a_beta, CoefficientField};
pub use diffusion::{
    diffusion_field_direct, diffusion_field_gaussian, diffusion_matrix_torus, next_order_b,
    DiffusionMatrix, RadialMatrixField,
};
pub use fp::{fp_evolve, FpSolution};
pub use main_term::{
    gaussian_main_term, gaussian_main_term_radial_flux, main_term_cesaro, MainTermSeries,
};
pub use resolvent::{apply_forward, resolvent_l2, ResolventReport, TwoParticleField};
pub use tbeta::{apply_t_beta, GaussTBeta, RadialModeField};
pub use wave::{wave_evolve, WaveSolution};
