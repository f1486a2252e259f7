//! Truncated limiting Fock-space hierarchy of the uniform setting: weighted
//! symmetric tensor basis, the mode-space generator S = S⁺ + S⁻ with its
//! adjoint symmetry, Lanczos/eigendecomposition propagators, and the
//! empirical RAGE diagnostics.

mod basis;
mod diagnostics;
mod evolve;
mod operator;

pub use basis::{Element, FockBasis, FockVector, Level};
pub use diagnostics::{spectral_diagnostics, SpectralReport};
pub use evolve::{
    initial_state, propagate_lanczos, tagged_observable, tagged_real_space, EigenPropagator,
};
pub use operator::{build_operator, HierarchyOperator};
