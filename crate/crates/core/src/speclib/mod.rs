//! Generalized eigenproblem K phi = lambda M_u phi with M_u = diag(w u^(N-2)).

mod factor;
mod spectrum;

pub use factor::{critical_exponent, ConformalFactor, DEFLATION_THRESHOLD};
pub use spectrum::{
    first_eigen_sign, generalized_spectrum, lambda2_orthogonal, negative_count, weighted_mass, DeadSet, SignReport,
    SolverKind, SolverOptions, SpectrumSlice, WeightedMass,
};
