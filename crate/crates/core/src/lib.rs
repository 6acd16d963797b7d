//! Discrete conformal Laplacian eigenvalue optimization.
//!
//! A [`DiscreteManifold`] carries lumped weights, a stiffness matrix and a
//! potential. Conformal factors u weight the mass matrix by u^(N-2), and the
//! optimizer maximizes the volume-normalized second eigenvalue over u.

// NaN must fail validation, hence the negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod manifold;
pub mod optimizer;
pub mod oracle;
pub mod speclib;
pub mod variation;

pub use error::{Error, Result};
pub use manifold::DiscreteManifold;
pub use speclib::{ConformalFactor, SolverOptions, SpectrumSlice};
