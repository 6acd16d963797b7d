//! Ground truth independent of the production solvers: closed-form product
//! spectra, dense reference eigensolves and the maximality checks on the
//! product example.

mod analytic;
mod instances;
mod key;
mod maximality;
mod reference;

pub use analytic::{circle_spectrum_continuum, circle_spectrum_discrete, product_spectrum_analytic, ProductSpec};
pub use instances::{
    log_uniform, nodal_instance, random_factor, smooth_field, trial_rng, NodalInstance, ProductExample, NODAL_DIM,
};
pub use key::{key_inequality_check, key_terms, theta_sweep, KeyInequalityReport, KeyTerms, SweepCase, ThetaSweepReport};
pub use maximality::{maximality_sample_test, MaximalityReport, MaximalitySample, MaximalitySettings, Violation};
pub use reference::{dense_reference_solve, ReferenceSpectrum, REFERENCE_LIMIT};
