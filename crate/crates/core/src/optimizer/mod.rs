mod ascent;
mod certificate;
mod checkpoint;
mod classify;
mod continuation;
mod functional;

pub use ascent::{f_inverse, maximize_f2eps, Ascent, IterationRecord, OptimizerParams, StepKind};
pub use certificate::{euler_certificate, EulerCertificate};
pub use checkpoint::Checkpoint;
pub use classify::{classify, harmonic_check, has_sign_change, nodal_check, Classification, ClassifyOutcome, HarmonicCheck, NodalCheck};
pub use continuation::{continuation, ContinuationOptions, ExtremalReport, StageRecord};
pub use functional::{f2, f2_value, f2eps, f2eps_value, floor_truncate, penalty, RegParams};
