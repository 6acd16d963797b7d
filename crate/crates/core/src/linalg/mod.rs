pub mod dense;
pub mod pencil;
pub mod simplex;
mod sparse;

pub use sparse::CsrMatrix;
