//! Sparse linear algebra used by the interior-point backend.

mod amd;
mod csc;
mod ldl;

pub use amd::approximate_minimum_degree;
pub use csc::CscMatrix;
pub use ldl::{LdlFactor, LdlSymbolic};
