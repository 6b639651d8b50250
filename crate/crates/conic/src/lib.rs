//! Conic programs over nonnegative, second-order, rotated second-order and
//! semidefinite cones, with a built-in interior point backend.

mod backend;
mod expr;
mod ipm;
pub mod linalg;
mod program;

pub use backend::{solve, Backend, BackendResult, SolveStatus};
pub use expr::{AffineExpr, Var};
pub use ipm::{InteriorPoint, IpmSettings};
pub use program::{cone_violation, psd_side, triangle_to_matrix, ConeKind, ConeMembership, ConicProgram, Residuals};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("cone {index} is malformed: {reason}")]
    InvalidCone { index: usize, reason: String },
    #[error("variable {var} out of range for a program with {num_vars} variables")]
    VarOutOfRange { var: usize, num_vars: usize },
    #[error("program contains a non-finite coefficient")]
    NonFinite,
    #[error("backend `{backend}` does not support {kind} cones")]
    Unsupported { backend: String, kind: ConeKind },
}
