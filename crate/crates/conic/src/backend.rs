use crate::program::{ConeKind, ConicProgram};
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendResult {
    pub status: SolveStatus,
    /// Primal point in program variable order. `None` for certificates of
    /// infeasibility and hard failures.
    pub primal: Option<Vec<f64>>,
    /// Objective (constant included) at `primal`, `NaN` when absent.
    pub objective_value: f64,
    /// Wall-clock seconds.
    pub solve_time: f64,
    pub iterations: usize,
}

pub trait Backend {
    fn name(&self) -> &str;

    fn supports(&self, kind: ConeKind) -> bool;

    /// Solves a validated program whose cones are all supported.
    fn solve_unchecked(&self, prog: &ConicProgram) -> BackendResult;
}

/// Validates `prog`, checks cone support and dispatches to `backend`.
pub fn solve(prog: &ConicProgram, backend: &dyn Backend) -> Result<BackendResult, ConicError> {
    prog.validate()?;
    for kind in [
        ConeKind::Nonnegative,
        ConeKind::SecondOrder,
        ConeKind::RotatedSecondOrder,
        ConeKind::Psd,
    ] {
        if prog.uses(kind) && !backend.supports(kind) {
            return Err(ConicError::Unsupported {
                backend: backend.name().to_string(),
                kind,
            });
        }
    }
    Ok(backend.solve_unchecked(prog))
}
