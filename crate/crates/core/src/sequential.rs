//! Sequential penalized relaxation: solve, re-seed from the iterate, repeat.

use std::collections::BTreeMap;
use std::time::Instant;

use mrmp_conic::{solve, Backend, SolveStatus};

use crate::model::{
    evaluate_objective, straight_line_seed, verify, FeasibilityReport, Positions, ProblemInstance, Solution, Tolerances,
};
use crate::relax::{build_relaxation, extract_iterate, relaxation_gap, LiftedIterate, RelaxationConfig, Variant};
use crate::CoreError;

const STOP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialConfig {
    pub eta: f64,
    pub rel_obj_tol: f64,
    pub max_iters: usize,
    pub variant: Variant,
    pub fix_obstacle_y: bool,
    pub tolerances: Tolerances,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self {
            eta: 50.0,
            rel_obj_tol: 1e-4,
            max_iters: 200,
            variant: Variant::ParabolicSimplified,
            fix_obstacle_y: true,
            tolerances: Tolerances::default(),
        }
    }
}

impl SequentialConfig {
    pub fn relaxation(&self) -> RelaxationConfig {
        RelaxationConfig {
            variant: self.variant,
            eta: self.eta,
            fix_obstacle_y: self.fix_obstacle_y,
        }
    }

    fn check(&self) -> Result<(), CoreError> {
        if !(self.rel_obj_tol > 0.0) || self.max_iters == 0 || !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(CoreError::Config(format!(
                "need eta > 0, rel_obj_tol > 0 and max_iters >= 1 (got {}, {}, {})",
                self.eta, self.rel_obj_tol, self.max_iters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub true_objective: f64,
    pub penalized_objective: f64,
    pub max_gap: f64,
    pub collision_violation: f64,
    /// Seconds.
    pub subproblem_time: f64,
    /// Feasibility of this iterate against the original problem.
    pub report: FeasibilityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    SubproblemFailure,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::SubproblemFailure => "subproblem_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: String,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Last successful iterate; `None` when the first subproblem failed.
    pub final_solution: Option<Solution>,
    pub final_report: Option<FeasibilityReport>,
    pub feasible: bool,
    /// Backend status or error of the failing subproblem.
    pub failure: Option<String>,
    /// Seconds.
    pub total_time: f64,
}

impl SolveReport {
    pub fn final_max_gap(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.max_gap)
    }

    pub fn mean_subproblem_time(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.iterations.iter().map(|r| r.subproblem_time).sum::<f64>() / self.iterations.len() as f64
    }
}

/// `|cur − prev| / max(|prev|, ε) <= tol` with `ε = 1e-12`.
pub fn stopping_criterion(prev_obj: f64, cur_obj: f64, rel_obj_tol: f64) -> bool {
    (cur_obj - prev_obj).abs() / prev_obj.abs().max(STOP_EPS) <= rel_obj_tol
}

/// Position trajectories `G·x_i[t]` of every robot in an iterate.
pub fn iterate_positions(inst: &ProblemInstance, states: &BTreeMap<usize, Vec<Vec<f64>>>) -> Positions {
    inst.robots
        .iter()
        .filter_map(|r| {
            states
                .get(&r.id)
                .map(|x| (r.id, x.iter().map(|s| inst.position(s).to_vec()).collect()))
        })
        .collect()
}

pub(crate) fn solution_from_iterate(inst: &ProblemInstance, it: &LiftedIterate) -> Result<Solution, CoreError> {
    let mut sol = Solution {
        states: it.states.clone(),
        controls: it.controls.clone(),
        objective: 0.0,
    };
    sol.objective = evaluate_objective(inst, &sol)?;
    Ok(sol)
}

/// `η·Σ_{k<T} Σ_i ‖x̌_i[k]‖²`. Adding it to the subproblem value rewrites the
/// penalty as `η·Σ (gap + ‖G x − x̌‖²)`, which is what the stopping rule compares.
pub fn seed_offset(inst: &ProblemInstance, seed: &Positions, eta: f64) -> f64 {
    let mut total = 0.0;
    for r in &inst.robots {
        total += seed[&r.id][..inst.horizon]
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>();
    }
    eta * total
}

/// Runs the driver and calls `observe` after every successful subproblem.
pub fn solve_sequential_with(
    inst: &ProblemInstance,
    seed: Option<&Positions>,
    config: &SequentialConfig,
    backend: &dyn Backend,
    mut observe: impl FnMut(&IterationRecord, &LiftedIterate),
) -> Result<SolveReport, CoreError> {
    config.check()?;
    inst.validate()?;
    let start = Instant::now();
    let mut seed = match seed {
        Some(s) => s.clone(),
        None => straight_line_seed(inst),
    };
    let relax = config.relaxation();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut last: Option<(Solution, FeasibilityReport)> = None;
    let mut termination = Termination::MaxIters;
    let mut failure = None;

    for iter in 1..=config.max_iters {
        let rp = build_relaxation(inst, &seed, &relax)?;
        let t0 = Instant::now();
        let result = match solve(&rp.program, backend) {
            Ok(r) => r,
            Err(e) => {
                termination = Termination::SubproblemFailure;
                failure = Some(e.to_string());
                break;
            }
        };
        let elapsed = t0.elapsed().as_secs_f64();
        if result.status != SolveStatus::Optimal {
            termination = Termination::SubproblemFailure;
            failure = Some(result.status.name().to_string());
            break;
        }
        let it = extract_iterate(&rp.layout, &result, inst)?;
        let sol = solution_from_iterate(inst, &it)?;
        let report = verify(inst, &sol, &config.tolerances);
        let gap = relaxation_gap(&it, inst);
        let rec = IterationRecord {
            iter,
            true_objective: sol.objective,
            penalized_objective: result.objective_value + seed_offset(inst, &seed, config.eta),
            max_gap: gap.max_gap,
            collision_violation: report.collision_violation,
            subproblem_time: elapsed,
            report,
        };
        observe(&rec, &it);
        let stop = iterations.last().is_some_and(|prev| {
            stopping_criterion(prev.penalized_objective, rec.penalized_objective, config.rel_obj_tol)
        });
        seed = iterate_positions(inst, &it.states);
        iterations.push(rec);
        last = Some((sol, report));
        if stop {
            termination = Termination::Converged;
            break;
        }
    }

    let max_gap = iterations.last().map_or(f64::INFINITY, |r| r.max_gap);
    let feasible = last
        .as_ref()
        .is_some_and(|(_, rep)| rep.feasible && max_gap <= config.tolerances.collision);
    let (final_solution, final_report) = match last {
        Some((s, r)) => (Some(s), Some(r)),
        None => (None, None),
    };
    Ok(SolveReport {
        method: config.variant.name().to_string(),
        iterations,
        termination,
        final_solution,
        final_report,
        feasible,
        failure,
        total_time: start.elapsed().as_secs_f64(),
    })
}

pub fn solve_sequential(
    inst: &ProblemInstance,
    seed: Option<&Positions>,
    config: &SequentialConfig,
    backend: &dyn Backend,
) -> Result<SolveReport, CoreError> {
    solve_sequential_with(inst, seed, config, backend, |_, _| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreservationTrace {
    pub all_feasible: bool,
    pub monotone: bool,
    /// `(true_objective, feasible)` per iterate.
    pub trace: Vec<(f64, bool)>,
    pub report: SolveReport,
}

impl PreservationTrace {
    pub fn holds(&self) -> bool {
        self.all_feasible && self.monotone
    }
}

/// Seeds the driver with a feasible solution and checks that every iterate stays
/// feasible and the true objective never increases by more than `1e-6`.
pub fn feasibility_preservation_check(
    inst: &ProblemInstance,
    seed_solution: &Solution,
    config: &SequentialConfig,
    backend: &dyn Backend,
) -> Result<PreservationTrace, CoreError> {
    let pre = verify(inst, seed_solution, &config.tolerances);
    if !pre.feasible {
        return Err(CoreError::Precondition(format!("seed solution is infeasible: {pre:?}")));
    }
    let seed = iterate_positions(inst, &seed_solution.states);
    let report = solve_sequential(inst, Some(&seed), config, backend)?;
    let trace: Vec<(f64, bool)> = report
        .iterations
        .iter()
        .map(|r| (r.true_objective, r.report.feasible))
        .collect();
    let all_feasible = report.termination != Termination::SubproblemFailure && trace.iter().all(|t| t.1);
    let mut monotone = seed_solution.objective + 1e-6 >= trace.first().map_or(f64::NEG_INFINITY, |t| t.0);
    monotone &= trace.windows(2).all(|w| w[1].0 <= w[0].0 + 1e-6);
    Ok(PreservationTrace {
        all_feasible,
        monotone,
        trace,
        report,
    })
}
