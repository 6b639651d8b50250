//! Sequential convex programming baseline with linearized collision rows.

use std::time::Instant;

use mrmp_conic::{solve, AffineExpr, Backend, BackendResult, ConicProgram, SolveStatus};

use crate::model::{straight_line_seed, verify, FeasibilityReport, Positions, ProblemInstance, Solution, Tolerances};
use crate::relax::LiftedIterate;
use crate::sequential::{
    iterate_positions, solution_from_iterate, stopping_criterion, IterationRecord, SolveReport, Termination,
};
use crate::trajectory::{add_trajectory, unpack_trajectory, TrajectoryVars};
use crate::CoreError;

/// Half-space `aᵀ(x_i − x_j) >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedRow {
    pub a: Vec<f64>,
    pub rhs: f64,
}

impl LinearizedRow {
    pub fn satisfied_by(&self, xi: &[f64], xj: &[f64], slack: f64) -> bool {
        let lhs: f64 = self
            .a
            .iter()
            .zip(xi.iter().zip(xj))
            .map(|(a, (p, q))| a * (p - q))
            .sum();
        lhs >= self.rhs - slack
    }
}

/// Supporting half-space of `‖x_i − x_j‖ >= r_sum` at the reference pair.
/// Coincident references (`‖d‖ < 1e-9`) fall back to the normalized `fallback`.
pub fn linearize_collision(xi_ref: &[f64], xj_ref: &[f64], r_sum: f64, fallback: &[f64]) -> LinearizedRow {
    let d: Vec<f64> = xi_ref.iter().zip(xj_ref).map(|(a, b)| a - b).collect();
    let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = if len < 1e-9 {
        let f: Vec<f64> = (0..d.len()).map(|c| fallback.get(c).copied().unwrap_or(0.0)).collect();
        let fl = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fl > 0.0 {
            f.iter().map(|v| v / fl).collect()
        } else {
            let mut e = vec![0.0; d.len()];
            e[0] = 1.0;
            e
        }
    } else {
        d.iter().map(|v| v / len).collect()
    };
    LinearizedRow { a, rhs: r_sum }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScpConfig {
    pub rel_obj_tol: f64,
    pub max_iters: usize,
    /// Per-component bound on the move of lifted positions away from the reference.
    pub trust_region: Option<f64>,
    pub degenerate_direction: Vec<f64>,
    pub tolerances: Tolerances,
}

impl Default for ScpConfig {
    fn default() -> Self {
        Self {
            rel_obj_tol: 1e-4,
            max_iters: 200,
            trust_region: None,
            degenerate_direction: vec![1.0, 0.0, 0.0],
            tolerances: Tolerances::default(),
        }
    }
}

fn iterate_of(inst: &ProblemInstance, vars: &TrajectoryVars, z: &[f64]) -> LiftedIterate {
    let (xs, us) = unpack_trajectory(vars, z);
    let mut it = LiftedIterate {
        states: Default::default(),
        controls: Default::default(),
        y_diag: Default::default(),
        y_full: None,
    };
    for ((r, x), u) in inst.robots.iter().zip(xs).zip(us) {
        it.states.insert(r.id, x);
        it.controls.insert(r.id, u);
    }
    for o in &inst.obstacles {
        it.states.insert(o.id, o.states.clone());
    }
    it
}

/// The motion planning problem without collision avoidance; convex, solved in one shot.
pub fn solve_without_collisions(
    inst: &ProblemInstance,
    backend: &dyn Backend,
) -> Result<(Option<Solution>, BackendResult), CoreError> {
    let mut prog = ConicProgram::new();
    let vars = add_trajectory(&mut prog, inst);
    let result = solve(&prog, backend)?;
    let sol = match &result.primal {
        Some(z) => Some(solution_from_iterate(inst, &iterate_of(inst, &vars, z))?),
        None => None,
    };
    Ok((sol, result))
}

fn build_scp_program(
    inst: &ProblemInstance,
    reference: &Positions,
    config: &ScpConfig,
) -> (ConicProgram, TrajectoryVars, usize) {
    let mut prog = ConicProgram::new();
    let vars = add_trajectory(&mut prog, inst);
    let n = inst.n;
    let robots = inst.robots.len();
    let mut rows = 0;
    for k in 1..inst.horizon {
        for i in 0..robots {
            let pi = vars.position(i, k, n);
            let ri_ref = &reference[&inst.robots[i].id][k];
            if let Some(tr) = config.trust_region {
                for (c, &v) in pi.iter().enumerate() {
                    prog.add_nonnegative(AffineExpr::term(v, -1.0).with_constant(ri_ref[c] + tr));
                    prog.add_nonnegative(AffineExpr::var(v).with_constant(tr - ri_ref[c]));
                }
            }
            for j in i + 1..robots {
                let rj_ref = &reference[&inst.robots[j].id][k];
                let r_sum = inst.robots[i].radius + inst.robots[j].radius;
                let row = linearize_collision(ri_ref, rj_ref, r_sum, &config.degenerate_direction);
                let pj = vars.position(j, k, n);
                let mut e = AffineExpr::constant(-row.rhs);
                for c in 0..n {
                    e.push_term(pi[c], row.a[c]);
                    e.push_term(pj[c], -row.a[c]);
                }
                prog.add_nonnegative(e);
                rows += 1;
            }
            for o in &inst.obstacles {
                let po = inst.position(&o.states[k]);
                let r_sum = inst.robots[i].radius + o.radius;
                let row = linearize_collision(ri_ref, po, r_sum, &config.degenerate_direction);
                let mut e = AffineExpr::constant(-row.rhs);
                for c in 0..n {
                    e.push_term(pi[c], row.a[c]);
                    e.constant -= row.a[c] * po[c];
                }
                prog.add_nonnegative(e);
                rows += 1;
            }
        }
    }
    (prog, vars, rows)
}

/// Number of linearized collision rows per subproblem.
pub fn scp_row_count(inst: &ProblemInstance) -> usize {
    let r = inst.robots.len();
    inst.horizon.saturating_sub(1) * (r * r.saturating_sub(1) / 2 + r * inst.obstacles.len())
}

pub fn solve_scp(
    inst: &ProblemInstance,
    seed: Option<&Positions>,
    config: &ScpConfig,
    backend: &dyn Backend,
) -> Result<SolveReport, CoreError> {
    if !(config.rel_obj_tol > 0.0) || config.max_iters == 0 || config.trust_region.is_some_and(|t| !(t > 0.0)) {
        return Err(CoreError::Config(
            "scp tolerances must be positive and max_iters >= 1".into(),
        ));
    }
    inst.validate()?;
    let start = Instant::now();
    let mut reference = match seed {
        Some(s) => s.clone(),
        None => straight_line_seed(inst),
    };
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut last: Option<(Solution, FeasibilityReport)> = None;
    let mut termination = Termination::MaxIters;
    let mut failure = None;

    for iter in 1..=config.max_iters {
        let (prog, vars, _) = build_scp_program(inst, &reference, config);
        let t0 = Instant::now();
        let result = match solve(&prog, backend) {
            Ok(r) => r,
            Err(e) => {
                termination = Termination::SubproblemFailure;
                failure = Some(e.to_string());
                break;
            }
        };
        let elapsed = t0.elapsed().as_secs_f64();
        let z = match (&result.status, &result.primal) {
            (SolveStatus::Optimal, Some(z)) => z,
            (s, _) => {
                termination = Termination::SubproblemFailure;
                failure = Some(s.name().to_string());
                break;
            }
        };
        let it = iterate_of(inst, &vars, z);
        let sol = solution_from_iterate(inst, &it)?;
        let report = verify(inst, &sol, &config.tolerances);
        let rec = IterationRecord {
            iter,
            true_objective: sol.objective,
            penalized_objective: result.objective_value,
            max_gap: 0.0,
            collision_violation: report.collision_violation,
            subproblem_time: elapsed,
            report,
        };
        let stop = iterations.last().is_some_and(|prev| {
            stopping_criterion(prev.penalized_objective, rec.penalized_objective, config.rel_obj_tol)
        });
        reference = iterate_positions(inst, &it.states);
        iterations.push(rec);
        last = Some((sol, report));
        if stop {
            termination = Termination::Converged;
            break;
        }
    }
    let feasible = last.as_ref().is_some_and(|(_, r)| r.feasible);
    let (final_solution, final_report) = match last {
        Some((s, r)) => (Some(s), Some(r)),
        None => (None, None),
    };
    Ok(SolveReport {
        method: "scp".to_string(),
        iterations,
        termination,
        final_solution,
        final_report,
        feasible,
        failure,
        total_time: start.elapsed().as_secs_f64(),
    })
}
