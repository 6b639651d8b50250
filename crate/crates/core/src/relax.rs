//! Penalized convex relaxations of the lifted problem.
//!
//! Every variant lifts positions with `Y[t]`, whose diagonal `Y_ii[t]` stands
//! for `‖G x_i[t]‖²`, and adds the penalty `η·Σ_t Σ_i (Y_ii[t] − 2 x̌_i[t]ᵀGᵀG x_i[t])`
//! around the seed `x̌`. Boundary states are fixed, so `Y` only exists at the
//! interior steps `k = 1..T-1`; at `k = 0` the penalty term is a constant.

use std::collections::BTreeMap;

use mrmp_conic::{AffineExpr, BackendResult, ConeKind, ConicProgram, SolveStatus, Var};

use crate::model::{Positions, ProblemInstance, Trajectory};
use crate::trajectory::{add_trajectory, pack_trajectory, unpack_trajectory, TrajectoryVars};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Diagonal `Y` only, pairwise rows `2(Y_ii + Y_jj) >= r² + ‖G(x_i + x_j)‖²`.
    ParabolicSimplified,
    /// Off-diagonal `Y_ij` kept with both paraboloids and the linear collision row.
    ParabolicFull,
    /// Schur-complement PSD block per step.
    Sdp,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::ParabolicSimplified => "parabolic",
            Variant::ParabolicFull => "parabolic-full",
            Variant::Sdp => "sdp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationConfig {
    pub variant: Variant,
    pub eta: f64,
    /// Replace obstacle `Y_jj` by the constant `‖G x_j‖²`.
    pub fix_obstacle_y: bool,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::ParabolicSimplified,
            eta: 50.0,
            fix_obstacle_y: true,
        }
    }
}

/// Where each named quantity lives in the primal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub variant: Variant,
    pub horizon: usize,
    pub n: usize,
    pub robot_ids: Vec<usize>,
    pub obstacle_ids: Vec<usize>,
    pub traj: TrajectoryVars,
    /// `y_diag[entity][k]`, entities are robots then obstacles; `None` where `Y` is constant.
    pub y_diag: Vec<Vec<Option<Var>>>,
    /// `(k, i, j)` with entity indices `i < j`.
    pub y_off: BTreeMap<(usize, usize, usize), Var>,
    /// State indices carrying lifted variables.
    pub lifted_steps: Vec<usize>,
    /// Entity index pairs subject to collision avoidance.
    pub pairs: Vec<(usize, usize)>,
    /// Number of `Y_ii >= ‖G x_i‖²` cones.
    pub diag_rows: usize,
    /// Number of (pair, step) collision couplings.
    pub pair_rows: usize,
    /// Side length of each PSD block (SDP only).
    pub psd_size: Option<usize>,
    pub num_vars: usize,
}

#[derive(Debug, Clone)]
pub struct RelaxedProgram {
    pub program: ConicProgram,
    pub layout: Layout,
}

/// Solver-side iterate mapped back to names.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedIterate {
    /// Every entity, `T+1` states.
    pub states: BTreeMap<usize, Trajectory>,
    /// Robots, `T` controls.
    pub controls: BTreeMap<usize, Trajectory>,
    /// `Y_ii` for every entity and `k = 0..=T`; constant entries hold `‖G x_i‖²`.
    pub y_diag: BTreeMap<usize, Vec<f64>>,
    /// Full `|N|×|N|` matrices at lifted steps (full-parabolic and SDP).
    pub y_full: Option<BTreeMap<usize, Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `Y_ii[t] − ‖G x_i[t]‖²` per robot id and state index.
    pub gaps: BTreeMap<usize, Vec<f64>>,
    pub max_gap: f64,
    pub sum_gap: f64,
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Entity positions as affine expressions: variables for robots, constants for obstacles.
struct Entities<'a> {
    inst: &'a ProblemInstance,
    traj: &'a TrajectoryVars,
    robots: usize,
}

impl Entities<'_> {
    fn count(&self) -> usize {
        self.inst.entity_count()
    }

    fn radius(&self, e: usize) -> f64 {
        if e < self.robots {
            self.inst.robots[e].radius
        } else {
            self.inst.obstacles[e - self.robots].radius
        }
    }

    fn const_position(&self, e: usize, k: usize) -> Option<&[f64]> {
        (e >= self.robots).then(|| self.inst.position(&self.inst.obstacles[e - self.robots].states[k]))
    }

    fn position(&self, e: usize, k: usize) -> Vec<AffineExpr> {
        match self.const_position(e, k) {
            Some(p) => p.iter().map(|&v| AffineExpr::constant(v)).collect(),
            None => self
                .traj
                .position(e, k, self.inst.n)
                .iter()
                .map(|&v| AffineExpr::var(v))
                .collect(),
        }
    }

    fn id(&self, e: usize) -> usize {
        if e < self.robots {
            self.inst.robots[e].id
        } else {
            self.inst.obstacles[e - self.robots].id
        }
    }
}

fn combine(a: &[AffineExpr], b: &[AffineExpr], sign: f64) -> Vec<AffineExpr> {
    a.iter().zip(b).map(|(x, y)| x.clone() + y.clone() * sign).collect()
}

fn check_seed(inst: &ProblemInstance, seed: &Positions) -> Result<(), CoreError> {
    for r in &inst.robots {
        let s = seed
            .get(&r.id)
            .ok_or_else(|| CoreError::Missing(format!("seed for robot {}", r.id)))?;
        if s.len() != inst.horizon + 1 || s.iter().any(|p| p.len() < inst.n) {
            return Err(CoreError::Missing(format!(
                "seed for robot {} needs {} positions of length {}",
                r.id,
                inst.horizon + 1,
                inst.n
            )));
        }
    }
    Ok(())
}

/// Builds the configured relaxation.
pub fn build_relaxation(
    inst: &ProblemInstance,
    seed: &Positions,
    config: &RelaxationConfig,
) -> Result<RelaxedProgram, CoreError> {
    if !(config.eta >= 0.0 && config.eta.is_finite()) {
        return Err(CoreError::Config(format!(
            "eta must be finite and non-negative, got {}",
            config.eta
        )));
    }
    check_seed(inst, seed)?;
    let t_len = inst.horizon;
    let n = inst.n;
    let mut prog = ConicProgram::new();
    let traj = add_trajectory(&mut prog, inst);
    let ents = Entities {
        inst,
        traj: &traj,
        robots: inst.robots.len(),
    };
    let n_ent = ents.count();
    let lifted_steps: Vec<usize> = (1..t_len).collect();

    let mut y_diag: Vec<Vec<Option<Var>>> = vec![vec![None; t_len + 1]; n_ent];
    for (e, row) in y_diag.iter_mut().enumerate() {
        if e < ents.robots || !config.fix_obstacle_y {
            for &k in &lifted_steps {
                row[k] = Some(prog.add_var());
            }
        }
    }
    let y_expr = |e: usize, k: usize| -> AffineExpr {
        match y_diag[e][k] {
            Some(v) => AffineExpr::var(v),
            None => {
                let p = match ents.const_position(e, k) {
                    Some(p) => p,
                    None => inst.position(if k == 0 {
                        &inst.robots[e].x_init
                    } else {
                        &inst.robots[e].x_goal
                    }),
                };
                AffineExpr::constant(sq(p))
            }
        }
    };

    let mut pairs = Vec::new();
    for i in 0..ents.robots {
        for j in i + 1..n_ent {
            pairs.push((i, j));
        }
    }

    // penalty, summed over control steps k = 0..T-1
    let eta = config.eta;
    let mut penalty = AffineExpr::zero();
    for k in 0..t_len {
        for (e, _) in y_diag.iter().enumerate() {
            let seed_pos: Vec<f64> = match ents.const_position(e, k) {
                Some(_) if config.fix_obstacle_y => continue,
                Some(p) => p.to_vec(),
                None => seed[&ents.id(e)][k][..n].to_vec(),
            };
            penalty = penalty + y_expr(e, k) * eta;
            for (pd, s) in ents.position(e, k).into_iter().zip(&seed_pos) {
                penalty = penalty + pd * (-2.0 * eta * s);
            }
        }
    }
    prog.add_objective_expr(penalty);

    // Y_ii >= ‖G x_i‖²; implied by the PSD block in the SDP variant
    let mut diag_rows = 0;
    if config.variant != Variant::Sdp {
        for (e, row) in y_diag.iter().enumerate() {
            for &k in &lifted_steps {
                if let Some(v) = row[k] {
                    prog.add_quadratic_upper_bound(v.into(), ents.position(e, k));
                    diag_rows += 1;
                }
            }
        }
    }

    let mut y_off = BTreeMap::new();
    let mut psd_size = None;
    match config.variant {
        Variant::ParabolicSimplified => {
            for &k in &lifted_steps {
                for &(i, j) in &pairs {
                    let r = ents.radius(i) + ents.radius(j);
                    let lin = (y_expr(i, k) + y_expr(j, k)) * 2.0 - AffineExpr::constant(r * r);
                    prog.add_quadratic_upper_bound(lin, combine(&ents.position(i, k), &ents.position(j, k), 1.0));
                }
            }
        }
        Variant::ParabolicFull => {
            for &k in &lifted_steps {
                for &(i, j) in &pairs {
                    let yij = prog.add_var();
                    y_off.insert((k, i, j), yij);
                    let r = ents.radius(i) + ents.radius(j);
                    let base = y_expr(i, k) + y_expr(j, k);
                    let (pi, pj) = (ents.position(i, k), ents.position(j, k));
                    prog.add_quadratic_upper_bound(base.clone() + AffineExpr::term(yij, 2.0), combine(&pi, &pj, 1.0));
                    prog.add_quadratic_upper_bound(base.clone() - AffineExpr::term(yij, 2.0), combine(&pi, &pj, -1.0));
                    prog.add_nonnegative(base - AffineExpr::term(yij, 2.0) - AffineExpr::constant(r * r));
                }
            }
        }
        Variant::Sdp => {
            let size = n_ent + n;
            psd_size = Some(size);
            for &k in &lifted_steps {
                let mut off = |i: usize, j: usize, prog: &mut ConicProgram| -> AffineExpr {
                    match (ents.const_position(i, k), ents.const_position(j, k)) {
                        (Some(a), Some(b)) if config.fix_obstacle_y => {
                            AffineExpr::constant(a.iter().zip(b).map(|(x, y)| x * y).sum())
                        }
                        _ => {
                            let v = prog.add_var();
                            y_off.insert((k, i, j), v);
                            AffineExpr::var(v)
                        }
                    }
                };
                let mut exprs = Vec::with_capacity(size * (size + 1) / 2);
                for col in 0..size {
                    for row in 0..=col {
                        let e = if col < n_ent {
                            if row == col {
                                y_expr(row, k)
                            } else {
                                off(row, col, &mut prog)
                            }
                        } else if row < n_ent {
                            ents.position(row, k)[col - n_ent].clone()
                        } else {
                            AffineExpr::constant(if row == col { 1.0 } else { 0.0 })
                        };
                        exprs.push(e);
                    }
                }
                prog.add_cone(ConeKind::Psd, exprs).expect("triangular block");
                for &(i, j) in &pairs {
                    let r = ents.radius(i) + ents.radius(j);
                    let yij = AffineExpr::var(y_off[&(k, i, j)]);
                    prog.add_nonnegative(y_expr(i, k) + y_expr(j, k) - yij * 2.0 - AffineExpr::constant(r * r));
                }
            }
        }
    }

    let layout = Layout {
        variant: config.variant,
        horizon: t_len,
        n,
        robot_ids: inst.robots.iter().map(|r| r.id).collect(),
        obstacle_ids: inst.obstacles.iter().map(|o| o.id).collect(),
        traj,
        y_diag,
        y_off,
        pair_rows: pairs.len() * lifted_steps.len(),
        lifted_steps,
        pairs,
        diag_rows,
        psd_size,
        num_vars: prog.num_vars(),
    };
    Ok(RelaxedProgram { program: prog, layout })
}

fn require_variant(config: &RelaxationConfig, v: Variant) -> Result<(), CoreError> {
    if config.variant != v {
        return Err(CoreError::Config(format!(
            "builder for {} called with variant {}",
            v.name(),
            config.variant.name()
        )));
    }
    Ok(())
}

pub fn build_penalized_parabolic(
    inst: &ProblemInstance,
    seed: &Positions,
    config: &RelaxationConfig,
) -> Result<RelaxedProgram, CoreError> {
    require_variant(config, Variant::ParabolicSimplified)?;
    build_relaxation(inst, seed, config)
}

pub fn build_full_parabolic(
    inst: &ProblemInstance,
    seed: &Positions,
    config: &RelaxationConfig,
) -> Result<RelaxedProgram, CoreError> {
    require_variant(config, Variant::ParabolicFull)?;
    build_relaxation(inst, seed, config)
}

pub fn build_sdp(
    inst: &ProblemInstance,
    seed: &Positions,
    config: &RelaxationConfig,
) -> Result<RelaxedProgram, CoreError> {
    require_variant(config, Variant::Sdp)?;
    build_relaxation(inst, seed, config)
}

fn entity_position(inst: &ProblemInstance, states: &BTreeMap<usize, Trajectory>, id: usize, k: usize) -> Vec<f64> {
    inst.position(&states[&id][k]).to_vec()
}

/// Maps an optimal primal vector back to states, controls and `Y`.
pub fn extract_iterate(
    layout: &Layout,
    result: &BackendResult,
    inst: &ProblemInstance,
) -> Result<LiftedIterate, CoreError> {
    let z = match (&result.status, &result.primal) {
        (SolveStatus::Optimal, Some(z)) if z.len() == layout.num_vars => z,
        (SolveStatus::Optimal, _) => return Err(CoreError::Missing("primal vector of matching length".into())),
        (s, _) => return Err(CoreError::Subproblem(format!("cannot extract from status {s}"))),
    };
    Ok(extract_from_primal(layout, z, inst))
}

pub(crate) fn extract_from_primal(layout: &Layout, z: &[f64], inst: &ProblemInstance) -> LiftedIterate {
    let (xs, us) = unpack_trajectory(&layout.traj, z);
    let mut states = BTreeMap::new();
    let mut controls = BTreeMap::new();
    for ((id, x), u) in layout.robot_ids.iter().zip(xs).zip(us) {
        states.insert(*id, x);
        controls.insert(*id, u);
    }
    for o in &inst.obstacles {
        states.insert(o.id, o.states.clone());
    }
    let ids: Vec<usize> = layout.robot_ids.iter().chain(&layout.obstacle_ids).copied().collect();
    let mut y_diag: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (e, &id) in ids.iter().enumerate() {
        let row: Vec<f64> = (0..=layout.horizon)
            .map(|k| match layout.y_diag[e][k] {
                Some(v) => z[v.0],
                None => sq(&entity_position(inst, &states, id, k)),
            })
            .collect();
        y_diag.insert(id, row);
    }
    let y_full = (layout.variant != Variant::ParabolicSimplified).then(|| {
        let mut out = BTreeMap::new();
        for &k in &layout.lifted_steps {
            let pos: Vec<Vec<f64>> = ids.iter().map(|&id| entity_position(inst, &states, id, k)).collect();
            let mut m = vec![vec![0.0; ids.len()]; ids.len()];
            for i in 0..ids.len() {
                m[i][i] = y_diag[&ids[i]][k];
                for j in i + 1..ids.len() {
                    let v = match layout.y_off.get(&(k, i, j)) {
                        Some(v) => z[v.0],
                        None => pos[i].iter().zip(&pos[j]).map(|(a, b)| a * b).sum(),
                    };
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            out.insert(k, m);
        }
        out
    });
    LiftedIterate {
        states,
        controls,
        y_diag,
        y_full,
    }
}

/// Primal vector of the exact lift of a trajectory: `Y_ii = ‖G x_i‖²`,
/// `Y_ij = (G x_i)ᵀ(G x_j)` and epigraph variables at their norms.
pub fn lift_solution(
    layout: &Layout,
    inst: &ProblemInstance,
    states: &BTreeMap<usize, Trajectory>,
    controls: &BTreeMap<usize, Trajectory>,
) -> Result<Vec<f64>, CoreError> {
    let mut all_states = states.clone();
    for o in &inst.obstacles {
        all_states.entry(o.id).or_insert_with(|| o.states.clone());
    }
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for id in &layout.robot_ids {
        xs.push(
            all_states
                .get(id)
                .ok_or_else(|| CoreError::Missing(format!("states of robot {id}")))?
                .as_slice(),
        );
        us.push(
            controls
                .get(id)
                .ok_or_else(|| CoreError::Missing(format!("controls of robot {id}")))?
                .as_slice(),
        );
    }
    let mut z = vec![0.0; layout.num_vars];
    pack_trajectory(&layout.traj, &xs, &us, &mut z);
    let ids: Vec<usize> = layout.robot_ids.iter().chain(&layout.obstacle_ids).copied().collect();
    for (e, row) in layout.y_diag.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            if let Some(v) = v {
                z[v.0] = sq(&entity_position(inst, &all_states, ids[e], k));
            }
        }
    }
    for (&(k, i, j), v) in &layout.y_off {
        let (a, b) = (
            entity_position(inst, &all_states, ids[i], k),
            entity_position(inst, &all_states, ids[j], k),
        );
        z[v.0] = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    }
    Ok(z)
}

/// `Y_ii[t] − ‖G x_i[t]‖²` for every robot.
pub fn relaxation_gap(iterate: &LiftedIterate, inst: &ProblemInstance) -> GapReport {
    let mut gaps = BTreeMap::new();
    let mut max_gap = f64::NEG_INFINITY;
    let mut sum_gap = 0.0;
    for r in &inst.robots {
        let (Some(y), Some(x)) = (iterate.y_diag.get(&r.id), iterate.states.get(&r.id)) else {
            continue;
        };
        let g: Vec<f64> = y.iter().zip(x).map(|(y, x)| y - sq(inst.position(x))).collect();
        for &v in &g {
            max_gap = max_gap.max(v);
            sum_gap += v;
        }
        gaps.insert(r.id, g);
    }
    if gaps.is_empty() {
        max_gap = 0.0;
    }
    GapReport { gaps, max_gap, sum_gap }
}

/// Penalty value `η·Σ_{k<T} Σ_i (Y_ii[k] − 2 x̌_i[k]ᵀ G x_i[k])` over robots at an iterate.
pub fn penalty_value(iterate: &LiftedIterate, inst: &ProblemInstance, seed: &Positions, eta: f64) -> f64 {
    let mut total = 0.0;
    for r in &inst.robots {
        for k in 0..inst.horizon {
            let p = inst.position(&iterate.states[&r.id][k]);
            let s = &seed[&r.id][k];
            let cross: f64 = p.iter().zip(s).map(|(a, b)| a * b).sum();
            total += iterate.y_diag[&r.id][k] - 2.0 * cross;
        }
    }
    eta * total
}
