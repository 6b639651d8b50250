//! Problem instances, linear dynamics and the independent feasibility checker.
//!
//! Time is 0-based in code: state index `k = 0..=T` is time step `t = k + 1`,
//! control index `k = 0..T` drives `x[k] -> x[k + 1]`.

use std::collections::BTreeMap;

use crate::CoreError;

/// Per-entity trajectory of vectors, indexed by time.
pub type Trajectory = Vec<Vec<f64>>;

/// Seed or iterate positions `G·x_i[t]`, keyed by robot id.
pub type Positions = BTreeMap<usize, Trajectory>;

/// Discrete linear dynamics `x⁺ = A x + B u` over a state `(position, velocity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    /// Row-major `2n×2n`.
    pub a: Vec<Vec<f64>>,
    /// Row-major `2n×m`.
    pub b: Vec<Vec<f64>>,
    pub n: usize,
    pub m: usize,
    /// Metadata only; `a` and `b` are already discrete.
    pub dt: f64,
}

impl DynamicsModel {
    pub fn state_dim(&self) -> usize {
        2 * self.n
    }

    pub fn check_shape(&self) -> Result<(), CoreError> {
        let s = self.state_dim();
        let ok = self.a.len() == s
            && self.a.iter().all(|r| r.len() == s)
            && self.b.len() == s
            && self.b.iter().all(|r| r.len() == self.m);
        if !ok {
            return Err(CoreError::Dimension(format!(
                "dynamics must be A {s}×{s}, B {s}×{}",
                self.m
            )));
        }
        if self.a.iter().chain(&self.b).flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInstance("non-finite dynamics entry".into()));
        }
        Ok(())
    }
}

/// Zero-order-hold double integrator: `A = [[I, dt·I], [0, I]]`, `B = [[dt²/2·I], [dt·I]]`.
pub fn build_double_integrator(n: usize, dt: f64) -> Result<DynamicsModel, CoreError> {
    if !(1..=3).contains(&n) {
        return Err(CoreError::Dimension(format!(
            "unsupported dimension n = {n}, expected 1, 2 or 3"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CoreError::InvalidInstance(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let s = 2 * n;
    let mut a = vec![vec![0.0; s]; s];
    let mut b = vec![vec![0.0; n]; s];
    for i in 0..n {
        a[i][i] = 1.0;
        a[i][n + i] = dt;
        a[n + i][n + i] = 1.0;
        b[i][i] = 0.5 * dt * dt;
        b[n + i][i] = dt;
    }
    Ok(DynamicsModel { a, b, n, m: n, dt })
}

/// `A·x + B·u`.
pub fn propagate(model: &DynamicsModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>, CoreError> {
    if x.len() != model.state_dim() || u.len() != model.m {
        return Err(CoreError::Dimension(format!(
            "propagate expects state {} and control {}, got {} and {}",
            model.state_dim(),
            model.m,
            x.len(),
            u.len()
        )));
    }
    Ok(model
        .a
        .iter()
        .zip(&model.b)
        .map(|(ar, br)| {
            ar.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + br.iter().zip(u).map(|(b, u)| b * u).sum::<f64>()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub id: usize,
    pub dynamics: DynamicsModel,
    pub radius: f64,
    pub u_max: f64,
    pub x_init: Vec<f64>,
    pub x_goal: Vec<f64>,
}

/// Obstacle with a known trajectory; `states[k]` for `k = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub id: usize,
    pub radius: f64,
    pub states: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub robots: Vec<RobotSpec>,
    pub obstacles: Vec<ObstacleSpec>,
    /// Number of control steps `T`.
    pub horizon: usize,
    pub n: usize,
    /// Control-bound norm, 1 or 2.
    pub p: u8,
    /// Objective norm, 1 or 2.
    pub q: u8,
    pub dt: f64,
}

pub fn norm(v: &[f64], p: u8) -> f64 {
    match p {
        1 => v.iter().map(|x| x.abs()).sum(),
        _ => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl ProblemInstance {
    /// `G·x`: the first `n` entries of a state.
    pub fn position<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n]
    }

    pub fn entity_count(&self) -> usize {
        self.robots.len() + self.obstacles.len()
    }

    pub fn robot(&self, id: usize) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.id == id)
    }

    /// Structural checks plus separation of everything fixed by the instance:
    /// obstacle pairs at every time, robot pairs at start and goal, and
    /// robot–obstacle pairs at the first and last time step.
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |msg: String| Err(CoreError::InvalidInstance(msg));
        if !(1..=3).contains(&self.n) {
            return Err(CoreError::Dimension(format!("unsupported dimension n = {}", self.n)));
        }
        if !matches!(self.p, 1 | 2) || !matches!(self.q, 1 | 2) {
            return bad(format!("norms must be 1 or 2, got p = {}, q = {}", self.p, self.q));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        let mut ids: Vec<usize> = self
            .robots
            .iter()
            .map(|r| r.id)
            .chain(self.obstacles.iter().map(|o| o.id))
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) || ids.first() == Some(&0) {
            return bad("entity ids must be unique and positive".into());
        }
        let s = 2 * self.n;
        for r in &self.robots {
            if r.dynamics.n != self.n {
                return Err(CoreError::Dimension(format!(
                    "robot {} has dimension {}",
                    r.id, r.dynamics.n
                )));
            }
            r.dynamics.check_shape()?;
            if r.dynamics.m == 0 {
                return bad(format!("robot {} has no controls", r.id));
            }
            if r.x_init.len() != s || r.x_goal.len() != s {
                return Err(CoreError::Dimension(format!(
                    "robot {} boundary states must have length {s}",
                    r.id
                )));
            }
            if !(r.radius > 0.0 && r.radius.is_finite()) || !(r.u_max > 0.0 && r.u_max.is_finite()) {
                return bad(format!("robot {} needs positive radius and u_max", r.id));
            }
            if r.x_init.iter().chain(&r.x_goal).any(|v| !v.is_finite()) {
                return bad(format!("robot {} has non-finite boundary states", r.id));
            }
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0 && o.radius.is_finite()) {
                return bad(format!("obstacle {} needs a positive radius", o.id));
            }
            if o.states.len() != self.horizon + 1 {
                return bad(format!(
                    "obstacle {} has {} states, expected {}",
                    o.id,
                    o.states.len(),
                    self.horizon + 1
                ));
            }
            if o.states
                .iter()
                .any(|x| x.len() != s || x.iter().any(|v| !v.is_finite()))
            {
                return Err(CoreError::Dimension(format!(
                    "obstacle {} states must be finite of length {s}",
                    o.id
                )));
            }
        }
        for (a, oa) in self.obstacles.iter().enumerate() {
            for ob in &self.obstacles[a + 1..] {
                for k in 0..=self.horizon {
                    let d = distance(self.position(&oa.states[k]), self.position(&ob.states[k]));
                    if d < oa.radius + ob.radius {
                        return bad(format!("obstacles {} and {} overlap at t = {}", oa.id, ob.id, k + 1));
                    }
                }
            }
        }
        for (a, ra) in self.robots.iter().enumerate() {
            for rb in &self.robots[a + 1..] {
                let r = ra.radius + rb.radius;
                if distance(self.position(&ra.x_init), self.position(&rb.x_init)) < r {
                    return bad(format!("robots {} and {} overlap at their starts", ra.id, rb.id));
                }
                if distance(self.position(&ra.x_goal), self.position(&rb.x_goal)) < r {
                    return bad(format!("robots {} and {} overlap at their goals", ra.id, rb.id));
                }
            }
            for o in &self.obstacles {
                let r = ra.radius + o.radius;
                if distance(self.position(&ra.x_init), self.position(&o.states[0])) < r {
                    return bad(format!("robot {} starts inside obstacle {}", ra.id, o.id));
                }
                if distance(self.position(&ra.x_goal), self.position(&o.states[self.horizon])) < r {
                    return bad(format!("robot {} ends inside obstacle {}", ra.id, o.id));
                }
            }
        }
        Ok(())
    }
}

/// States and controls of every robot, plus copied obstacle states.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Keyed by entity id, `T+1` states each.
    pub states: BTreeMap<usize, Trajectory>,
    /// Keyed by robot id, `T` controls each.
    pub controls: BTreeMap<usize, Trajectory>,
    pub objective: f64,
}

impl Solution {
    /// Rolls out every robot from its controls and fills in the objective.
    pub fn from_controls(inst: &ProblemInstance, controls: BTreeMap<usize, Trajectory>) -> Result<Self, CoreError> {
        let mut states = BTreeMap::new();
        for r in &inst.robots {
            let u = controls
                .get(&r.id)
                .ok_or_else(|| CoreError::Missing(format!("controls of robot {}", r.id)))?;
            if u.len() != inst.horizon {
                return Err(CoreError::Dimension(format!(
                    "robot {} has {} controls, expected {}",
                    r.id,
                    u.len(),
                    inst.horizon
                )));
            }
            states.insert(r.id, rollout(r, u)?);
        }
        for o in &inst.obstacles {
            states.insert(o.id, o.states.clone());
        }
        let mut sol = Solution {
            states,
            controls,
            objective: 0.0,
        };
        sol.objective = evaluate_objective(inst, &sol)?;
        Ok(sol)
    }
}

/// `states[0] = x_init`, `states[k+1] = A·states[k] + B·controls[k]`.
pub fn rollout(robot: &RobotSpec, controls: &[Vec<f64>]) -> Result<Trajectory, CoreError> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(robot.x_init.clone());
    for u in controls {
        let next = propagate(&robot.dynamics, states.last().unwrap(), u)?;
        states.push(next);
    }
    Ok(states)
}

/// Linear interpolation of positions from start to goal for every robot.
pub fn straight_line_seed(inst: &ProblemInstance) -> Positions {
    let t = inst.horizon as f64;
    inst.robots
        .iter()
        .map(|r| {
            let (a, b) = (inst.position(&r.x_init), inst.position(&r.x_goal));
            let traj = (0..=inst.horizon)
                .map(|k| {
                    if k == inst.horizon {
                        // exact endpoint regardless of rounding
                        return b.to_vec();
                    }
                    let s = k as f64 / t;
                    a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect()
                })
                .collect();
            (r.id, traj)
        })
        .collect()
}

/// `Σ_t Σ_i ‖u_i[t]‖_q`.
pub fn evaluate_objective(inst: &ProblemInstance, sol: &Solution) -> Result<f64, CoreError> {
    let mut total = 0.0;
    for r in &inst.robots {
        let u = sol
            .controls
            .get(&r.id)
            .ok_or_else(|| CoreError::Missing(format!("controls of robot {}", r.id)))?;
        if u.len() != inst.horizon {
            return Err(CoreError::Missing(format!("robot {} has {} controls", r.id, u.len())));
        }
        total += u.iter().map(|v| norm(v, inst.q)).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Dynamics and boundary residuals.
    pub dynamics: f64,
    pub control: f64,
    /// Meters.
    pub collision: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            dynamics: 1e-6,
            control: 1e-6,
            collision: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub dynamics_residual: f64,
    pub boundary_residual: f64,
    pub control_violation: f64,
    pub collision_violation: f64,
    pub feasible: bool,
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Residuals of a candidate solution against the original non-convex problem.
/// Missing or malformed entries count as infinite violations.
pub fn verify(inst: &ProblemInstance, sol: &Solution, tol: &Tolerances) -> FeasibilityReport {
    let t_len = inst.horizon;
    let mut dynamics = 0.0f64;
    let mut boundary = 0.0f64;
    let mut control = 0.0f64;
    let mut collision = 0.0f64;

    let mut positions: Vec<(f64, Vec<&[f64]>)> = Vec::new();
    for r in &inst.robots {
        let (Some(x), Some(u)) = (sol.states.get(&r.id), sol.controls.get(&r.id)) else {
            dynamics = f64::INFINITY;
            continue;
        };
        if x.len() != t_len + 1 || u.len() != t_len || x.iter().any(|s| s.len() != 2 * inst.n) {
            dynamics = f64::INFINITY;
            continue;
        }
        for k in 0..t_len {
            match propagate(&r.dynamics, &x[k], &u[k]) {
                Ok(next) => dynamics = dynamics.max(inf_dist(&next, &x[k + 1])),
                Err(_) => dynamics = f64::INFINITY,
            }
            control = control.max(norm(&u[k], inst.p) - r.u_max);
        }
        boundary = boundary
            .max(inf_dist(&x[0], &r.x_init))
            .max(inf_dist(&x[t_len], &r.x_goal));
        positions.push((r.radius, x.iter().map(|s| inst.position(s)).collect()));
    }
    let robots = positions.len();
    for o in &inst.obstacles {
        positions.push((o.radius, o.states.iter().map(|s| inst.position(s)).collect()));
    }
    for i in 0..robots {
        for j in i + 1..positions.len() {
            let (ri, pi) = &positions[i];
            let (rj, pj) = &positions[j];
            for k in 0..=t_len {
                collision = collision.max(ri + rj - distance(pi[k], pj[k]));
            }
        }
    }
    let control = control.max(0.0);
    let collision = collision.max(0.0);
    let feasible =
        dynamics <= tol.dynamics && boundary <= tol.dynamics && control <= tol.control && collision <= tol.collision;
    FeasibilityReport {
        dynamics_residual: dynamics,
        boundary_residual: boundary,
        control_violation: control,
        collision_violation: collision,
        feasible,
    }
}
