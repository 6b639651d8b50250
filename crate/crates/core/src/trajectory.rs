//! Convex part shared by every builder: states, controls, dynamics, boundary
//! conditions, control bounds and the fuel objective.

use mrmp_conic::{AffineExpr, ConeKind, ConicProgram, Var};

use crate::model::ProblemInstance;

/// Epigraph auxiliary introduced for a norm term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aux {
    /// `s >= |u_i[k][c]|`.
    Abs { robot: usize, k: usize, comp: usize },
    /// `t >= ‖u_i[k]‖₂`.
    Norm { robot: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryVars {
    /// `x[robot][k][component]`, `k = 0..=T`.
    pub x: Vec<Vec<Vec<Var>>>,
    /// `u[robot][k][component]`, `k = 0..T`.
    pub u: Vec<Vec<Vec<Var>>>,
    pub aux: Vec<(Var, Aux)>,
}

impl TrajectoryVars {
    pub fn position(&self, robot: usize, k: usize, n: usize) -> &[Var] {
        &self.x[robot][k][..n]
    }
}

pub(crate) fn add_trajectory(prog: &mut ConicProgram, inst: &ProblemInstance) -> TrajectoryVars {
    let t_len = inst.horizon;
    let mut x = Vec::with_capacity(inst.robots.len());
    let mut u = Vec::with_capacity(inst.robots.len());
    let mut aux = Vec::new();

    for (ri, r) in inst.robots.iter().enumerate() {
        let dynm = &r.dynamics;
        let xs: Vec<Vec<Var>> = (0..=t_len).map(|_| prog.add_vars(dynm.state_dim())).collect();
        let us: Vec<Vec<Var>> = (0..t_len).map(|_| prog.add_vars(dynm.m)).collect();

        for k in 0..t_len {
            for row in 0..dynm.state_dim() {
                let mut e = AffineExpr::var(xs[k + 1][row]);
                for (col, &a) in dynm.a[row].iter().enumerate() {
                    if a != 0.0 {
                        e.push_term(xs[k][col], -a);
                    }
                }
                for (col, &b) in dynm.b[row].iter().enumerate() {
                    if b != 0.0 {
                        e.push_term(us[k][col], -b);
                    }
                }
                prog.add_equality(e);
            }
        }
        for (c, (&v0, &v1)) in r.x_init.iter().zip(&r.x_goal).enumerate() {
            prog.add_equality(AffineExpr::var(xs[0][c]).with_constant(-v0));
            prog.add_equality(AffineExpr::var(xs[t_len][c]).with_constant(-v1));
        }

        for (k, uk) in us.iter().enumerate() {
            let mut abs_vars = Vec::new();
            let new_abs = |prog: &mut ConicProgram, aux: &mut Vec<(Var, Aux)>| -> Vec<Var> {
                uk.iter()
                    .enumerate()
                    .map(|(comp, &v)| {
                        let s = prog.add_abs_epigraph(v.into());
                        aux.push((s, Aux::Abs { robot: ri, k, comp }));
                        s
                    })
                    .collect()
            };
            if inst.q == 1 {
                abs_vars = new_abs(prog, &mut aux);
                for &s in &abs_vars {
                    prog.add_objective_term(s, 1.0);
                }
            } else {
                let t = prog.add_norm2_epigraph(uk.iter().map(|&v| v.into()).collect());
                aux.push((t, Aux::Norm { robot: ri, k }));
                prog.add_objective_term(t, 1.0);
            }
            if inst.p == 1 {
                if abs_vars.is_empty() {
                    abs_vars = new_abs(prog, &mut aux);
                }
                let mut e = AffineExpr::constant(r.u_max);
                for &s in &abs_vars {
                    e.push_term(s, -1.0);
                }
                prog.add_nonnegative(e);
            } else {
                let mut exprs = vec![AffineExpr::constant(r.u_max)];
                exprs.extend(uk.iter().map(|&v| AffineExpr::var(v)));
                prog.add_cone(ConeKind::SecondOrder, exprs)
                    .expect("control bound cone has at least two entries");
            }
        }
        x.push(xs);
        u.push(us);
    }
    TrajectoryVars { x, u, aux }
}

/// Writes states, controls and exact epigraph values into `z`.
pub(crate) fn pack_trajectory(vars: &TrajectoryVars, states: &[&[Vec<f64>]], controls: &[&[Vec<f64>]], z: &mut [f64]) {
    for (ri, xs) in vars.x.iter().enumerate() {
        for (k, xk) in xs.iter().enumerate() {
            for (c, v) in xk.iter().enumerate() {
                z[v.0] = states[ri][k][c];
            }
        }
        for (k, uk) in vars.u[ri].iter().enumerate() {
            for (c, v) in uk.iter().enumerate() {
                z[v.0] = controls[ri][k][c];
            }
        }
    }
    for &(v, a) in &vars.aux {
        z[v.0] = match a {
            Aux::Abs { robot, k, comp } => controls[robot][k][comp].abs(),
            Aux::Norm { robot, k } => controls[robot][k].iter().map(|c| c * c).sum::<f64>().sqrt(),
        };
    }
}

/// Reads `(states, controls)` of every robot from a primal vector.
pub(crate) fn unpack_trajectory(vars: &TrajectoryVars, z: &[f64]) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
    let read = |vs: &Vec<Vec<Vec<Var>>>| -> Vec<Vec<Vec<f64>>> {
        vs.iter()
            .map(|traj| traj.iter().map(|vk| vk.iter().map(|v| z[v.0]).collect()).collect())
            .collect()
    };
    (read(&vars.x), read(&vars.u))
}
