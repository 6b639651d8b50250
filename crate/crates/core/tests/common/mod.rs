#![allow(dead_code)]

use std::collections::BTreeMap;

use mrmp_conic::{solve, AffineExpr, ConicProgram, InteriorPoint, SolveStatus};
use mrmp_core::model::{build_double_integrator, ObstacleSpec, ProblemInstance, RobotSpec, Solution};

pub fn robot(id: usize, from: [f64; 2], to: [f64; 2]) -> RobotSpec {
    RobotSpec {
        id,
        dynamics: build_double_integrator(2, 0.1).unwrap(),
        radius: 0.05,
        u_max: 2.0,
        x_init: vec![from[0], from[1], 0.0, 0.0],
        x_goal: vec![to[0], to[1], 0.0, 0.0],
    }
}

pub fn obstacle(id: usize, at: [f64; 2], horizon: usize) -> ObstacleSpec {
    ObstacleSpec {
        id,
        radius: 0.05,
        states: vec![vec![at[0], at[1], 0.0, 0.0]; horizon + 1],
    }
}

pub fn instance(robots: Vec<RobotSpec>, obstacles: Vec<ObstacleSpec>, horizon: usize) -> ProblemInstance {
    ProblemInstance {
        robots,
        obstacles,
        horizon,
        n: 2,
        p: 1,
        q: 1,
        dt: 0.1,
    }
}

/// Minimum-fuel transfer of one 2D double-integrator robot with `p = q = 1` and no
/// collision rows, written out term by term. `waypoints` pins positions at given steps.
/// Returns the optimal fuel and the controls.
pub fn fuel_optimal_controls(
    r: &RobotSpec,
    horizon: usize,
    dt: f64,
    waypoints: &[(usize, [f64; 2])],
) -> (f64, Vec<Vec<f64>>) {
    let mut prog = ConicProgram::new();
    let x: Vec<Vec<_>> = (0..=horizon).map(|_| prog.add_vars(4)).collect();
    let u: Vec<Vec<_>> = (0..horizon).map(|_| prog.add_vars(2)).collect();
    for c in 0..4 {
        prog.add_equality(AffineExpr::var(x[0][c]).with_constant(-r.x_init[c]));
        prog.add_equality(AffineExpr::var(x[horizon][c]).with_constant(-r.x_goal[c]));
    }
    for &(k, p) in waypoints {
        for c in 0..2 {
            prog.add_equality(AffineExpr::var(x[k][c]).with_constant(-p[c]));
        }
    }
    for k in 0..horizon {
        for a in 0..2 {
            // p' = p + dt v + dt²/2 u,  v' = v + dt u
            prog.add_equality(
                AffineExpr::var(x[k + 1][a])
                    .with_term(x[k][a], -1.0)
                    .with_term(x[k][a + 2], -dt)
                    .with_term(u[k][a], -dt * dt / 2.0),
            );
            prog.add_equality(
                AffineExpr::var(x[k + 1][a + 2])
                    .with_term(x[k][a + 2], -1.0)
                    .with_term(u[k][a], -dt),
            );
        }
        let s: Vec<_> = u[k]
            .iter()
            .map(|&v| prog.add_abs_epigraph(AffineExpr::var(v)))
            .collect();
        for &v in &s {
            prog.add_objective_term(v, 1.0);
        }
        prog.add_nonnegative(
            AffineExpr::constant(r.u_max)
                .with_term(s[0], -1.0)
                .with_term(s[1], -1.0),
        );
    }
    let res = solve(&prog, &InteriorPoint::new()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal, "oracle transfer not solvable");
    let z = res.primal.unwrap();
    let controls = u.iter().map(|uk| uk.iter().map(|v| z[v.0]).collect()).collect();
    (res.objective_value, controls)
}

/// Optimal fuel of the whole instance with collision avoidance dropped.
pub fn direct_fuel_optimum(inst: &ProblemInstance) -> f64 {
    inst.robots
        .iter()
        .map(|r| fuel_optimal_controls(r, inst.horizon, inst.dt, &[]).0)
        .sum()
}

/// Solution whose robots pass through the given waypoints, built from oracle controls.
pub fn detour_solution(inst: &ProblemInstance, waypoints: &[Vec<(usize, [f64; 2])>]) -> Solution {
    let controls: BTreeMap<usize, Vec<Vec<f64>>> = inst
        .robots
        .iter()
        .zip(waypoints)
        .map(|(r, w)| (r.id, fuel_optimal_controls(r, inst.horizon, inst.dt, w).1))
        .collect();
    Solution::from_controls(inst, controls).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Positions of every robot as straight lines between two points.
pub fn line(from: [f64; 2], to: [f64; 2], horizon: usize) -> Vec<Vec<f64>> {
    (0..=horizon)
        .map(|k| {
            let s = k as f64 / horizon as f64;
            vec![from[0] + s * (to[0] - from[0]), from[1] + s * (to[1] - from[1])]
        })
        .collect()
}

pub fn seed_of(entries: Vec<(usize, Vec<Vec<f64>>)>) -> BTreeMap<usize, Vec<Vec<f64>>> {
    entries.into_iter().collect()
}
