//! Scenario generators and the experiment harnesses.

use std::f64::consts::PI;
use std::io::Write;

use mrmp_conic::Backend;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{
    build_double_integrator, straight_line_seed, verify, ObstacleSpec, Positions, ProblemInstance, RobotSpec,
    Tolerances,
};
use crate::relax::{build_relaxation, RelaxationConfig, Variant};
use crate::scp::{solve_scp, ScpConfig};
use crate::sequential::{solve_sequential, SequentialConfig, SolveReport, Termination};
use crate::CoreError;

/// Generator identity written next to every seeded result.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng/seed_from_u64";

#[derive(Debug, Clone, PartialEq)]
pub struct RandomMapSpec {
    pub arena_min: f64,
    pub arena_max: f64,
    pub num_robots: usize,
    pub num_obstacles: usize,
    pub entity_diameter: f64,
    pub rng_seed: u64,
    /// Per placed entity.
    pub max_placement_attempts: usize,
    pub dimension: usize,
}

impl Default for RandomMapSpec {
    fn default() -> Self {
        Self {
            arena_min: 0.0,
            arena_max: 1.0,
            num_robots: 1,
            num_obstacles: 0,
            entity_diameter: 0.1,
            rng_seed: 0,
            max_placement_attempts: 10_000,
            dimension: 2,
        }
    }
}

/// Horizon, dynamics and norm choices shared by generated instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessParams {
    pub horizon: usize,
    pub dt: f64,
    pub u_max: f64,
    pub p: u8,
    pub q: u8,
}

impl Default for HarnessParams {
    fn default() -> Self {
        Self {
            horizon: 30,
            dt: 0.1,
            u_max: 2.0,
            p: 1,
            q: 1,
        }
    }
}

fn state_at_rest(pos: &[f64]) -> Vec<f64> {
    let mut s = pos.to_vec();
    s.extend(std::iter::repeat_n(0.0, pos.len()));
    s
}

fn make_instance(
    params: &HarnessParams,
    n: usize,
    radius: f64,
    robots: &[(Vec<f64>, Vec<f64>)],
    obstacles: &[(Vec<f64>, f64)],
) -> Result<ProblemInstance, CoreError> {
    let dynamics = build_double_integrator(n, params.dt)?;
    let robots = robots
        .iter()
        .enumerate()
        .map(|(i, (a, b))| RobotSpec {
            id: i + 1,
            dynamics: dynamics.clone(),
            radius,
            u_max: params.u_max,
            x_init: state_at_rest(a),
            x_goal: state_at_rest(b),
        })
        .collect::<Vec<_>>();
    let first = robots.len() + 1;
    let obstacles = obstacles
        .iter()
        .enumerate()
        .map(|(j, (p, r))| ObstacleSpec {
            id: first + j,
            radius: *r,
            states: vec![state_at_rest(p); params.horizon + 1],
        })
        .collect();
    let inst = ProblemInstance {
        robots,
        obstacles,
        horizon: params.horizon,
        n,
        p: params.p,
        q: params.q,
        dt: params.dt,
    };
    inst.validate()?;
    Ok(inst)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Uniform rejection sampling of robot starts, obstacles and robot goals.
pub fn generate_random_instance(spec: &RandomMapSpec, params: &HarnessParams) -> Result<ProblemInstance, CoreError> {
    if !(2..=3).contains(&spec.dimension) {
        return Err(CoreError::Config(format!(
            "dimension must be 2 or 3, got {}",
            spec.dimension
        )));
    }
    let r = spec.entity_diameter / 2.0;
    let (lo, hi) = (spec.arena_min + r, spec.arena_max - r);
    if !(r > 0.0) || !(lo < hi) {
        return Err(CoreError::Config("arena too small for the entity diameter".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut place = |taken: &[Vec<f64>], what: &str, idx: usize| -> Result<Vec<f64>, CoreError> {
        for _ in 0..spec.max_placement_attempts {
            let p: Vec<f64> = (0..spec.dimension).map(|_| rng.random_range(lo..hi)).collect();
            if taken.iter().all(|q| dist(&p, q) >= spec.entity_diameter) {
                return Ok(p);
            }
        }
        Err(CoreError::Generation(format!(
            "could not place {what} {idx} after {} attempts",
            spec.max_placement_attempts
        )))
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..spec.num_robots {
        let p = place(&starts, "robot start", i + 1)?;
        starts.push(p);
    }
    for j in 0..spec.num_obstacles {
        let p = place(&starts, "obstacle", j + 1)?;
        starts.push(p);
    }
    let mut goal_blockers: Vec<Vec<f64>> = starts[spec.num_robots..].to_vec();
    let mut goals = Vec::new();
    for i in 0..spec.num_robots {
        let p = place(&goal_blockers, "robot goal", i + 1)?;
        goal_blockers.push(p.clone());
        goals.push(p);
    }
    let robots: Vec<(Vec<f64>, Vec<f64>)> = starts[..spec.num_robots].iter().cloned().zip(goals).collect();
    let obstacles: Vec<(Vec<f64>, f64)> = starts[spec.num_robots..].iter().map(|p| (p.clone(), r)).collect();
    make_instance(params, spec.dimension, r, &robots, &obstacles)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Wall at `x = 0.5` with a centered gap of `gap` meters; each robot crosses at its own height.
    Bottleneck { robots: usize, gap: f64 },
    /// Two staggered walls; each opening is `clearance` meters wide.
    Maze { clearance: f64 },
    /// Robots on a circle around the arena center, goals antipodal.
    SwapCircle { robots: usize, radius: f64 },
}

impl Preset {
    pub fn from_name(name: &str, robots: usize, width: f64) -> Result<Self, CoreError> {
        match name {
            "bottleneck" => Ok(Preset::Bottleneck { robots, gap: width }),
            "maze" => Ok(Preset::Maze { clearance: width }),
            "swap_circle" | "swap-circle" => Ok(Preset::SwapCircle { robots, radius: width }),
            other => Err(CoreError::Config(format!("unknown preset {other:?}"))),
        }
    }
}

const ENTITY_RADIUS: f64 = 0.05;
const WALL_SPACING: f64 = 0.105;

/// Obstacle centers along `x = x0` covering `[0, 1]` except an opening centered at `y_open`.
fn wall(x0: f64, y_open: f64, width: f64) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    let mut y = y_open + width / 2.0 + ENTITY_RADIUS;
    while y <= 1.0 {
        out.push((vec![x0, y], ENTITY_RADIUS));
        y += WALL_SPACING;
    }
    let mut y = y_open - width / 2.0 - ENTITY_RADIUS;
    while y >= 0.0 {
        out.push((vec![x0, y], ENTITY_RADIUS));
        y -= WALL_SPACING;
    }
    out
}

pub fn generate_preset(preset: Preset, params: &HarnessParams) -> Result<ProblemInstance, CoreError> {
    let d = 2.0 * ENTITY_RADIUS;
    match preset {
        Preset::Bottleneck { robots, gap } => {
            if !(gap > 0.0) || robots == 0 {
                return Err(CoreError::Generation(
                    "bottleneck needs a positive gap and at least one robot".into(),
                ));
            }
            let ys: Vec<f64> = (0..robots)
                .map(|i| {
                    if robots == 1 {
                        0.3
                    } else {
                        0.1 + 0.8 * i as f64 / (robots - 1) as f64
                    }
                })
                .collect();
            if robots > 1 && (0.8 / (robots - 1) as f64) < d {
                return Err(CoreError::Generation(format!(
                    "{robots} robots do not fit along the wall"
                )));
            }
            let rs: Vec<_> = ys.iter().map(|&y| (vec![0.1, y], vec![0.9, y])).collect();
            make_instance(params, 2, ENTITY_RADIUS, &rs, &wall(0.5, 0.5, gap))
        }
        Preset::Maze { clearance } => {
            if !(clearance >= d) {
                return Err(CoreError::Generation(format!(
                    "maze clearance {clearance} is below the robot diameter {d}"
                )));
            }
            let mut obstacles = wall(1.0 / 3.0, 0.8, clearance);
            obstacles.extend(wall(2.0 / 3.0, 0.2, clearance));
            make_instance(
                params,
                2,
                ENTITY_RADIUS,
                &[(vec![0.1, 0.1], vec![0.9, 0.9])],
                &obstacles,
            )
        }
        Preset::SwapCircle { robots, radius } => {
            if robots == 0 || !(radius > 0.0) || radius + ENTITY_RADIUS > 0.5 {
                return Err(CoreError::Generation(
                    "swap_circle needs robots >= 1 and radius in (0, 0.45]".into(),
                ));
            }
            let rs: Vec<_> = (0..robots)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / robots as f64;
                    let (s, c) = th.sin_cos();
                    (
                        vec![0.5 + radius * c, 0.5 + radius * s],
                        vec![0.5 - radius * c, 0.5 - radius * s],
                    )
                })
                .collect();
            make_instance(params, 2, ENTITY_RADIUS, &rs, &[])
        }
    }
}

/// Seeds that run from each start to `via` at `T/2`, then on to the goal.
pub fn corner_seed(inst: &ProblemInstance, via: &[f64]) -> Positions {
    let t_len = inst.horizon;
    let mid = t_len.div_ceil(2);
    inst.robots
        .iter()
        .map(|r| {
            let (a, b) = (inst.position(&r.x_init), inst.position(&r.x_goal));
            let traj = (0..=t_len)
                .map(|k| {
                    if k == t_len {
                        return b.to_vec();
                    }
                    if k == mid {
                        return via.to_vec();
                    }
                    let (from, to, s) = if k < mid {
                        (a, via, k as f64 / mid.max(1) as f64)
                    } else {
                        (via, b, (k - mid) as f64 / (t_len - mid) as f64)
                    };
                    from.iter().zip(to).map(|(x, y)| x + s * (y - x)).collect()
                })
                .collect();
            (r.id, traj)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Parabolic,
    ParabolicFull,
    Sdp,
    Scp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Parabolic => "parabolic",
            Method::ParabolicFull => "parabolic-full",
            Method::Sdp => "sdp",
            Method::Scp => "scp",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "parabolic" | "parabolic_simplified" => Ok(Method::Parabolic),
            "parabolic-full" | "parabolic_full" => Ok(Method::ParabolicFull),
            "sdp" => Ok(Method::Sdp),
            "scp" => Ok(Method::Scp),
            other => Err(CoreError::Config(format!("unknown method {other:?}"))),
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Parabolic => Some(Variant::ParabolicSimplified),
            Method::ParabolicFull => Some(Variant::ParabolicFull),
            Method::Sdp => Some(Variant::Sdp),
            Method::Scp => None,
        }
    }
}

/// Settings common to every method run by a harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub eta: f64,
    pub rel_obj_tol: f64,
    pub max_iters: usize,
    pub tolerances: Tolerances,
}

impl Default for RunSettings {
    fn default() -> Self {
        let s = SequentialConfig::default();
        Self {
            eta: s.eta,
            rel_obj_tol: s.rel_obj_tol,
            max_iters: s.max_iters,
            tolerances: s.tolerances,
        }
    }
}

pub fn run_method(
    inst: &ProblemInstance,
    method: Method,
    seed: Option<&Positions>,
    settings: &RunSettings,
    backend: &dyn Backend,
) -> Result<SolveReport, CoreError> {
    match method.variant() {
        Some(variant) => {
            let cfg = SequentialConfig {
                eta: settings.eta,
                rel_obj_tol: settings.rel_obj_tol,
                max_iters: settings.max_iters,
                variant,
                tolerances: settings.tolerances,
                ..Default::default()
            };
            solve_sequential(inst, seed, &cfg, backend)
        }
        None => {
            let cfg = ScpConfig {
                rel_obj_tol: settings.rel_obj_tol,
                max_iters: settings.max_iters,
                tolerances: settings.tolerances,
                ..Default::default()
            };
            solve_scp(inst, seed, &cfg, backend)
        }
    }
}

/// Success according to the independent verifier only.
pub fn verified_success(inst: &ProblemInstance, report: &SolveReport, tol: &Tolerances) -> bool {
    report
        .final_solution
        .as_ref()
        .is_some_and(|s| verify(inst, s, tol).feasible)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Obstacle count for success-rate sweeps, robot count for scaling sweeps.
    pub sweep_value: usize,
    pub trial: usize,
    pub rng_seed: u64,
    pub method: Method,
    pub status: String,
    pub feasible: bool,
    pub objective: f64,
    pub iterations: usize,
    pub total_time: f64,
    pub mean_subproblem_time: f64,
    /// Relaxation gap of the last iterate; `None` for SCP and failed runs.
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRow {
    pub obstacles: usize,
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over trials where every method succeeded; NaN when there are none.
    pub mean_objective: f64,
    pub mean_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationFailure {
    pub sweep_value: usize,
    pub trial: usize,
    pub rng_seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRateResult {
    pub rows: Vec<SuccessRow>,
    pub records: Vec<TrialRecord>,
    pub generation_failures: Vec<GenerationFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRateSpec {
    pub methods: Vec<Method>,
    pub obstacle_counts: Vec<usize>,
    pub robots: usize,
    pub trials: usize,
    pub base_rng_seed: u64,
    pub params: HarnessParams,
    pub settings: RunSettings,
}

fn record(
    sweep_value: usize,
    trial: usize,
    rng_seed: u64,
    method: Method,
    inst: &ProblemInstance,
    out: Result<SolveReport, CoreError>,
    tol: &Tolerances,
) -> TrialRecord {
    match out {
        Ok(rep) => TrialRecord {
            sweep_value,
            trial,
            rng_seed,
            method,
            status: rep.termination.name().to_string(),
            feasible: verified_success(inst, &rep, tol),
            objective: rep.final_solution.as_ref().map_or(f64::NAN, |s| s.objective),
            iterations: rep.iterations.len(),
            total_time: rep.total_time,
            mean_subproblem_time: rep.mean_subproblem_time(),
            max_gap: method.variant().and(rep.final_max_gap()),
        },
        Err(e) => TrialRecord {
            sweep_value,
            trial,
            rng_seed,
            method,
            status: format!("error: {e}"),
            feasible: false,
            objective: f64::NAN,
            iterations: 0,
            total_time: 0.0,
            mean_subproblem_time: 0.0,
            max_gap: None,
        },
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

pub fn run_success_rate(spec: &SuccessRateSpec, backend: &(dyn Backend + Sync)) -> SuccessRateResult {
    let jobs: Vec<(usize, usize)> = spec
        .obstacle_counts
        .iter()
        .flat_map(|&o| (0..spec.trials).map(move |t| (o, t)))
        .collect();
    let outcomes: Vec<Result<Vec<TrialRecord>, GenerationFailure>> = jobs
        .par_iter()
        .map(|&(obstacles, trial)| {
            let rng_seed = spec.base_rng_seed.wrapping_add(trial as u64);
            let map = RandomMapSpec {
                num_robots: spec.robots,
                num_obstacles: obstacles,
                rng_seed,
                ..Default::default()
            };
            let inst = generate_random_instance(&map, &spec.params).map_err(|e| GenerationFailure {
                sweep_value: obstacles,
                trial,
                rng_seed,
                message: e.to_string(),
            })?;
            let seed = straight_line_seed(&inst);
            Ok(spec
                .methods
                .iter()
                .map(|&m| {
                    let out = run_method(&inst, m, Some(&seed), &spec.settings, backend);
                    record(obstacles, trial, rng_seed, m, &inst, out, &spec.settings.tolerances)
                })
                .collect())
        })
        .collect();
    let mut records = Vec::new();
    let mut generation_failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.extend(r),
            Err(g) => generation_failures.push(g),
        }
    }
    let mut rows = Vec::new();
    for &obstacles in &spec.obstacle_counts {
        let at: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_value == obstacles).collect();
        let mutual = |trial: usize| at.iter().filter(|r| r.trial == trial).all(|r| r.feasible);
        for &method in &spec.methods {
            let mine: Vec<&&TrialRecord> = at.iter().filter(|r| r.method == method).collect();
            let successes = mine.iter().filter(|r| r.feasible).count();
            let trials = mine.len();
            rows.push(SuccessRow {
                obstacles,
                method,
                trials,
                successes,
                success_rate: if trials == 0 {
                    f64::NAN
                } else {
                    successes as f64 / trials as f64
                },
                mean_objective: mean(mine.iter().filter(|r| mutual(r.trial)).map(|r| r.objective)),
                mean_time: mean(mine.iter().map(|r| r.total_time)),
            });
        }
    }
    SuccessRateResult {
        rows,
        records,
        generation_failures,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub robots: usize,
    pub dimension: usize,
    pub method: Method,
    pub mean_subproblem_time: f64,
    pub mean_total_time: f64,
    pub converged_fraction: f64,
    /// Cone memberships of the first subproblem.
    pub cones: usize,
    pub variables: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub methods: Vec<Method>,
    pub robot_counts: Vec<usize>,
    pub dimension: usize,
    pub trials: usize,
    pub base_rng_seed: u64,
    pub params: HarnessParams,
    pub settings: RunSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    pub records: Vec<TrialRecord>,
    pub generation_failures: Vec<GenerationFailure>,
}

/// Runs trials one after another so timings are not disturbed by each other.
pub fn run_scaling(spec: &ScalingSpec, backend: &dyn Backend) -> ScalingResult {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut generation_failures = Vec::new();
    for &count in &spec.robot_counts {
        let mut instances = Vec::new();
        for trial in 0..spec.trials {
            let rng_seed = spec.base_rng_seed.wrapping_add(trial as u64);
            let map = RandomMapSpec {
                num_robots: count,
                rng_seed,
                dimension: spec.dimension,
                ..Default::default()
            };
            match generate_random_instance(&map, &spec.params) {
                Ok(inst) => instances.push((trial, rng_seed, inst)),
                Err(e) => generation_failures.push(GenerationFailure {
                    sweep_value: count,
                    trial,
                    rng_seed,
                    message: e.to_string(),
                }),
            }
        }
        for &method in &spec.methods {
            let mut mine = Vec::new();
            for (trial, rng_seed, inst) in &instances {
                let out = run_method(inst, method, None, &spec.settings, backend);
                let converged = matches!(&out, Ok(r) if r.termination == Termination::Converged);
                mine.push((
                    record(count, *trial, *rng_seed, method, inst, out, &spec.settings.tolerances),
                    converged,
                ));
            }
            let (cones, variables) = match (method.variant(), instances.first()) {
                (Some(variant), Some((_, _, inst))) => {
                    let cfg = RelaxationConfig {
                        variant,
                        ..Default::default()
                    };
                    build_relaxation(inst, &straight_line_seed(inst), &cfg)
                        .map_or((0, 0), |rp| (rp.program.cones().len(), rp.program.num_vars()))
                }
                _ => (0, 0),
            };
            rows.push(ScalingRow {
                robots: count,
                dimension: spec.dimension,
                method,
                mean_subproblem_time: mean(mine.iter().map(|(r, _)| r.mean_subproblem_time)),
                mean_total_time: mean(mine.iter().map(|(r, _)| r.total_time)),
                converged_fraction: if mine.is_empty() {
                    f64::NAN
                } else {
                    mine.iter().filter(|(_, c)| *c).count() as f64 / mine.len() as f64
                },
                cones,
                variables,
            });
            records.extend(mine.into_iter().map(|(r, _)| r));
        }
    }
    ScalingResult {
        rows,
        records,
        generation_failures,
    }
}

pub fn run_bad_seed_recovery(
    inst: &ProblemInstance,
    adversarial_seed: &Positions,
    config: &SequentialConfig,
    backend: &dyn Backend,
) -> Result<SolveReport, CoreError> {
    solve_sequential(inst, Some(adversarial_seed), config, backend)
}

fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

pub fn write_success_csv<W: Write>(rows: &[SuccessRow], out: W) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "obstacles",
        "method",
        "trials",
        "successes",
        "success_rate",
        "mean_objective",
        "mean_time",
    ])?;
    for r in rows {
        w.write_record([
            r.obstacles.to_string(),
            r.method.name().to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            float(r.success_rate),
            float(r.mean_objective),
            float(r.mean_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], out: W) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "robots",
        "dimension",
        "variant",
        "mean_subproblem_time",
        "mean_total_time",
        "converged_fraction",
    ])?;
    for r in rows {
        w.write_record([
            r.robots.to_string(),
            r.dimension.to_string(),
            r.method.name().to_string(),
            float(r.mean_subproblem_time),
            float(r.mean_total_time),
            float(r.converged_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_value",
        "trial",
        "rng",
        "rng_seed",
        "method",
        "status",
        "feasible",
        "objective",
        "iterations",
        "total_time",
    ])?;
    for r in records {
        w.write_record([
            r.sweep_value.to_string(),
            r.trial.to_string(),
            RNG_NAME.to_string(),
            r.rng_seed.to_string(),
            r.method.name().to_string(),
            r.status.clone(),
            r.feasible.to_string(),
            float(r.objective),
            r.iterations.to_string(),
            float(r.total_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}
