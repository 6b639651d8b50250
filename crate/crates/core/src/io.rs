//! Scenario, solution and report files.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{
    build_double_integrator, DynamicsModel, FeasibilityReport, ObstacleSpec, Positions, ProblemInstance, RobotSpec,
    Solution, Trajectory,
};
use crate::sequential::{IterationRecord, SolveReport};
use crate::CoreError;

pub const SCENARIO_VERSION: u32 = 1;

/// Writes every float as `{:.16e}`, enough digits to round-trip exactly.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.9e}")
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CoreError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotFile {
    pub id: usize,
    pub radius: f64,
    pub u_max: f64,
    pub x_init: Vec<f64>,
    pub x_goal: Vec<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFile {
    pub id: usize,
    pub radius: f64,
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub p: u8,
    pub q: u8,
    pub dt: f64,
    pub robots: Vec<RobotFile>,
    pub obstacles: Vec<ObstacleFile>,
}

impl ScenarioFile {
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        let default = build_double_integrator(inst.n, inst.dt).ok();
        let robots = inst
            .robots
            .iter()
            .map(|r| {
                let builtin = default.as_ref() == Some(&r.dynamics);
                RobotFile {
                    id: r.id,
                    radius: r.radius,
                    u_max: r.u_max,
                    x_init: r.x_init.clone(),
                    x_goal: r.x_goal.clone(),
                    a: (!builtin).then(|| r.dynamics.a.clone()),
                    b: (!builtin).then(|| r.dynamics.b.clone()),
                }
            })
            .collect();
        ScenarioFile {
            version: SCENARIO_VERSION,
            n: inst.n,
            horizon: inst.horizon,
            p: inst.p,
            q: inst.q,
            dt: inst.dt,
            robots,
            obstacles: inst
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    id: o.id,
                    radius: o.radius,
                    states: o.states.clone(),
                })
                .collect(),
        }
    }

    /// Builds and validates the instance.
    pub fn into_instance(self) -> Result<ProblemInstance, CoreError> {
        if self.version != SCENARIO_VERSION {
            return Err(CoreError::InvalidInstance(format!(
                "unsupported scenario version {}",
                self.version
            )));
        }
        let mut robots = Vec::with_capacity(self.robots.len());
        for r in self.robots {
            let dynamics = match (r.a, r.b) {
                (None, None) => build_double_integrator(self.n, self.dt)?,
                (Some(a), Some(b)) => {
                    let m = b.first().map_or(0, |row| row.len());
                    let d = DynamicsModel {
                        a,
                        b,
                        n: self.n,
                        m,
                        dt: self.dt,
                    };
                    d.check_shape()?;
                    d
                }
                _ => {
                    return Err(CoreError::InvalidInstance(format!(
                        "robot {} must give both A and B or neither",
                        r.id
                    )))
                }
            };
            robots.push(RobotSpec {
                id: r.id,
                dynamics,
                radius: r.radius,
                u_max: r.u_max,
                x_init: r.x_init,
                x_goal: r.x_goal,
            });
        }
        let inst = ProblemInstance {
            robots,
            obstacles: self
                .obstacles
                .into_iter()
                .map(|o| ObstacleSpec {
                    id: o.id,
                    radius: o.radius,
                    states: o.states,
                })
                .collect(),
            horizon: self.horizon,
            n: self.n,
            p: self.p,
            q: self.q,
            dt: self.dt,
        };
        inst.validate()?;
        Ok(inst)
    }
}

pub fn scenario_to_json(inst: &ProblemInstance) -> Result<String, CoreError> {
    to_json_string(&ScenarioFile::from_instance(inst))
}

pub fn scenario_from_json(text: &str) -> Result<ProblemInstance, CoreError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    file.into_instance()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub dynamics_residual: f64,
    pub boundary_residual: f64,
    pub control_violation: f64,
    pub collision_violation: f64,
    pub feasible: bool,
}

impl From<&FeasibilityReport> for ReportFile {
    fn from(r: &FeasibilityReport) -> Self {
        ReportFile {
            dynamics_residual: r.dynamics_residual,
            boundary_residual: r.boundary_residual,
            control_violation: r.control_violation,
            collision_violation: r.collision_violation,
            feasible: r.feasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub objective: f64,
    pub states: BTreeMap<String, Trajectory>,
    pub controls: BTreeMap<String, Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportFile>,
}

fn keyed(map: &BTreeMap<usize, Trajectory>) -> BTreeMap<String, Trajectory> {
    map.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn unkeyed(map: BTreeMap<String, Trajectory>) -> Result<BTreeMap<usize, Trajectory>, CoreError> {
    map.into_iter()
        .map(|(k, v)| {
            k.parse::<usize>()
                .map(|id| (id, v))
                .map_err(|_| CoreError::InvalidInstance(format!("entity key {k:?} is not an id")))
        })
        .collect()
}

impl SolutionFile {
    pub fn new(sol: &Solution, report: Option<&FeasibilityReport>) -> Self {
        SolutionFile {
            objective: sol.objective,
            states: keyed(&sol.states),
            controls: keyed(&sol.controls),
            report: report.map(ReportFile::from),
        }
    }

    pub fn into_solution(self) -> Result<Solution, CoreError> {
        Ok(Solution {
            states: unkeyed(self.states)?,
            controls: unkeyed(self.controls)?,
            objective: self.objective,
        })
    }
}

pub fn solution_to_json(sol: &Solution, report: Option<&FeasibilityReport>) -> Result<String, CoreError> {
    to_json_string(&SolutionFile::new(sol, report))
}

pub fn solution_from_json(text: &str) -> Result<Solution, CoreError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    file.into_solution()
}

/// Seed positions for every robot: either a solution file or an object keyed by
/// robot id holding `T+1` rows. Rows longer than `n` are cut to their positions.
pub fn seed_from_json(text: &str, inst: &ProblemInstance) -> Result<Positions, CoreError> {
    let rows = match serde_json::from_str::<SolutionFile>(text) {
        Ok(file) => unkeyed(file.states)?,
        Err(_) => unkeyed(serde_json::from_str(text)?)?,
    };
    let mut seed = Positions::new();
    for r in &inst.robots {
        let traj = rows
            .get(&r.id)
            .ok_or_else(|| CoreError::Missing(format!("seed of robot {}", r.id)))?;
        if traj.len() != inst.horizon + 1 || traj.iter().any(|x| x.len() < inst.n) {
            return Err(CoreError::Dimension(format!(
                "seed of robot {} needs {} rows of at least {} values",
                r.id,
                inst.horizon + 1,
                inst.n
            )));
        }
        seed.insert(r.id, traj.iter().map(|x| x[..inst.n].to_vec()).collect());
    }
    Ok(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct IterationFile {
    iter: usize,
    true_objective: f64,
    penalized_objective: f64,
    max_gap: f64,
    collision_violation: f64,
    subproblem_time: f64,
    feasible: bool,
}

impl From<&IterationRecord> for IterationFile {
    fn from(r: &IterationRecord) -> Self {
        IterationFile {
            iter: r.iter,
            true_objective: r.true_objective,
            penalized_objective: r.penalized_objective,
            max_gap: r.max_gap,
            collision_violation: r.collision_violation,
            subproblem_time: r.subproblem_time,
            feasible: r.report.feasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SolveReportFile {
    method: String,
    termination: &'static str,
    feasible: bool,
    failure: Option<String>,
    total_time: f64,
    iterations: Vec<IterationFile>,
    #[serde(rename = "final")]
    final_solution: Option<SolutionFile>,
}

pub fn report_to_json(report: &SolveReport) -> Result<String, CoreError> {
    to_json_string(&SolveReportFile {
        method: report.method.clone(),
        termination: report.termination.name(),
        feasible: report.feasible,
        failure: report.failure.clone(),
        total_time: report.total_time,
        iterations: report.iterations.iter().map(IterationFile::from).collect(),
        final_solution: report
            .final_solution
            .as_ref()
            .map(|s| SolutionFile::new(s, report.final_report.as_ref())),
    })
}

/// `iter,true_objective,penalized_objective,max_gap,collision_violation,time`.
pub fn write_trace_csv<W: Write>(report: &SolveReport, out: W) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iter",
        "true_objective",
        "penalized_objective",
        "max_gap",
        "collision_violation",
        "time",
    ])?;
    for r in &report.iterations {
        w.write_record([
            r.iter.to_string(),
            r.true_objective.to_string(),
            r.penalized_objective.to_string(),
            r.max_gap.to_string(),
            r.collision_violation.to_string(),
            r.subproblem_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
