//! `mrmp` command-line front end.
//!
//! Exit codes: 0 success or feasible, 1 malformed input or usage, 2 generation
//! failure, 3 infeasible result, 4 solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrmp_conic::{ConicError, InteriorPoint};
use mrmp_core::bench::{
    corner_seed, generate_preset, generate_random_instance, run_bad_seed_recovery, run_method, run_scaling,
    run_success_rate, write_records_csv, write_scaling_csv, write_success_csv, HarnessParams, Method, Preset,
    RandomMapSpec, RunSettings, ScalingSpec, SuccessRateSpec,
};
use mrmp_core::io::{
    report_to_json, scenario_from_json, scenario_to_json, seed_from_json, solution_from_json, solution_to_json,
    to_json_string, write_trace_csv, ReportFile,
};
use mrmp_core::model::{verify, ProblemInstance, Tolerances};
use mrmp_core::plot::render_svg;
use mrmp_core::sequential::{SequentialConfig, SolveReport, Termination};
use mrmp_core::CoreError;

#[derive(Debug, Parser)]
#[command(
    name = "mrmp",
    version,
    about = "Multi-robot motion planning by sequential penalized relaxation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random or preset scenario file.
    Generate(GenerateArgs),
    /// Solve a scenario and write the solution and the run report.
    Solve(SolveArgs),
    /// Check a solution against a scenario.
    Verify(VerifyArgs),
    /// Run one of the experiment harnesses.
    Bench(BenchArgs),
    /// Render a scenario and optional solution as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapKind {
    Random,
    Bottleneck,
    Maze,
    SwapCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Interior point with second-order and semidefinite cones.
    Reference,
    /// Interior point without semidefinite cones.
    ReferenceSoc,
}

impl BackendKind {
    fn build(self) -> InteriorPoint {
        match self {
            BackendKind::Reference => InteriorPoint::new(),
            BackendKind::ReferenceSoc => InteriorPoint::without_psd(),
        }
    }
}

#[derive(Debug, Args)]
struct HarnessArgs {
    /// Number of control steps.
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    /// Time step in seconds.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Control bound.
    #[arg(long, default_value_t = 2.0)]
    u_max: f64,
}

impl HarnessArgs {
    fn params(&self) -> HarnessParams {
        HarnessParams {
            horizon: self.horizon,
            dt: self.dt,
            u_max: self.u_max,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Random)]
    map: MapKind,
    #[arg(long, default_value_t = 5)]
    robots: usize,
    /// Random maps only.
    #[arg(long, default_value_t = 0)]
    obstacles: usize,
    /// Random maps only.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random maps only: 2 or 3.
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    /// Random maps only.
    #[arg(long, default_value_t = 10_000)]
    max_attempts: usize,
    /// Bottleneck gap, maze clearance or swap-circle radius, in meters.
    #[arg(long, default_value_t = 0.25)]
    width: f64,
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "parabolic")]
    method: String,
    #[arg(long, default_value_t = 50.0)]
    eta: f64,
    /// Relative objective change that ends the iteration.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Initial positions: a solution file or an object keyed by robot id.
    #[arg(long)]
    seed_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendKind::Reference)]
    backend: BackendKind,
    /// Solution JSON.
    #[arg(short, long, default_value = "solution.json")]
    output: PathBuf,
    /// Run report JSON.
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    scenario: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    dynamics_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    control_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    collision_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    SuccessRate,
    Scaling,
    BadSeed,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(value_enum)]
    mode: BenchMode,
    /// Comma-separated: parabolic, parabolic-full, sdp, scp.
    #[arg(long, value_delimiter = ',', default_value = "parabolic,scp")]
    methods: Vec<String>,
    /// Success rate: obstacle counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    obstacles: Vec<usize>,
    /// Robots per map; scaling sweeps every listed count, the others use the first.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    robots: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Scaling only.
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    /// Base seed; trial `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50.0)]
    eta: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Bad seed: swap-circle radius.
    #[arg(long, default_value_t = 0.4)]
    radius: f64,
    /// Bad seed: shared point every seed passes through, as `x,y`.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.1")]
    via: Vec<f64>,
    #[arg(long, value_enum, default_value_t = BackendKind::Reference)]
    backend: BackendKind,
    #[command(flatten)]
    harness: HarnessArgs,
    /// Directory receiving the CSV files.
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    scenario: PathBuf,
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(short, long, default_value = "plot.svg")]
    output: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Generation(_) => 2,
            CoreError::Subproblem(_) | CoreError::Conic(ConicError::Unsupported { .. }) => 4,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ProblemInstance, Failure> {
    scenario_from_json(&read(path)?).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn generate(args: &GenerateArgs) -> Outcome {
    let params = args.harness.params();
    let inst = match args.map {
        MapKind::Random => {
            let spec = RandomMapSpec {
                num_robots: args.robots,
                num_obstacles: args.obstacles,
                rng_seed: args.seed,
                dimension: args.dimension,
                max_placement_attempts: args.max_attempts,
                ..Default::default()
            };
            generate_random_instance(&spec, &params)
        }
        MapKind::Bottleneck => generate_preset(
            Preset::Bottleneck {
                robots: args.robots,
                gap: args.width,
            },
            &params,
        ),
        MapKind::Maze => generate_preset(Preset::Maze { clearance: args.width }, &params),
        MapKind::SwapCircle => generate_preset(
            Preset::SwapCircle {
                robots: args.robots,
                radius: args.width,
            },
            &params,
        ),
    }
    .map_err(|e| Failure::new(2, e.to_string()))?;
    write(&args.output, scenario_to_json(&inst)?.as_bytes())?;
    println!(
        "wrote {}: {} robots, {} obstacles, n = {}, T = {}",
        args.output.display(),
        inst.robots.len(),
        inst.obstacles.len(),
        inst.n,
        inst.horizon
    );
    Ok(0)
}

fn solve_exit(report: &SolveReport) -> u8 {
    if report.feasible {
        0
    } else if report.termination == Termination::SubproblemFailure {
        4
    } else {
        3
    }
}

fn solve(args: &SolveArgs) -> Outcome {
    let inst = load_scenario(&args.scenario)?;
    let method = Method::parse(&args.method).map_err(|e| Failure::new(1, e.to_string()))?;
    let seed = match &args.seed_file {
        Some(p) => Some(seed_from_json(&read(p)?, &inst).map_err(|e| Failure::new(1, e.to_string()))?),
        None => None,
    };
    let backend = args.backend.build();
    let settings = RunSettings {
        eta: args.eta,
        rel_obj_tol: args.tol,
        max_iters: args.max_iters,
        ..Default::default()
    };
    let report = run_method(&inst, method, seed.as_ref(), &settings, &backend)?;
    if let Some(sol) = &report.final_solution {
        write(
            &args.output,
            solution_to_json(sol, report.final_report.as_ref())?.as_bytes(),
        )?;
    }
    write(&args.report, report_to_json(&report)?.as_bytes())?;
    if let Some(path) = &args.trace {
        let mut buf = Vec::new();
        write_trace_csv(&report, &mut buf)?;
        write(path, &buf)?;
    }
    let objective = report.final_solution.as_ref().map_or(f64::NAN, |s| s.objective);
    println!(
        "{}: {} after {} iterations, objective {objective}, feasible {}",
        method.name(),
        report.termination.name(),
        report.iterations.len(),
        report.feasible
    );
    if let Some(f) = &report.failure {
        eprintln!("subproblem failure: {f}");
    }
    Ok(solve_exit(&report))
}

fn verify_cmd(args: &VerifyArgs) -> Outcome {
    let inst = load_scenario(&args.scenario)?;
    let sol = solution_from_json(&read(&args.solution)?)
        .map_err(|e| Failure::new(1, format!("{}: {e}", args.solution.display())))?;
    let ids_match = inst.robots.iter().all(|r| {
        sol.controls.get(&r.id).is_some_and(|u| u.len() == inst.horizon)
            && sol.states.get(&r.id).is_some_and(|x| x.len() == inst.horizon + 1)
    });
    if !ids_match {
        return Err(Failure::new(
            1,
            "solution does not match the scenario's robots or horizon",
        ));
    }
    let tol = Tolerances {
        dynamics: args.dynamics_tol,
        control: args.control_tol,
        collision: args.collision_tol,
    };
    let report = verify(&inst, &sol, &tol);
    print!("{}", to_json_string(&ReportFile::from(&report))?);
    Ok(if report.feasible { 0 } else { 3 })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CoreError>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn bench(args: &BenchArgs) -> Outcome {
    let methods = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(1, e.to_string()))?;
    let robots = *args
        .robots
        .first()
        .ok_or_else(|| Failure::new(1, "--robots is empty"))?;
    let settings = RunSettings {
        eta: args.eta,
        rel_obj_tol: args.tol,
        max_iters: args.max_iters,
        ..Default::default()
    };
    let backend = args.backend.build();
    fs::create_dir_all(&args.out_dir).map_err(|e| Failure::new(1, format!("{}: {e}", args.out_dir.display())))?;
    let out = |name: &str| args.out_dir.join(name);
    match args.mode {
        BenchMode::SuccessRate => {
            let spec = SuccessRateSpec {
                methods,
                obstacle_counts: args.obstacles.clone(),
                robots,
                trials: args.trials,
                base_rng_seed: args.seed,
                params: args.harness.params(),
                settings,
            };
            let res = run_success_rate(&spec, &backend);
            let table = csv_bytes(|b| write_success_csv(&res.rows, b))?;
            write(&out("success_rate.csv"), &table)?;
            write(&out("records.csv"), &csv_bytes(|b| write_records_csv(&res.records, b))?)?;
            print!("{}", String::from_utf8_lossy(&table));
            for g in &res.generation_failures {
                eprintln!("generation failed for seed {}: {}", g.rng_seed, g.message);
            }
            if res.rows.iter().all(|r| r.trials == 0) && !res.generation_failures.is_empty() {
                return Err(Failure::new(2, "no instance could be generated"));
            }
            Ok(0)
        }
        BenchMode::Scaling => {
            let spec = ScalingSpec {
                methods,
                robot_counts: args.robots.clone(),
                dimension: args.dimension,
                trials: args.trials,
                base_rng_seed: args.seed,
                params: args.harness.params(),
                settings,
            };
            let res = run_scaling(&spec, &backend);
            let table = csv_bytes(|b| write_scaling_csv(&res.rows, b))?;
            write(&out("scaling.csv"), &table)?;
            write(&out("records.csv"), &csv_bytes(|b| write_records_csv(&res.records, b))?)?;
            print!("{}", String::from_utf8_lossy(&table));
            for g in &res.generation_failures {
                eprintln!("generation failed for seed {}: {}", g.rng_seed, g.message);
            }
            if res.records.is_empty() && !res.generation_failures.is_empty() {
                return Err(Failure::new(2, "no instance could be generated"));
            }
            Ok(0)
        }
        BenchMode::BadSeed => {
            let inst = generate_preset(
                Preset::SwapCircle {
                    robots,
                    radius: args.radius,
                },
                &args.harness.params(),
            )
            .map_err(|e| Failure::new(2, e.to_string()))?;
            let method = methods.first().copied().unwrap_or(Method::Parabolic);
            let variant = method
                .variant()
                .ok_or_else(|| Failure::new(1, "bad-seed recovery runs a relaxation method"))?;
            let cfg = SequentialConfig {
                eta: args.eta,
                rel_obj_tol: args.tol,
                max_iters: args.max_iters,
                variant,
                ..Default::default()
            };
            let report = run_bad_seed_recovery(&inst, &corner_seed(&inst, &args.via), &cfg, &backend)?;
            write(&out("bad_seed_trace.csv"), &csv_bytes(|b| write_trace_csv(&report, b))?)?;
            write(&out("bad_seed_report.json"), report_to_json(&report)?.as_bytes())?;
            println!(
                "{} after {} iterations, feasible {}",
                report.termination.name(),
                report.iterations.len(),
                report.feasible
            );
            Ok(solve_exit(&report))
        }
    }
}

fn plot(args: &PlotArgs) -> Outcome {
    let inst = load_scenario(&args.scenario)?;
    let sol = match &args.solution {
        Some(p) => Some(solution_from_json(&read(p)?).map_err(|e| Failure::new(1, format!("{}: {e}", p.display())))?),
        None => None,
    };
    let svg = render_svg(&inst, sol.as_ref()).map_err(|e| Failure::new(1, e.to_string()))?;
    write(&args.output, svg.as_bytes())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
