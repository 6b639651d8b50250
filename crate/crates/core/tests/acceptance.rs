//! Acceptance suite. Run with `cargo test -p mrmp-core --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion as it finishes.

mod common;

use std::cell::Cell;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use common::*;
use mrmp_conic::{Backend, BackendResult, ConeKind, ConicProgram, InteriorPoint, SolveStatus};
use mrmp_core::bench::*;
use mrmp_core::model::{rollout, straight_line_seed, verify, ProblemInstance, Solution, Tolerances};
use mrmp_core::relax::{build_relaxation, lift_solution, RelaxationConfig};
use mrmp_core::sequential::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// every tolerance and size the criteria pin
const C1_CONFIGS: usize = 200;
const C1_RESIDUAL_TOL: f64 = 1e-12;
const C1_BUDGET_S: f64 = 10.0;
const C2_TUPLES: usize = 1000;
const C2_TIE_MARGIN: f64 = 1e-6;
const C2_CONE_TOL: f64 = 1e-12;
const C2_BUDGET_S: f64 = 5.0;
const C3_REL_TOL: f64 = 1e-3;
const C3_BUDGET_S: f64 = 30.0;
const C4_INSTANCES: usize = 10;
const C4_ETA_START: f64 = 50.0;
const C4_ETA_MAX: f64 = 800.0;
const C5_REL_TOL: f64 = 1e-4;
const C6_OBSTACLES: [usize; 3] = [10, 20, 30];
const C6_TRIALS: usize = 20;
const C6_ROBOTS: usize = 5;
const C6_MIN_RATE_AT_30: f64 = 0.75;
const C6_BUDGET_S: f64 = 1800.0;
const C7_COUNTS: [usize; 4] = [2, 4, 8, 16];
const C7_TRIALS: usize = 3;
const C8_ROBOTS: usize = 4;
const C8_RADIUS: f64 = 0.4;
const C8_CORNER: [f64; 2] = [0.1, 0.1];
const C8_MAX_ITERS: usize = 200;
const C8_COLLISION_TOL: f64 = 1e-4;
const C9_GAP_TOL: f64 = 1e-4;
const BASE_SEED: u64 = 2024;

struct Verdict {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

impl Verdict {
    fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail
        )
    }
}

/// (max_gap, verify passes) of a converged relaxation run.
type GapSample = (f64, bool);

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn converged_sample(inst: &ProblemInstance, rep: &SolveReport) -> Option<GapSample> {
    if rep.termination != Termination::Converged {
        return None;
    }
    let sol = rep.final_solution.as_ref()?;
    Some((rep.final_max_gap()?, verify(inst, sol, &Tolerances::default()).feasible))
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn random_point(rng: &mut ChaCha8Rng, taken: &[[f64; 2]], spacing: f64) -> [f64; 2] {
    loop {
        let p = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
        if taken.iter().all(|q| dist(&p, q) >= spacing) {
            return p;
        }
    }
}

/// Random feasible joint configurations lifted into the simplified program.
fn criterion_1() -> (Verdict, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    let mut csv = String::from("config,equality_residual,cone_residual\n");
    let (mut accepted, mut failures, mut drawn) = (0, 0, 0);
    let horizon = 5;
    while accepted < C1_CONFIGS {
        drawn += 1;
        let mut taken = Vec::new();
        for _ in 0..5 {
            let p = random_point(&mut rng, &taken, 0.15);
            taken.push(p);
        }
        let mut robots = Vec::new();
        let mut controls = std::collections::BTreeMap::new();
        for (i, p) in taken[..3].iter().enumerate() {
            let mut r = robot(i + 1, *p, *p);
            let u: Vec<Vec<f64>> = (0..horizon)
                .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            r.x_goal = rollout(&r, &u).unwrap().pop().unwrap();
            controls.insert(r.id, u);
            robots.push(r);
        }
        let obstacles = taken[3..]
            .iter()
            .enumerate()
            .map(|(j, p)| obstacle(10 + j, *p, horizon))
            .collect();
        let inst = instance(robots, obstacles, horizon);
        let sol = Solution::from_controls(&inst, controls).unwrap();
        if !verify(&inst, &sol, &Tolerances::default()).feasible {
            continue;
        }
        let rp = build_relaxation(&inst, &straight_line_seed(&inst), &RelaxationConfig::default()).unwrap();
        let z = lift_solution(&rp.layout, &inst, &sol.states, &sol.controls).unwrap();
        let res = rp.program.residuals(&z);
        if res.equality > C1_RESIDUAL_TOL || res.cone > C1_RESIDUAL_TOL {
            failures += 1;
        }
        let _ = writeln!(csv, "{accepted},{:e},{:e}", res.equality, res.cone);
        accepted += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && secs < C1_BUDGET_S;
    let detail = format!(
        "{failures} of {accepted} lifted configurations violate a constraint by > {C1_RESIDUAL_TOL:e} \
         ({drawn} drawn, {secs:.2} s, budget {C1_BUDGET_S} s)"
    );
    (
        Verdict {
            id: 1,
            title: "relaxation soundness",
            pass,
            detail,
        },
        csv,
    )
}

/// Interval oracle for the off-diagonal entry against the simplified builder's cones.
fn criterion_2() -> (Verdict, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED + 1);
    let mut csv = String::from("tuple,interval_nonempty,builder_feasible\n");
    let (mut done, mut disagreements, mut feasible_count) = (0, 0, 0);
    while done < C2_TUPLES {
        let xi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let xj = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let yi = sq(&xi) + rng.random_range(-0.05..0.3);
        let yj = sq(&xj) + rng.random_range(-0.05..0.3);
        let (ri, rj): (f64, f64) = (rng.random_range(0.01..0.3), rng.random_range(0.01..0.3));
        let r2 = (ri + rj) * (ri + rj);
        let plus = [xi[0] + xj[0], xi[1] + xj[1]];
        let minus = [xi[0] - xj[0], xi[1] - xj[1]];
        let lo = (sq(&plus) - yi - yj) / 2.0;
        let hi = (yi + yj - r2.max(sq(&minus))) / 2.0;
        let margins = [yi - sq(&xi), yj - sq(&xj), hi - lo];
        if margins.iter().any(|m| m.abs() < C2_TIE_MARGIN) {
            continue;
        }
        let oracle = margins.iter().all(|&m| m > 0.0);

        let mut a = robot(1, [3.0, 3.0], [3.0, 3.0]);
        let mut b = robot(2, [-3.0, -3.0], [-3.0, -3.0]);
        a.radius = ri;
        b.radius = rj;
        let inst = instance(vec![a, b], vec![], 2);
        let rp = build_relaxation(&inst, &straight_line_seed(&inst), &RelaxationConfig::default()).unwrap();
        let rest =
            Solution::from_controls(&inst, [(1, vec![vec![0.0; 2]; 2]), (2, vec![vec![0.0; 2]; 2])].into()).unwrap();
        let mut z = lift_solution(&rp.layout, &inst, &rest.states, &rest.controls).unwrap();
        for (e, (x, y)) in [(xi, yi), (xj, yj)].into_iter().enumerate() {
            for (c, v) in rp.layout.traj.position(e, 1, 2).iter().enumerate() {
                z[v.0] = x[c];
            }
            z[rp.layout.y_diag[e][1].expect("lifted step").0] = y;
        }
        let direct = rp.program.residuals(&z).cone <= C2_CONE_TOL;
        if direct != oracle {
            disagreements += 1;
        }
        feasible_count += oracle as usize;
        let _ = writeln!(csv, "{done},{oracle},{direct}");
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = disagreements == 0 && secs < C2_BUDGET_S;
    let detail = format!(
        "{disagreements} disagreements in {done} tuples ({feasible_count} feasible, {secs:.2} s, budget {C2_BUDGET_S} s)"
    );
    (
        Verdict {
            id: 2,
            title: "elimination equivalence",
            pass,
            detail,
        },
        csv,
    )
}

fn criterion_3(samples: &mut Vec<GapSample>) -> Verdict {
    let start = Instant::now();
    let inst = instance(vec![robot(1, [0.0, 0.0], [1.0, 1.0])], vec![], 30);
    let oracle = direct_fuel_optimum(&inst);
    let rep = solve_sequential(&inst, None, &SequentialConfig::default(), &InteriorPoint::new()).unwrap();
    samples.extend(converged_sample(&inst, &rep));
    let obj = rep.final_solution.as_ref().map_or(f64::NAN, |s| s.objective);
    let rel = (obj - oracle).abs() / oracle;
    let secs = start.elapsed().as_secs_f64();
    let pass = rep.termination == Termination::Converged && rel <= C3_REL_TOL && secs < C3_BUDGET_S;
    Verdict {
        id: 3,
        title: "unconstrained optimum recovery",
        pass,
        detail: format!(
            "{} after {} iterations, objective {obj:.6} vs oracle {oracle:.6} (relative {rel:.2e}, tol {C3_REL_TOL:e}), {secs:.2} s",
            rep.termination.name(),
            rep.iterations.len()
        ),
    }
}

/// Two-robot swap rotated about the arena center, detouring on opposite sides.
fn detour_case(i: usize) -> (ProblemInstance, Solution) {
    let th = std::f64::consts::PI * i as f64 / C4_INSTANCES as f64;
    let h = 0.15 + 0.01 * i as f64;
    let rot = |x: f64, y: f64| [0.5 + x * th.cos() - y * th.sin(), 0.5 + x * th.sin() + y * th.cos()];
    let inst = instance(
        vec![
            robot(1, rot(-0.4, 0.0), rot(0.4, 0.0)),
            robot(2, rot(0.4, 0.0), rot(-0.4, 0.0)),
        ],
        vec![],
        30,
    );
    let seed = detour_solution(&inst, &[vec![(15, rot(0.0, h))], vec![(15, rot(0.0, -h))]]);
    (inst, seed)
}

fn criterion_4(samples: &mut Vec<GapSample>) -> Verdict {
    let mut held = 0;
    let mut notes = Vec::new();
    for i in 0..C4_INSTANCES {
        let (inst, seed) = detour_case(i);
        let mut eta = C4_ETA_START;
        let outcome = loop {
            let cfg = SequentialConfig {
                eta,
                ..Default::default()
            };
            match feasibility_preservation_check(&inst, &seed, &cfg, &InteriorPoint::new()) {
                Ok(tr) if tr.holds() => {
                    samples.extend(converged_sample(&inst, &tr.report));
                    break Ok(eta);
                }
                Ok(tr) if eta >= C4_ETA_MAX => {
                    samples.extend(converged_sample(&inst, &tr.report));
                    break Err(format!("feasible {} monotone {}", tr.all_feasible, tr.monotone));
                }
                Ok(_) => eta *= 2.0,
                Err(e) => break Err(e.to_string()),
            }
        };
        match outcome {
            Ok(eta) => {
                held += 1;
                notes.push(format!("#{i}:eta={eta}"));
            }
            Err(why) => notes.push(format!("#{i}:failed({why})")),
        }
    }
    Verdict {
        id: 4,
        title: "feasibility preservation",
        pass: held == C4_INSTANCES,
        detail: format!("{held}/{C4_INSTANCES} instances hold [{}]", notes.join(" ")),
    }
}

/// Replays a fixed objective sequence; every primal is the all-zero point.
struct Scripted {
    trace: Vec<f64>,
    next: Cell<usize>,
}

impl Backend for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn supports(&self, _: ConeKind) -> bool {
        true
    }

    fn solve_unchecked(&self, prog: &ConicProgram) -> BackendResult {
        let k = self.next.get();
        self.next.set(k + 1);
        BackendResult {
            status: SolveStatus::Optimal,
            primal: Some(vec![0.0; prog.num_vars()]),
            objective_value: self.trace[k.min(self.trace.len() - 1)],
            solve_time: 0.0,
            iterations: 0,
        }
    }
}

fn criterion_5() -> Verdict {
    let just_above = f64::from_bits(10001.0f64.to_bits() + 1);
    // (trace, max_iters, expected iteration count, expected to converge)
    let cases: Vec<(Vec<f64>, usize, usize, bool)> = vec![
        (vec![10000.0, 10001.0], 200, 2, true),
        (vec![10000.0, 9999.0], 200, 2, true),
        (vec![-10000.0, -10001.0], 200, 2, true),
        (vec![10000.0, just_above, just_above], 200, 3, true),
        (vec![10000.0, 10002.0, 10003.0], 200, 3, true),
        (vec![0.0, 1e-15, 1e-15], 200, 3, true),
        (vec![0.0, 1e-17], 200, 2, true),
        (vec![5.0, 5.0], 200, 2, true),
        (vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 7, 7, false),
        (vec![3.0], 1, 1, false),
    ];
    let inst = instance(vec![robot(1, [0.0, 0.0], [0.0, 0.0])], vec![], 4);
    let mut wrong = Vec::new();
    for (n, (trace, max_iters, want_len, want_conv)) in cases.iter().enumerate() {
        let backend = Scripted {
            trace: trace.clone(),
            next: Cell::new(0),
        };
        let cfg = SequentialConfig {
            max_iters: *max_iters,
            rel_obj_tol: C5_REL_TOL,
            ..Default::default()
        };
        let rep = solve_sequential(&inst, None, &cfg, &backend).unwrap();
        let seen: Vec<f64> = rep.iterations.iter().map(|r| r.penalized_objective).collect();
        let conv = rep.termination == Termination::Converged;
        let replayed = seen.iter().zip(trace).all(|(a, b)| a == b);
        // the rule itself against the formula on every consecutive pair
        let formula = seen.windows(2).all(|w| {
            stopping_criterion(w[0], w[1], C5_REL_TOL) == ((w[1] - w[0]).abs() / w[0].abs().max(1e-12) <= C5_REL_TOL)
        });
        if rep.iterations.len() != *want_len || conv != *want_conv || !replayed || !formula {
            wrong.push(format!(
                "case {n}: {} iterations, {}",
                rep.iterations.len(),
                rep.termination.name()
            ));
        }
    }
    Verdict {
        id: 5,
        title: "stopping rule fidelity",
        pass: wrong.is_empty(),
        detail: if wrong.is_empty() {
            format!("{} synthetic traces stop exactly where expected", cases.len())
        } else {
            wrong.join("; ")
        },
    }
}

fn criterion_6(samples: &mut Vec<GapSample>) -> (Verdict, String) {
    let start = Instant::now();
    let spec = SuccessRateSpec {
        methods: vec![Method::Parabolic, Method::Scp],
        obstacle_counts: C6_OBSTACLES.to_vec(),
        robots: C6_ROBOTS,
        trials: C6_TRIALS,
        base_rng_seed: BASE_SEED,
        params: HarnessParams::default(),
        settings: RunSettings::default(),
    };
    let res = run_success_rate(&spec, &InteriorPoint::new());
    let secs = start.elapsed().as_secs_f64();
    for r in &res.records {
        if let (Some(gap), true) = (r.max_gap, r.status == "converged") {
            samples.push((gap, r.feasible));
        }
    }
    let rate = |obs: usize, m: Method| {
        res.rows
            .iter()
            .find(|r| r.obstacles == obs && r.method == m)
            .map_or(f64::NAN, |r| r.success_rate)
    };
    let mut pass = secs < C6_BUDGET_S;
    let mut parts = Vec::new();
    for obs in C6_OBSTACLES {
        let (p, s) = (rate(obs, Method::Parabolic), rate(obs, Method::Scp));
        pass &= p >= s;
        parts.push(format!("{obs} obstacles: parabolic {p:.2} scp {s:.2}"));
    }
    pass &= rate(30, Method::Parabolic) >= C6_MIN_RATE_AT_30;
    let mut csv = Vec::new();
    write_success_csv(&res.rows, &mut csv).unwrap();
    (
        Verdict {
            id: 6,
            title: "success-rate shape",
            pass,
            detail: format!(
                "{}; need parabolic >= scp everywhere and >= {C6_MIN_RATE_AT_30} at 30; {} generation failures; {secs:.0} s",
                parts.join(", "),
                res.generation_failures.len()
            ),
        },
        String::from_utf8(csv).unwrap(),
    )
}

fn criterion_7(samples: &mut Vec<GapSample>) -> (Verdict, String) {
    let spec = ScalingSpec {
        methods: vec![Method::Parabolic, Method::ParabolicFull, Method::Sdp],
        robot_counts: C7_COUNTS.to_vec(),
        dimension: 2,
        trials: C7_TRIALS,
        base_rng_seed: BASE_SEED,
        params: HarnessParams::default(),
        settings: RunSettings::default(),
    };
    let res = run_scaling(&spec, &InteriorPoint::new());
    for r in &res.records {
        if let (Some(gap), true) = (r.max_gap, r.status == "converged") {
            samples.push((gap, r.feasible));
        }
    }
    let time = |count: usize, m: Method| {
        res.rows
            .iter()
            .find(|r| r.robots == count && r.method == m)
            .map_or(f64::NAN, |r| r.mean_subproblem_time)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for count in C7_COUNTS {
        let (s, p, f) = (
            time(count, Method::Sdp),
            time(count, Method::Parabolic),
            time(count, Method::ParabolicFull),
        );
        pass &= s >= p;
        if count >= 8 {
            pass &= p <= f;
        }
        parts.push(format!("{count}: sdp {s:.4} parabolic {p:.4} full {f:.4}"));
    }
    let mut csv = Vec::new();
    write_scaling_csv(&res.rows, &mut csv).unwrap();
    (
        Verdict {
            id: 7,
            title: "scaling ordering",
            pass,
            detail: format!("mean subproblem seconds per robot count [{}]", parts.join("; ")),
        },
        String::from_utf8(csv).unwrap(),
    )
}

fn criterion_8(samples: &mut Vec<GapSample>) -> Verdict {
    let inst = generate_preset(
        Preset::SwapCircle {
            robots: C8_ROBOTS,
            radius: C8_RADIUS,
        },
        &HarnessParams::default(),
    )
    .unwrap();
    let seed = corner_seed(&inst, &C8_CORNER);
    let cfg = SequentialConfig {
        max_iters: C8_MAX_ITERS,
        ..Default::default()
    };
    let rep = run_bad_seed_recovery(&inst, &seed, &cfg, &InteriorPoint::new()).unwrap();
    samples.extend(converged_sample(&inst, &rep));
    let first = rep.iterations.first().map_or(f64::NAN, |r| r.collision_violation);
    let last = rep.iterations.last().map_or(f64::NAN, |r| r.collision_violation);
    let reached = rep
        .iterations
        .iter()
        .position(|r| r.collision_violation <= C8_COLLISION_TOL);
    let verified = verified_success(&inst, &rep, &Tolerances::default());
    let pass = rep.termination == Termination::Converged && verified && last <= C8_COLLISION_TOL;
    Verdict {
        id: 8,
        title: "bad-seed recovery",
        pass,
        detail: format!(
            "{} after {} iterations, verified feasible {verified}, collision violation {first:.3e} -> {last:.3e} \
             (first <= {C8_COLLISION_TOL:e} at iteration {})",
            rep.termination.name(),
            rep.iterations.len(),
            reached.map_or("never".to_string(), |k| (k + 1).to_string())
        ),
    }
}

fn criterion_9(samples: &[GapSample]) -> Verdict {
    let exact: Vec<&GapSample> = samples.iter().filter(|(g, _)| *g <= C9_GAP_TOL).collect();
    let counter = exact.iter().filter(|(_, ok)| !ok).count();
    Verdict {
        id: 9,
        title: "exactness implies feasibility",
        pass: counter == 0,
        detail: format!(
            "{counter} counterexamples among {} converged runs with max_gap <= {C9_GAP_TOL:e} ({} converged runs in total)",
            exact.len(),
            samples.len()
        ),
    }
}

/// Diagnostic only: the CSV with every column whose header mentions "time" dropped.
fn without_timing(csv: &str) -> Vec<Vec<&str>> {
    let mut lines = csv.lines().map(|l| l.split(',').collect::<Vec<_>>());
    let Some(header) = lines.next() else {
        return Vec::new();
    };
    let keep: Vec<usize> = (0..header.len()).filter(|&c| !header[c].contains("time")).collect();
    std::iter::once(header)
        .chain(lines)
        .map(|row| keep.iter().filter_map(|&c| row.get(c).copied()).collect())
        .collect()
}

fn criterion_10(first: &[(&str, String)], second: &[(&str, String)]) -> Verdict {
    let dir = out_dir();
    let mut differing = Vec::new();
    for ((name, a), (_, b)) in first.iter().zip(second) {
        fs::write(dir.join(format!("{name}_run1.csv")), a).unwrap();
        fs::write(dir.join(format!("{name}_run2.csv")), b).unwrap();
        if a.as_bytes() != b.as_bytes() {
            let lines = a.lines().zip(b.lines()).filter(|(x, y)| x != y).count();
            let same_untimed = without_timing(a) == without_timing(b);
            differing.push(format!(
                "{name} ({lines} lines differ, identical without timing columns: {same_untimed})"
            ));
        }
    }
    Verdict {
        id: 10,
        title: "determinism",
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} CSV files byte-identical across runs", first.len())
        } else {
            format!(
                "not byte-identical: {}; files in {}",
                differing.join(", "),
                dir.display()
            )
        },
    }
}

#[test]
fn acceptance_criteria() {
    let mut verdicts: Vec<Verdict> = Vec::new();
    let mut samples: Vec<GapSample> = Vec::new();
    let report = |v: Verdict, all: &mut Vec<Verdict>| {
        println!("{}", v.line());
        all.push(v);
    };

    let (v1, csv1) = criterion_1();
    report(v1, &mut verdicts);
    let (v2, csv2) = criterion_2();
    report(v2, &mut verdicts);
    report(criterion_3(&mut samples), &mut verdicts);
    report(criterion_4(&mut samples), &mut verdicts);
    report(criterion_5(), &mut verdicts);
    let (v6, csv6) = criterion_6(&mut samples);
    report(v6, &mut verdicts);
    let (v7, csv7) = criterion_7(&mut samples);
    report(v7, &mut verdicts);
    report(criterion_8(&mut samples), &mut verdicts);
    report(criterion_9(&samples), &mut verdicts);

    let mut discard = Vec::new();
    let rerun = vec![
        ("criterion1", criterion_1().1),
        ("criterion2", criterion_2().1),
        ("criterion6", criterion_6(&mut discard).1),
        ("criterion7", criterion_7(&mut discard).1),
    ];
    let first = vec![
        ("criterion1", csv1),
        ("criterion2", csv2),
        ("criterion6", csv6),
        ("criterion7", csv7),
    ];
    report(criterion_10(&first, &rerun), &mut verdicts);

    println!("---- acceptance summary ----");
    let mut summary = String::new();
    for v in &verdicts {
        println!("{}", v.line());
        let _ = writeln!(summary, "{}", v.line());
    }
    fs::write(out_dir().join("summary.txt"), &summary).unwrap();
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
