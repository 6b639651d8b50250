#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

use common::*;
use mrmp_core::io::{scenario_to_json, solution_from_json, solution_to_json};

fn workdir(name: &str) -> PathBuf {
    static NEXT: AtomicUsize = AtomicUsize::new(0);
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!(
        "cli-{}-{name}-{}",
        std::process::id(),
        NEXT.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn mrmp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrmp"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_is_valid_and_repeatable() {
    let dir = workdir("generate");
    let args = [
        "generate",
        "--map",
        "random",
        "--robots",
        "5",
        "--obstacles",
        "10",
        "--seed",
        "7",
        "-o",
    ];
    let a = mrmp(&[&args[..], &["a.json"]].concat(), &dir);
    let b = mrmp(&[&args[..], &["b.json"]].concat(), &dir);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0);
    let text = fs::read_to_string(dir.join("a.json")).unwrap();
    assert_eq!(text, fs::read_to_string(dir.join("b.json")).unwrap());
    let inst = mrmp_core::io::scenario_from_json(&text).unwrap();
    assert_eq!((inst.robots.len(), inst.obstacles.len()), (5, 10));
    for map in ["bottleneck", "maze", "swap-circle"] {
        let out = mrmp(&["generate", "--map", map, "--robots", "3", "-o", "p.json"], &dir);
        assert_eq!(code(&out), 0, "{map}: {}", stderr(&out));
    }
}

#[test]
fn impossible_density_exits_two() {
    let dir = workdir("dense");
    let out = mrmp(
        &[
            "generate",
            "--robots",
            "100",
            "--obstacles",
            "100",
            "--max-attempts",
            "100",
            "-o",
            "s.json",
        ],
        &dir,
    );
    assert_eq!(code(&out), 2);
    let out = mrmp(&["generate", "--map", "maze", "--width", "0.05", "-o", "s.json"], &dir);
    assert_eq!(code(&out), 2);
}

#[test]
fn single_robot_solve_matches_the_oracle_and_verifies() {
    let dir = workdir("solve");
    let inst = instance(vec![robot(1, [0.1, 0.3], [0.9, 0.6])], vec![], 30);
    fs::write(dir.join("s.json"), scenario_to_json(&inst).unwrap()).unwrap();
    let out = mrmp(
        &[
            "solve", "s.json", "-o", "sol.json", "--report", "r.json", "--trace", "t.csv",
        ],
        &dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sol = solution_from_json(&fs::read_to_string(dir.join("sol.json")).unwrap()).unwrap();
    let oracle = direct_fuel_optimum(&inst);
    assert!(
        (sol.objective - oracle).abs() <= 1e-3 * oracle,
        "{} vs {oracle}",
        sol.objective
    );
    assert!(fs::read_to_string(dir.join("t.csv"))
        .unwrap()
        .starts_with("iter,true_objective"));
    let out = mrmp(&["verify", "s.json", "sol.json"], &dir);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"feasible\":true"));

    let mut bad = sol.clone();
    bad.controls.get_mut(&1).unwrap()[0]
        .iter_mut()
        .for_each(|u| *u = 10.0 * (*u + 1.0));
    fs::write(dir.join("loud.json"), solution_to_json(&bad, None).unwrap()).unwrap();
    let out = mrmp(&["verify", "s.json", "loud.json"], &dir);
    assert_eq!(code(&out), 3);
    let report: String = String::from_utf8_lossy(&out.stdout).into();
    assert!(
        !report.contains("\"control_violation\":0.0000000000000000e0"),
        "{report}"
    );

    let mut bent = sol;
    bent.states.get_mut(&1).unwrap()[10][0] += 0.01;
    fs::write(dir.join("bent.json"), solution_to_json(&bent, None).unwrap()).unwrap();
    let out = mrmp(&["verify", "s.json", "bent.json"], &dir);
    assert_eq!(code(&out), 3);
    assert!(!String::from_utf8_lossy(&out.stdout).contains("\"dynamics_residual\":0"));
}

#[test]
fn seed_file_is_accepted() {
    let dir = workdir("seedfile");
    let inst = instance(vec![robot(1, [0.1, 0.3], [0.9, 0.6])], vec![], 30);
    fs::write(dir.join("s.json"), scenario_to_json(&inst).unwrap()).unwrap();
    let seed = format!("{{\"1\": {:?}}}", line([0.1, 0.3], [0.9, 0.6], 30));
    fs::write(dir.join("seed.json"), seed).unwrap();
    let out = mrmp(&["solve", "s.json", "--seed-file", "seed.json"], &dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    fs::write(dir.join("short.json"), "{\"1\": [[0.1, 0.3]]}").unwrap();
    assert_eq!(code(&mrmp(&["solve", "s.json", "--seed-file", "short.json"], &dir)), 1);
}

#[test]
fn blocked_scp_run_reports_failure() {
    let dir = workdir("wall");
    let wall = (0..41)
        .map(|k| obstacle(10 + k, [0.5, -1.5 + 0.1001 * k as f64], 30))
        .collect();
    let inst = instance(vec![robot(1, [0.1, 0.5], [0.9, 0.5])], wall, 30);
    fs::write(dir.join("s.json"), scenario_to_json(&inst).unwrap()).unwrap();
    let out = mrmp(&["solve", "s.json", "--method", "scp"], &dir);
    assert!([3, 4].contains(&code(&out)), "{}", stderr(&out));
}

#[test]
fn sdp_needs_a_psd_capable_backend() {
    let dir = workdir("sdp");
    let inst = instance(vec![robot(1, [0.1, 0.3], [0.9, 0.6])], vec![], 10);
    fs::write(dir.join("s.json"), scenario_to_json(&inst).unwrap()).unwrap();
    let out = mrmp(
        &["solve", "s.json", "--method", "sdp", "--backend", "reference-soc"],
        &dir,
    );
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("psd"));
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = workdir("malformed");
    fs::write(dir.join("junk.json"), "{\"version\": 1, \"n\": 2}").unwrap();
    assert_eq!(code(&mrmp(&["solve", "junk.json"], &dir)), 1);
    assert_eq!(code(&mrmp(&["solve", "missing.json"], &dir)), 1);
    assert_eq!(code(&mrmp(&["solve", "junk.json", "--bogus"], &dir)), 1);
    assert_eq!(code(&mrmp(&["frobnicate"], &dir)), 1);

    let one = instance(vec![robot(1, [0.1, 0.3], [0.9, 0.6])], vec![], 30);
    let two = instance(vec![robot(1, [0.1, 0.3], [0.9, 0.6])], vec![], 32);
    fs::write(dir.join("one.json"), scenario_to_json(&one).unwrap()).unwrap();
    fs::write(dir.join("two.json"), scenario_to_json(&two).unwrap()).unwrap();
    assert_eq!(code(&mrmp(&["solve", "one.json", "-o", "sol.json"], &dir)), 0);
    assert_eq!(code(&mrmp(&["verify", "two.json", "sol.json"], &dir)), 1);
    assert_eq!(code(&mrmp(&["--help"], &dir)), 0);
}

fn mask_columns(csv: &str, masked: &[&str]) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<bool> = header.iter().map(|h| !masked.contains(h)).collect();
    std::iter::once(header.join(","))
        .chain(lines.map(|l| {
            l.split(',')
                .zip(&keep)
                .map(|(v, k)| if *k { v } else { "*" })
                .collect::<Vec<_>>()
                .join(",")
        }))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn success_rate_bench_is_repeatable() {
    let dir = workdir("bench");
    let args = [
        "bench",
        "success-rate",
        "--methods",
        "parabolic",
        "--obstacles",
        "0",
        "--robots",
        "1",
        "--trials",
        "1",
        "--seed",
        "5",
        "-o",
    ];
    assert_eq!(code(&mrmp(&[&args[..], &["a"]].concat(), &dir)), 0);
    assert_eq!(code(&mrmp(&[&args[..], &["b"]].concat(), &dir)), 0);
    let a = fs::read_to_string(dir.join("a/success_rate.csv")).unwrap();
    let b = fs::read_to_string(dir.join("b/success_rate.csv")).unwrap();
    let row: Vec<&str> = a.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..5], ["0", "parabolic", "1", "1", "1"]);
    assert_eq!(mask_columns(&a, &["mean_time"]), mask_columns(&b, &["mean_time"]));
    let ra = fs::read_to_string(dir.join("a/records.csv")).unwrap();
    let rb = fs::read_to_string(dir.join("b/records.csv")).unwrap();
    assert_eq!(mask_columns(&ra, &["total_time"]), mask_columns(&rb, &["total_time"]));
}

#[test]
fn scaling_bench_orders_sdp_above_parabolic() {
    let dir = workdir("scaling");
    let out = mrmp(
        &[
            "bench",
            "scaling",
            "--methods",
            "parabolic,sdp",
            "--robots",
            "2,4,8",
            "--trials",
            "1",
            "-o",
            ".",
        ],
        &dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("scaling.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    for count in ["2", "4", "8"] {
        let time = |m: &str| -> f64 {
            rows.iter().find(|r| r[0] == count && r[2] == m).unwrap()[3]
                .parse()
                .unwrap()
        };
        assert!(time("sdp") >= time("parabolic"), "{count}: {csv}");
    }
}

#[test]
fn bad_seed_bench_writes_a_trace() {
    let dir = workdir("badseed");
    let out = mrmp(
        &["bench", "bad-seed", "--robots", "2", "--max-iters", "3", "-o", "."],
        &dir,
    );
    assert!([0, 3].contains(&code(&out)), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.join("bad_seed_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn plot_writes_deterministic_svg() {
    let dir = workdir("plot");
    fs::write(
        dir.join("empty.json"),
        scenario_to_json(&instance(vec![], vec![], 3)).unwrap(),
    )
    .unwrap();
    assert_eq!(code(&mrmp(&["plot", "empty.json", "-o", "a.svg"], &dir)), 0);
    assert_eq!(code(&mrmp(&["plot", "empty.json", "-o", "b.svg"], &dir)), 0);
    let a = fs::read_to_string(dir.join("a.svg")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.join("b.svg")).unwrap());
    assert!(a.contains("class=\"arena\"") && !a.contains("<circle"));
    let mut four = instance(vec![], vec![], 3);
    four.n = 4;
    fs::write(dir.join("four.json"), scenario_to_json(&four).unwrap()).unwrap();
    assert_eq!(code(&mrmp(&["plot", "four.json"], &dir)), 1);
}
