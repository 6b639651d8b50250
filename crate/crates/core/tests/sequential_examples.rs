mod common;

use common::*;
use mrmp_conic::InteriorPoint;
use mrmp_core::model::{verify, Tolerances};
use mrmp_core::scp::solve_without_collisions;
use mrmp_core::sequential::*;

#[test]
fn single_robot_converges_to_the_unconstrained_optimum() {
    let inst = instance(vec![robot(1, [0.1, 0.5], [0.9, 0.5])], vec![], 30);
    let oracle = direct_fuel_optimum(&inst);
    let rep = solve_sequential(&inst, None, &SequentialConfig::default(), &InteriorPoint::new()).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.iterations.len() <= 3, "{} iterations", rep.iterations.len());
    let obj = rep.final_solution.as_ref().unwrap().objective;
    assert!((obj - oracle).abs() <= 1e-3 * oracle, "{obj} vs {oracle}");
    assert!(rep.feasible);
}

#[test]
fn feasible_local_optimum_seed_stops_at_the_second_iterate() {
    let inst = instance(vec![robot(1, [0.2, 0.3], [0.8, 0.6])], vec![], 30);
    let (Some(opt), _) = solve_without_collisions(&inst, &InteriorPoint::new()).unwrap() else {
        panic!("direct solve failed");
    };
    let seed = iterate_positions(&inst, &opt.states);
    let cfg = SequentialConfig::default();
    let rep = solve_sequential(&inst, Some(&seed), &cfg, &InteriorPoint::new()).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert_eq!(rep.iterations.len(), 2);
    let (a, b) = (rep.iterations[0].true_objective, rep.iterations[1].true_objective);
    assert!((a - b).abs() / a.abs() < cfg.rel_obj_tol);
}

#[test]
fn head_on_swap_resolves_the_collision() {
    // an exactly mirrored swap has no preferred side, so the lanes are offset slightly
    let inst = instance(
        vec![robot(1, [0.1, 0.48], [0.9, 0.48]), robot(2, [0.9, 0.52], [0.1, 0.52])],
        vec![],
        30,
    );
    let cfg = SequentialConfig {
        eta: 800.0,
        ..Default::default()
    };
    let rep = solve_sequential(&inst, None, &cfg, &InteriorPoint::new()).unwrap();
    let sol = rep.final_solution.as_ref().expect("at least one iterate");
    let report = verify(&inst, sol, &Tolerances::default());
    assert!(
        report.collision_violation <= 1e-4,
        "{report:?} after {:?}",
        rep.termination
    );
    assert!(report.feasible);
}

#[test]
fn preservation_from_the_optimal_single_robot_solution() {
    let inst = instance(vec![robot(1, [0.2, 0.3], [0.8, 0.6])], vec![], 30);
    let (Some(opt), _) = solve_without_collisions(&inst, &InteriorPoint::new()).unwrap() else {
        panic!("direct solve failed");
    };
    let tr = feasibility_preservation_check(&inst, &opt, &SequentialConfig::default(), &InteriorPoint::new()).unwrap();
    assert!(tr.trace.len() <= 2);
    assert!(tr.holds(), "{:?}", tr.trace);
}

#[test]
fn preservation_from_a_detour_seed() {
    // robot 1 crosses above the center, robot 2 below it
    let inst = instance(
        vec![robot(1, [0.1, 0.5], [0.9, 0.5]), robot(2, [0.9, 0.5], [0.1, 0.5])],
        vec![],
        30,
    );
    let seed = detour_solution(&inst, &[vec![(15, [0.5, 0.7])], vec![(15, [0.5, 0.3])]]);
    assert!(verify(&inst, &seed, &Tolerances::default()).feasible);
    let mut eta = 50.0;
    let tr = loop {
        let cfg = SequentialConfig {
            eta,
            ..Default::default()
        };
        let tr = feasibility_preservation_check(&inst, &seed, &cfg, &InteriorPoint::new()).unwrap();
        if tr.holds() || eta >= 800.0 {
            break tr;
        }
        eta *= 2.0;
    };
    assert!(tr.all_feasible, "eta {eta}: {:?}", tr.trace);
    assert!(tr.monotone, "eta {eta}: {:?}", tr.trace);
    assert!(tr.trace.last().unwrap().0 <= seed.objective + 1e-6);
}

#[test]
fn preservation_rejects_an_infeasible_seed() {
    let inst = instance(
        vec![robot(1, [0.1, 0.5], [0.9, 0.5]), robot(2, [0.9, 0.5], [0.1, 0.5])],
        vec![],
        30,
    );
    let colliding = detour_solution(&inst, &[vec![], vec![]]);
    assert!(!verify(&inst, &colliding, &Tolerances::default()).feasible);
    let out = feasibility_preservation_check(&inst, &colliding, &SequentialConfig::default(), &InteriorPoint::new());
    assert!(matches!(out, Err(mrmp_core::CoreError::Precondition(_))));
}

#[test]
fn runs_are_bitwise_deterministic_and_bounded() {
    let inst = instance(
        vec![robot(1, [0.1, 0.45], [0.9, 0.55]), robot(2, [0.9, 0.5], [0.1, 0.5])],
        vec![obstacle(3, [0.5, 0.8], 30)],
        30,
    );
    let cfg = SequentialConfig {
        max_iters: 5,
        ..Default::default()
    };
    let a = solve_sequential(&inst, None, &cfg, &InteriorPoint::new()).unwrap();
    let b = solve_sequential(&inst, None, &cfg, &InteriorPoint::new()).unwrap();
    assert!(a.iterations.len() <= 5);
    assert_eq!(a.final_solution, b.final_solution);
    let objs = |r: &SolveReport| -> Vec<(u64, u64)> {
        r.iterations
            .iter()
            .map(|i| (i.true_objective.to_bits(), i.penalized_objective.to_bits()))
            .collect()
    };
    assert_eq!(objs(&a), objs(&b));
}

#[test]
fn one_iteration_budget_ends_with_max_iters() {
    let inst = instance(
        vec![robot(1, [0.1, 0.5], [0.9, 0.5]), robot(2, [0.9, 0.5], [0.1, 0.5])],
        vec![],
        30,
    );
    let cfg = SequentialConfig {
        max_iters: 1,
        ..Default::default()
    };
    let rep = solve_sequential(&inst, None, &cfg, &InteriorPoint::new()).unwrap();
    assert_eq!(rep.iterations.len(), 1);
    assert_eq!(rep.termination, Termination::MaxIters);
}
