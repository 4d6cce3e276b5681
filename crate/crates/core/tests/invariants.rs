use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segsolve::benchmarks::{example2, random_problem, sum_error};
use segsolve::oracle::{oracle_minimize, random_instance, OracleOptions};
use segsolve::segregation::{audit, stability_audit};
use segsolve::solver::{initialize, iterate_step, solve, solve_from, SolveConfig, StopReason};
use segsolve::twophase::solve_twophase;
use segsolve::{Problem, Problem32, State, TwoPhase};

fn tight(max_iterations: usize) -> SolveConfig {
    SolveConfig {
        max_iterations,
        residual_tol: 1e-14,
        ..SolveConfig::default()
    }
}

/// Random admissible start: one phase per interior node, value up to its
/// boundary maximum.
fn scrambled(problem: &Problem, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initialize(problem).unwrap();
    let caps = state.boundary_max();
    let interior: Vec<usize> = state.grid().interior_nodes().collect();
    let m = state.m();
    for k in interior {
        let l = rng.gen_range(0..m);
        let v = rng.gen_range(0.0..=caps[l]);
        state.phases_mut()[l].values_mut()[k] = v;
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_iterate_is_admissible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem: Problem = random_problem(&mut rng, 0);
        let mut state = initialize(&problem).unwrap();
        for k in 0..(problem.n * problem.n).min(300) {
            state = iterate_step(&state, &problem.dynamics).unwrap();
            let found: Vec<_> = audit(&state).into_iter().chain(stability_audit(&state)).collect();
            prop_assert!(found.is_empty(), "iterate {}: {:?}", k + 1, found);
        }
    }

    #[test]
    fn limit_does_not_depend_on_the_start(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem: Problem = random_instance(&mut rng, 0);
        let cfg = tight(200_000);
        let (from_zero, r0) = solve(&problem, &cfg).unwrap();
        let start = scrambled(&problem, seed ^ 0x9e37);
        prop_assert!(audit(&start).is_empty());
        let (from_other, r1) = solve_from(start, &problem.dynamics, &cfg).unwrap();
        prop_assert!(r0.stop != StopReason::Budget && r1.stop != StopReason::Budget);
        for (a, b) in from_zero.phases().iter().zip(from_other.phases()) {
            prop_assert!(a.max_abs_diff(b).unwrap() < 1e-10);
        }
    }
}

#[test]
fn two_phase_solution_matches_brute_force_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for i in 0..40 {
        let problem: Problem = random_instance(&mut rng, i);
        if problem.m() != 2 {
            continue;
        }
        let two = TwoPhase::from_spec(&problem).unwrap();
        let (w, report) = solve_twophase(&two, &tight(200_000)).unwrap();
        assert_ne!(report.stop, StopReason::Budget);
        let oracle = oracle_minimize(&problem, &OracleOptions::default()).unwrap();
        let want = oracle.state.signed_two_phase().unwrap();
        let diff = w.max_abs_diff(&want).unwrap();
        assert!(diff < 1e-8, "{}: diff {diff:e}", problem.name);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} two-phase instances");
}

#[test]
fn min_max_residual_vanishes_when_f2_dominates() {
    for (c1, c2) in [(0.0, 0.0), (1.0, 1.0), (0.5, 3.0)] {
        let two = TwoPhase::from_fn(
            1,
            16,
            |x| x[0],
            segsolve::Dynamics::constant(c1).unwrap(),
            segsolve::Dynamics::constant(c2).unwrap(),
        )
        .unwrap();
        let (_, report) = solve_twophase(&two, &tight(100_000)).unwrap();
        let g = report.minmax_residual.unwrap();
        assert!(g < 1e-8, "c = ({c1}, {c2}): residual {g:e}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let cfg = SolveConfig::with_iterations(400);
    let p64: Problem = example2().with_n(10);
    let p32: Problem32 = example2().with_n(10);
    let (s64, _) = solve(&p64, &cfg).unwrap();
    let (s32, _) = solve(&p32, &cfg).unwrap();
    assert!(audit(&s32).is_empty());
    let r64 = sum_error(&s64, &p64.exact_fields(s64.grid()).unwrap());
    let r32 = sum_error(&s32, &p32.exact_fields(s32.grid()).unwrap()) as f64;
    assert!((r64 - r32).abs() < 1e-5 * r64.max(1.0), "{r64} vs {r32}");
    for (a, b) in s64.phases().iter().zip(s32.phases()) {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - *y as f64).abs() < 1e-5);
        }
    }
}
