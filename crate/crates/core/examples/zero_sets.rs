//! Near-zero node counts of Examples 2 and 3 at N = 80 for a range of
//! thresholds, after converging with the in-place sweep (the synchronous
//! sweep cycles on Example 3).
//!
//! `cargo run --release --example zero_sets`

use segsolve::benchmarks::{example2, example3};
use segsolve::solver::{solve, SolveConfig, Sweep};
use segsolve::State;

fn below(s: &State, t: f64) -> usize {
    s.grid()
        .interior_nodes()
        .filter(|&k| s.phases().iter().all(|w| w.values()[k] <= t))
        .count()
}

fn main() {
    let n = 80;
    let cfg = SolveConfig {
        max_iterations: 4 * n * n,
        sweep: Sweep::GaussSeidel,
        ..SolveConfig::default()
    };
    let (s2, _) = solve(&example2::<f64>().with_n(n), &cfg).expect("solves");
    let (s3, _) = solve(&example3::<f64>().with_n(n), &cfg).expect("solves");
    for t in [0.0, 1e-8, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1] {
        println!("threshold {t:e}: example2 {} example3 {}", below(&s2, t), below(&s3, t));
    }
    let mass = |s: &State| s.sum_field().values().iter().sum::<f64>();
    println!("mass: example2 {:.1} example3 {:.1}", mass(&s2), mass(&s3));
}
