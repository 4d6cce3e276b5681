//! Error R of Example 2 for given (N, M) pairs.
//!
//! `cargo run --release --example table1 -- 40 6400 80 25600`

use segsolve::benchmarks::{error_r, example2};

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("integer argument"))
        .collect();
    for pair in args.chunks_exact(2) {
        let t = std::time::Instant::now();
        let r = error_r(&example2::<f64>(), pair[0], pair[1]).expect("example 2 solves");
        println!("N={} M={} R={:.3e} ({:.1?})", r.n, r.m, r.r, t.elapsed());
    }
}
