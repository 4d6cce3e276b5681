//! Brute-force minimizer of the discrete energy over segregated states on
//! tiny 1D grids, used to certify the fixed-point solver.
//!
//! Every assignment of "one active phase or none" to the interior nodes is
//! enumerated. With the pattern fixed the energy is convex in the active
//! values, and projected coordinate descent (each coordinate solved exactly
//! on `t ≥ 0`) finds its minimum. The global minimum is the best pattern.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsKind, DynamicsSpec};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Point, UniformGrid};
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use crate::segregation::{audit, energy, MultiPhaseState};
use crate::solver::{solve, SolveConfig};

/// Largest accepted `interior nodes × phases`.
pub const MAX_PATTERN_VARIABLES: usize = 18;
pub const MAX_N: usize = 8;
pub const MAX_M: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Coordinate descent stops once a full pass moves no value by more.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_passes: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub state: MultiPhaseState<T>,
    pub energy: T,
    pub method: String,
    pub patterns: usize,
    pub passes: usize,
    /// Active phase per interior node of the winning pattern.
    pub pattern: Vec<Option<usize>>,
}

fn check_size<T: Real>(problem: &ProblemSpec<T>) -> Result<()> {
    let interior = problem.n.saturating_sub(1);
    if problem.dim != 1
        || problem.n > MAX_N
        || problem.m() > MAX_M
        || interior * problem.m() > MAX_PATTERN_VARIABLES
    {
        return Err(Error::SizeExceeded(format!(
            "oracle handles dim 1, N ≤ {MAX_N}, m ≤ {MAX_M}, interior·m ≤ {MAX_PATTERN_VARIABLES}; \
             got dim {}, N {}, m {}",
            problem.dim,
            problem.n,
            problem.m()
        )));
    }
    Ok(())
}

/// Minimizer of `(K/h²)(t − a)²/2 + F(x, t)` over `t ≥ 0`, i.e. the root of
/// `(K/h²)(t − a) + f(x, t)` clamped at zero.
fn coordinate_min<T: Real>(dyn_l: &DynamicsSpec<T>, x: Point<T>, a: T, kh: T) -> T {
    if kh * (-a) + dyn_l.right_limit_at_zero(x) >= T::zero() {
        return T::zero();
    }
    match &dyn_l.kind {
        DynamicsKind::Zero => a,
        DynamicsKind::Constant(c) => a - *c / kh,
        DynamicsKind::WeightedAbs(c) => {
            let rho = x[0] * x[0] + x[1] * x[1];
            kh * a / (kh + *c * rho)
        }
        _ => {
            // g is increasing and g(a) ≥ 0 for nonnegative f
            let g = |t: T| kh * (t - a) + dyn_l.f(x, t);
            let (mut lo, mut hi) = (T::zero(), a);
            loop {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break hi;
                }
                if g(mid) < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
}

/// Coordinate descent with the pattern fixed; returns phase fields and passes.
fn pattern_descent<T: Real>(
    grid: &UniformGrid<T>,
    boundary: &[GridFunction<T>],
    dynamics: &[DynamicsSpec<T>],
    pattern: &[Option<usize>],
    options: &OracleOptions,
) -> (Vec<Vec<T>>, usize) {
    let n = grid.n_per_side();
    let m = boundary.len();
    let mut w: Vec<Vec<T>> = boundary.iter().map(|b| b.values().to_vec()).collect();
    let kh = T::lit(2.0) / (grid.h() * grid.h());
    let tol = T::lit(options.tol);
    let mut passes = 0;
    while passes < options.max_passes {
        passes += 1;
        let mut moved = T::zero();
        for i in 1..n {
            let Some(l) = pattern[i - 1] else { continue };
            // neighbor average of this phase minus all the others
            let mut a = T::zero();
            for j in [i - 1, i + 1] {
                for (p, wp) in w.iter().enumerate().take(m) {
                    a = if p == l { a + wp[j] } else { a - wp[j] };
                }
            }
            a = a / T::lit(2.0);
            let t = coordinate_min(&dynamics[l], grid.point(i), a, kh);
            moved = moved.max((t - w[l][i]).abs());
            w[l][i] = t;
        }
        if moved <= tol {
            break;
        }
    }
    (w, passes)
}

/// Exhaustive minimization over sign patterns. Refuses instances beyond the
/// size caps rather than approximating.
pub fn oracle_minimize<T: Real>(
    problem: &ProblemSpec<T>,
    options: &OracleOptions,
) -> Result<OracleResult<T>> {
    check_size(problem)?;
    let (grid, boundary) = problem.validate()?;
    let m = problem.m();
    let interior = grid.n_per_side() - 1;
    let count = (m + 1).pow(interior as u32);
    let decode = |mut code: usize| -> Vec<Option<usize>> {
        (0..interior)
            .map(|_| {
                let d = code % (m + 1);
                code /= m + 1;
                d.checked_sub(1)
            })
            .collect()
    };
    let results: Vec<(T, Vec<Vec<T>>, usize)> = (0..count)
        .into_par_iter()
        .map(|code| {
            let pattern = decode(code);
            let (w, passes) = pattern_descent(&grid, &boundary, &problem.dynamics, &pattern, options);
            let state = build_state(grid, &w, &boundary);
            (naive_energy(&state, &problem.dynamics), w, passes)
        })
        .collect();
    let min = results
        .iter()
        .map(|r| r.0)
        .fold(T::infinity(), |a, b| a.min(b));
    // lowest pattern code among the near-minimal ones
    let slack = T::lit(1e-13) * (T::one() + min.abs());
    let best = results
        .iter()
        .position(|r| r.0 <= min + slack)
        .expect("at least one pattern");
    let passes = results.iter().map(|r| r.2).sum();
    let (e, w, _) = results.into_iter().nth(best).expect("index in range");
    Ok(OracleResult {
        state: build_state(grid, &w, &boundary),
        energy: e,
        method: format!("sign-pattern enumeration over {count} patterns, projected coordinate descent"),
        patterns: count,
        passes,
        pattern: decode(best),
    })
}

fn build_state<T: Real>(
    grid: UniformGrid<T>,
    w: &[Vec<T>],
    boundary: &[GridFunction<T>],
) -> MultiPhaseState<T> {
    let phases = w
        .iter()
        .map(|v| GridFunction::from_values(grid, v.clone()).expect("sized from grid"))
        .collect();
    MultiPhaseState::new(grid, phases, boundary.to_vec()).expect("shapes match")
}

/// The discrete energy written out node by node, with the Laplacian taken
/// from grid coordinates rather than the stencil tables. Kept separate from
/// [`crate::segregation::energy`] so the two can check each other.
pub fn naive_energy<T: Real>(state: &MultiPhaseState<T>, dynamics: &[DynamicsSpec<T>]) -> T {
    let grid = state.grid();
    let n = grid.n_per_side();
    let side = n + 1;
    let h2 = grid.h() * grid.h();
    let m = state.m();
    let rows = if grid.dim() == 2 { side } else { 1 };
    let interior = |i: usize, j: usize| {
        i > 0 && i < n && (grid.dim() == 1 || (j > 0 && j < n))
    };
    let at = |field: &[T], i: usize, j: usize| field[j * side + i];
    let lap = |field: &dyn Fn(usize, usize) -> T, i: usize, j: usize| -> T {
        let mut s = field(i - 1, j) + field(i + 1, j) - T::lit(2.0) * field(i, j);
        if grid.dim() == 2 {
            s = s + field(i, j - 1) + field(i, j + 1) - T::lit(2.0) * field(i, j);
        }
        s / h2
    };
    let mut total = T::zero();
    for l in 0..m {
        let u = |p: usize, i: usize, j: usize| -> T {
            if interior(i, j) {
                at(state.phases()[p].values(), i, j)
            } else {
                T::zero()
            }
        };
        let phi = |p: usize, i: usize, j: usize| -> T {
            if interior(i, j) {
                T::zero()
            } else {
                at(state.boundary()[p].values(), i, j)
            }
        };
        let sign = |p: usize| if p == l { T::one() } else { -T::one() };
        let u_hat = |i: usize, j: usize| (0..m).fold(T::zero(), |a, p| a + sign(p) * u(p, i, j));
        let phi_hat =
            |i: usize, j: usize| (0..m).fold(T::zero(), |a, p| a + sign(p) * phi(p, i, j));
        for j in 0..rows {
            for i in 0..side {
                if !interior(i, j) {
                    continue;
                }
                let ul = u(l, i, j);
                let x = grid.point(j * side + i);
                total = total - lap(&u_hat, i, j) * ul / T::lit(2.0) - lap(&phi_hat, i, j) * ul
                    + dynamics[l].primitive(x, ul);
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderViolation {
    pub node: Vec<usize>,
    pub phase: usize,
    pub value: f64,
    /// `L_h(û + φ̂)` at the node.
    pub laplacian: f64,
    pub reaction: f64,
}

/// Nodes where `L_h ŵ^l = f_l(x, w^l)` fails for a positive phase, or
/// `L_h ŵ^l ≤ f_l(x, 0⁺)` fails for a vanishing one, beyond `tol`.
pub fn first_order_violations<T: Real>(
    state: &MultiPhaseState<T>,
    dynamics: &[DynamicsSpec<T>],
    tol: T,
) -> Vec<FirstOrderViolation> {
    let grid = state.grid();
    let mut out = Vec::new();
    for l in 0..state.m() {
        let hat = state.hat_field(l);
        for k in grid.interior_nodes() {
            let lap = grid.laplacian_at(hat.values(), k);
            let v = state.phases()[l].values()[k];
            let x = grid.point(k);
            let f = dynamics[l].scheme_f(x, v);
            let bad = if v > T::zero() {
                (lap - f).abs() > tol
            } else {
                lap > f + tol
            };
            if bad {
                out.push(FirstOrderViolation {
                    node: grid.node_label(k),
                    phase: l,
                    value: v.as_f64(),
                    laplacian: lap.as_f64(),
                    reaction: f.as_f64(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    /// The solver did not reach its residual target within its budget.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub status: Agreement,
    pub max_state_diff: f64,
    pub oracle_energy: f64,
    pub solver_energy: f64,
    pub solver_residual: f64,
    pub solver_iterations: usize,
    pub first_order_violations: usize,
    pub oracle_audit_clean: bool,
}

/// Solver residual target for a comparison to count.
pub const STAGNATION_TOL: f64 = 1e-12;

/// Compares the solver's fixed point against the oracle minimizer. States
/// must agree within `state_tol` (max norm) and energies within `energy_tol`.
pub fn oracle_agrees<T: Real>(
    problem: &ProblemSpec<T>,
    state_tol: f64,
    energy_tol: f64,
) -> Result<OracleComparison> {
    let oracle = oracle_minimize(problem, &OracleOptions::default())?;
    let config = SolveConfig {
        max_iterations: 2_000_000,
        residual_tol: 1e-14,
        ..SolveConfig::default()
    };
    let (state, report) = solve(problem, &config)?;
    let solver_energy = energy(&state, &problem.dynamics)?.as_f64();
    let max_state_diff = state
        .phases()
        .iter()
        .zip(oracle.state.phases())
        .map(|(a, b)| a.max_abs_diff(b).map(|d| d.as_f64()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let oracle_energy = oracle.energy.as_f64();
    let violations = first_order_violations(&oracle.state, &problem.dynamics, T::lit(1e-6)).len();
    let status = if report.final_residual > STAGNATION_TOL {
        Agreement::Inconclusive
    } else if max_state_diff <= state_tol && (oracle_energy - solver_energy).abs() <= energy_tol {
        Agreement::Agree
    } else {
        Agreement::Disagree
    };
    Ok(OracleComparison {
        status,
        max_state_diff,
        oracle_energy,
        solver_energy,
        solver_residual: report.final_residual,
        solver_iterations: report.iterations,
        first_order_violations: violations,
        oracle_audit_clean: audit(&oracle.state).is_empty(),
    })
}

/// Random oracle-sized instance: 1D, `N ∈ {2, 4, 6}`, `m ∈ {2, 3}`, boundary
/// values in `[0, 1]` on distinct phases, constant reactions in `{0, 1, 2}`.
pub fn random_instance<T: Real>(rng: &mut impl rand::Rng, index: usize) -> ProblemSpec<T> {
    use crate::problem::BoundarySource;
    let n = [2, 4, 6][rng.gen_range(0..3)];
    let m = rng.gen_range(2..=3);
    let mut left = vec![T::zero(); m];
    let mut right = vec![T::zero(); m];
    let a = rng.gen_range(0..m);
    let b = rng.gen_range(0..m);
    left[a] = T::lit(rng.gen_range(0.0..=1.0));
    right[b] = T::lit(rng.gen_range(0.0..=1.0));
    if a == b && rng.gen_bool(0.5) {
        // a different phase on the right keeps a free boundary in most draws
        right[b] = T::zero();
        right[(b + 1) % m] = T::lit(rng.gen_range(0.0..=1.0));
    }
    let dynamics = (0..m)
        .map(|_| match rng.gen_range(0..3) {
            0 => DynamicsSpec::zero(),
            c => DynamicsSpec::constant(T::of_usize(c)).expect("nonnegative"),
        })
        .collect();
    ProblemSpec {
        name: format!("oracle{index}"),
        dim: 1,
        n,
        boundary: (0..m)
            .map(|l| BoundarySource::NodeValues(vec![left[l], right[l]]))
            .collect(),
        dynamics,
        exact: None,
    }
}
