//! Finite-difference solver for stationary states of spatially segregating
//! reaction-diffusion systems with `m ≥ 2` competing densities on `[-1,1]^d`,
//! `d ∈ {1, 2}`.
//!
//! The densities are found as the fixed point of a projected Jacobi
//! iteration on a uniform grid. The iteration keeps the supports pairwise
//! disjoint and the values between zero and the boundary maximum at every
//! step. Independent checks are provided alongside: the discrete energy, a
//! brute-force minimizer for tiny grids, and for two phases a min-max
//! residual and a monotonicity probe.
//!
//! ```
//! use segsolve::{benchmarks, solver};
//!
//! let problem = benchmarks::example2::<f64>().with_n(10);
//! let config = solver::SolveConfig::with_iterations(400);
//! let (state, report) = solver::solve(&problem, &config).unwrap();
//! let exact = problem.exact_fields(state.grid()).unwrap();
//! assert!(benchmarks::sum_error(&state, &exact) < 3e-2);
//! assert!(report.iterations <= 400);
//! ```
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar type.

pub mod benchmarks;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod segregation;
pub mod solver;
pub mod twophase;

pub use dynamics::{DynamicsConfig, DynamicsSpec};
pub use error::{Error, Result};
pub use grid::{GridFunction, Point, UniformGrid};
pub use problem::{BoundarySource, ExactSolution, ProblemConfig, ProblemSpec};
pub use scalar::Real;
pub use segregation::MultiPhaseState;
pub use solver::{solve, SolveConfig, SolveReport};
pub use twophase::TwoPhaseProblem;

pub type Grid = UniformGrid<f64>;
pub type Field = GridFunction<f64>;
pub type State = MultiPhaseState<f64>;
pub type Problem = ProblemSpec<f64>;
pub type Dynamics = DynamicsSpec<f64>;
pub type TwoPhase = TwoPhaseProblem<f64>;

pub type Grid32 = UniformGrid<f32>;
pub type Field32 = GridFunction<f32>;
pub type State32 = MultiPhaseState<f32>;
pub type Problem32 = ProblemSpec<f32>;
pub type Dynamics32 = DynamicsSpec<f32>;
pub type TwoPhase32 = TwoPhaseProblem<f32>;
