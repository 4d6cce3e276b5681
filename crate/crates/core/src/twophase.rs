//! Two phases as one signed unknown `w = w¹ − w²` and the min-max form
//!
//! ```text
//! min(−Δw + f₁(x, w), max(−Δw − f₂(x, −w), w)) = 0
//! ```
//!
//! The solution comes from the m-phase iteration; the min-max residual is an
//! independent check on it. Also here: the monotonicity probe of the
//! discrete operator and refinement studies on nested grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Point, UniformGrid};
use crate::problem::{BoundarySource, ProblemSpec};
use crate::scalar::Real;
use crate::segregation::MultiPhaseState;
use crate::solver::{solve, SolveConfig, SolveReport};

#[derive(Debug, Clone)]
pub struct TwoPhaseProblem<T: Real> {
    pub grid: UniformGrid<T>,
    /// Signed boundary data `g = φ¹ − φ²`, zero at interior nodes.
    pub g: GridFunction<T>,
    pub f1: DynamicsSpec<T>,
    pub f2: DynamicsSpec<T>,
}

impl<T: Real> TwoPhaseProblem<T> {
    pub fn new(
        g: GridFunction<T>,
        f1: DynamicsSpec<T>,
        f2: DynamicsSpec<T>,
    ) -> Result<Self> {
        let grid = *g.grid();
        let mut g = g;
        for k in grid.interior_nodes() {
            g.values_mut()[k] = T::zero();
        }
        if !g.is_finite() {
            return Err(Error::ProblemDefinition("boundary data not finite".into()));
        }
        Ok(Self { grid, g, f1, f2 })
    }

    /// Samples `g` on the boundary of a fresh grid.
    pub fn from_fn(
        dim: usize,
        n: usize,
        g: impl Fn(Point<T>) -> T,
        f1: DynamicsSpec<T>,
        f2: DynamicsSpec<T>,
    ) -> Result<Self> {
        let grid = UniformGrid::new(dim, n)?;
        Self::new(GridFunction::from_fn(grid, g), f1, f2)
    }

    /// Collapses a two-phase [`ProblemSpec`] to `g = φ¹ − φ²`.
    pub fn from_spec(spec: &ProblemSpec<T>) -> Result<Self> {
        if spec.m() != 2 {
            return Err(Error::ProblemDefinition(format!(
                "two-phase problem needs m = 2, got {}",
                spec.m()
            )));
        }
        let (_, phi) = spec.validate()?;
        Self::new(
            phi[0].zip_with(&phi[1], |a, b| a - b),
            spec.dynamics[0].clone(),
            spec.dynamics[1].clone(),
        )
    }

    /// The equivalent m = 2 problem: `φ¹ = g⁺`, `φ² = g⁻`.
    pub fn to_spec(&self) -> ProblemSpec<T> {
        let boundary: Vec<usize> = self.grid.boundary_nodes().collect();
        let part = |sign: T| {
            BoundarySource::NodeValues(
                boundary
                    .iter()
                    .map(|&k| (sign * self.g.values()[k]).positive_part())
                    .collect(),
            )
        };
        ProblemSpec {
            name: "two_phase".into(),
            dim: self.grid.dim(),
            n: self.grid.n_per_side(),
            boundary: vec![part(T::one()), part(-T::one())],
            dynamics: vec![self.f1.clone(), self.f2.clone()],
            exact: None,
        }
    }

    /// `min(−lap + f₁(x, r), max(−lap − f₂(x, −r), r))`. The gradient slot
    /// `p` is accepted and ignored; at `r = 0` both reactions take their
    /// right limits.
    pub fn minmax_g(&self, x: Point<T>, r: T, _p: Point<T>, lap: T) -> T {
        minmax_g(&self.f1, &self.f2, x, r, lap)
    }
}

pub fn minmax_g<T: Real>(
    f1: &DynamicsSpec<T>,
    f2: &DynamicsSpec<T>,
    x: Point<T>,
    r: T,
    lap: T,
) -> T {
    let lower = -lap + f1.scheme_f(x, r);
    let upper = (-lap - f2.scheme_f(x, -r)).max(r);
    lower.min(upper)
}

/// Max over interior nodes of `|G(x, u, L_h u)|`.
pub fn discrete_residual<T: Real>(problem: &TwoPhaseProblem<T>, u: &GridFunction<T>) -> Result<T> {
    let grid = &problem.grid;
    if u.grid() != grid {
        return Err(Error::Validation("field on a different grid".into()));
    }
    if let Some(k) = grid
        .boundary_nodes()
        .find(|&k| u.values()[k] != problem.g.values()[k])
    {
        return Err(Error::Validation(format!(
            "field differs from boundary data at node {:?}",
            grid.node_label(k)
        )));
    }
    Ok(grid.interior_nodes().fold(T::zero(), |acc, k| {
        let v = u.values();
        let g = minmax_g(
            &problem.f1,
            &problem.f2,
            grid.point(k),
            v[k],
            grid.laplacian_at(v, k),
        );
        acc.max(g.abs())
    }))
}

/// Scalar energy `−½(L_h v, v) + Σ F₁(x, v⁺) + Σ F₂(x, v⁻) − (L_h g, v)` of the
/// field `w`, with `v` its interior part and `g` the boundary data.
pub fn scalar_energy<T: Real>(problem: &TwoPhaseProblem<T>, w: &GridFunction<T>) -> Result<T> {
    let grid = &problem.grid;
    if w.grid() != grid {
        return Err(Error::Validation("field on a different grid".into()));
    }
    let mut v = w.clone();
    for k in grid.boundary_nodes() {
        v.values_mut()[k] = T::zero();
    }
    let (v, g) = (v.values(), problem.g.values());
    Ok(grid.interior_nodes().fold(T::zero(), |acc, k| {
        let x = grid.point(k);
        acc - grid.laplacian_at(v, k) * v[k] / T::lit(2.0)
            + problem.f1.primitive(x, v[k].positive_part())
            + problem.f2.primitive(x, (-v[k]).positive_part())
            - grid.laplacian_at(g, k) * v[k]
    }))
}

/// Solves through the m = 2 iteration and returns `w = w¹ − w²`, with the
/// min-max residual filled into the report.
pub fn solve_twophase<T: Real>(
    problem: &TwoPhaseProblem<T>,
    config: &SolveConfig,
) -> Result<(GridFunction<T>, SolveReport)> {
    let (state, mut report) = solve(&problem.to_spec(), config)?;
    let w = state.signed_two_phase()?;
    report.minmax_residual = Some(discrete_residual(problem, &w)?.as_f64());
    Ok((w, report))
}

/// Which variable of `F[u_i, u_i − u_j]` a probe trial perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVariable {
    Center,
    Difference(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeWitness {
    pub trial: u64,
    pub node: Vec<usize>,
    pub variable: ProbeVariable,
    pub center: f64,
    pub differences: Vec<f64>,
    pub increment: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: u64,
    pub seed: u64,
    pub violations: Vec<ProbeWitness>,
}

impl ProbeReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The scheme at one node written as `F[u_i, d]` with `d_j = u_i − u_j`:
/// `L_h u_i = −Σ_j d_j / h²`.
fn scheme_in_differences<T: Real>(
    problem: &TwoPhaseProblem<T>,
    x: Point<T>,
    center: T,
    diffs: &[T],
) -> T {
    let h2 = problem.grid.h() * problem.grid.h();
    let lap = -diffs.iter().fold(T::zero(), |acc, &d| acc + d) / h2;
    minmax_g(&problem.f1, &problem.f2, x, center, lap)
}

/// Checks on `trials` random inputs that the discrete operator is
/// nondecreasing in the node value and in each difference to a neighbor.
///
/// Trial `t` draws from stream `t` of a ChaCha generator keyed by `seed`, so
/// the report does not depend on scheduling.
pub fn monotonicity_probe<T: Real>(
    problem: &TwoPhaseProblem<T>,
    trials: u64,
    seed: u64,
) -> ProbeReport {
    let grid = &problem.grid;
    let interior: Vec<usize> = grid.interior_nodes().collect();
    let k_nbrs = grid.neighbor_count();
    let scale = grid.h() * grid.h();
    let violations: Vec<ProbeWitness> = (0..trials)
        .into_par_iter()
        .filter_map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            if interior.is_empty() {
                return None;
            }
            let k = interior[rng.gen_range(0..interior.len())];
            let x = grid.point(k);
            let draw = |rng: &mut ChaCha8Rng| -> T {
                if rng.gen_bool(0.1) {
                    T::zero()
                } else {
                    T::lit(rng.gen_range(-2.0..2.0))
                }
            };
            let center = draw(&mut rng);
            // differences on the scale of h² keep both branches of the min-max in play
            let diffs: Vec<T> = (0..k_nbrs).map(|_| draw(&mut rng) * scale).collect();
            let variable = if rng.gen_bool(0.5) {
                ProbeVariable::Center
            } else {
                ProbeVariable::Difference(rng.gen_range(0..k_nbrs))
            };
            let mut increment = T::lit(rng.gen_range(0.0..1.0));
            if rng.gen_bool(0.2) {
                // land exactly on zero from below
                if let ProbeVariable::Center = variable {
                    if center < T::zero() {
                        increment = -center;
                    }
                }
            }
            let before = scheme_in_differences(problem, x, center, &diffs);
            let (c2, mut d2) = (center, diffs.clone());
            let c2 = match variable {
                ProbeVariable::Center => c2 + increment,
                ProbeVariable::Difference(j) => {
                    d2[j] = d2[j] + increment * scale;
                    c2
                }
            };
            let after = scheme_in_differences(problem, x, c2, &d2);
            let slack = T::lit(1e-12) * (T::one() + before.abs());
            if after < before - slack || after.is_nan() || before.is_nan() {
                Some(ProbeWitness {
                    trial,
                    node: grid.node_label(k),
                    variable,
                    center: center.as_f64(),
                    differences: diffs.iter().map(|d| d.as_f64()).collect(),
                    increment: increment.as_f64(),
                    before: before.as_f64(),
                    after: after.as_f64(),
                })
            } else {
                None
            }
        })
        .collect();
    ProbeReport {
        trials,
        seed,
        violations,
    }
}

/// Field compared across resolutions: `w¹ − w²` for two phases, `Σ_l w^l`
/// otherwise.
pub fn comparison_field<T: Real>(state: &MultiPhaseState<T>) -> GridFunction<T> {
    match state.signed_two_phase() {
        Ok(w) => w,
        Err(_) => state.sum_field(),
    }
}

fn exact_comparison_field<T: Real>(m: usize, exact: &[GridFunction<T>]) -> GridFunction<T> {
    if m == 2 {
        exact[0].zip_with(&exact[1], |a, b| a - b)
    } else {
        let mut acc = GridFunction::zeros(*exact[0].grid());
        for e in exact {
            acc = acc.zip_with(e, |a, b| a + b);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub n: usize,
    pub iterations: usize,
    pub residual: f64,
    pub error: f64,
    /// `log₂(error(previous N) / error(this N))`.
    pub log2_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub problem: String,
    /// `exact` or `finest`.
    pub reference: String,
    pub entries: Vec<ConvergenceEntry>,
}

impl ConvergenceTable {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>6} {:>10} {:>12} {:>12} {:>8}\n",
            "N", "iters", "residual", "error", "rate"
        );
        for e in &self.entries {
            let rate = e
                .log2_ratio
                .map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
            out.push_str(&format!(
                "{:>6} {:>10} {:>12.3e} {:>12.3e} {:>8}\n",
                e.n, e.iterations, e.residual, e.error, rate
            ));
        }
        out
    }
}

/// Solves `family` at each `N` of `ns` with `config(N)` and measures the
/// max-norm error on each grid, against the exact solution when the problem
/// has one and otherwise against the finest solve restricted to the coarse
/// nodes (the finest entry is then omitted).
pub fn refinement_study<T: Real>(
    family: &ProblemSpec<T>,
    ns: &[usize],
    config: impl Fn(usize) -> SolveConfig + Sync,
) -> Result<ConvergenceTable> {
    if ns.len() < 3 {
        return Err(Error::Validation(format!(
            "refinement needs at least three resolutions, got {}",
            ns.len()
        )));
    }
    if ns.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
        return Err(Error::Validation(format!(
            "resolutions {ns:?} are not ascending and nested"
        )));
    }
    let runs = ns
        .par_iter()
        .map(|&n| {
            let p = family.clone().with_n(n);
            solve(&p, &config(n)).map(|(s, r)| (p, s, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let has_exact = family.exact.is_some();
    let finest = comparison_field(&runs.last().expect("nonempty").1);
    let mut entries = Vec::new();
    let count = if has_exact { runs.len() } else { runs.len() - 1 };
    for (p, state, report) in runs.iter().take(count) {
        let w = comparison_field(state);
        let reference = if has_exact {
            exact_comparison_field(p.m(), &p.exact_fields(state.grid()).expect("has exact"))
        } else {
            finest.restrict_to(state.grid())?
        };
        let error = w.max_abs_diff(&reference)?.as_f64();
        let log2_ratio = entries
            .last()
            .map(|prev: &ConvergenceEntry| (prev.error / error).log2());
        entries.push(ConvergenceEntry {
            n: p.n,
            iterations: report.iterations,
            residual: report.final_residual,
            error,
            log2_ratio,
        });
    }
    Ok(ConvergenceTable {
        problem: family.name.clone(),
        reference: if has_exact { "exact" } else { "finest" }.into(),
        entries,
    })
}
