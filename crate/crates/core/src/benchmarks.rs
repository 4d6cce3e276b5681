//! Registry of the worked examples on `[-1,1]²`, the closed-form solution of
//! the three-phase constant-reaction example, error metrics against it and
//! the error tables (rows = iteration rule `M = k·N`, columns = `N`).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Point, UniformGrid};
use crate::problem::{BoundarySource, ExactSolution, ProblemSpec};
use crate::scalar::Real;
use crate::segregation::MultiPhaseState;
use crate::solver::{solve, SolveConfig, Sweep};

/// Closed-form boundary data by id.
///
/// Edges are recognized by exact `±1` coordinates, which the grid produces
/// for its first and last nodes. A formula only applies on its own edges;
/// every other boundary node gets zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPreset {
    Zero,
    Example1Phi1,
    Example1Phi2,
    Example2Phi1,
    Example2Phi2,
    Example2Phi3,
}

impl BoundaryPreset {
    pub const ALL: [BoundaryPreset; 6] = [
        Self::Zero,
        Self::Example1Phi1,
        Self::Example1Phi2,
        Self::Example2Phi1,
        Self::Example2Phi2,
        Self::Example2Phi3,
    ];

    pub fn eval<T: Real>(&self, p: Point<T>) -> T {
        let [x, y] = p;
        let one = T::one();
        let zero = T::zero();
        let half = T::lit(0.5);
        let three = T::lit(3.0);
        let horizontal = y == one || y == -one;
        let (left, right) = (x == -one, x == one);
        match self {
            Self::Zero => zero,
            Self::Example1Phi1 => {
                if right {
                    one
                } else if horizontal && x >= zero {
                    x.sqrt()
                } else {
                    zero
                }
            }
            Self::Example1Phi2 => {
                if left {
                    one
                } else if horizontal && x < zero {
                    x.abs()
                } else {
                    zero
                }
            }
            Self::Example2Phi1 => {
                if y == -one {
                    (one + three * x).positive_part()
                } else if right && y < zero {
                    y * (y - three)
                } else {
                    zero
                }
            }
            Self::Example2Phi2 => {
                if y == one {
                    (one + three * x).positive_part()
                } else if right && y >= zero {
                    y * (y + three)
                } else {
                    zero
                }
            }
            Self::Example2Phi3 => {
                if left {
                    half * (T::lit(9.0) - y * y)
                } else if horizontal && three * x < -one {
                    half * (T::lit(9.0) * x * x - one)
                } else {
                    zero
                }
            }
        }
    }
}

/// Closed-form solutions by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactPreset {
    Example2,
}

impl ExactPreset {
    pub fn m(&self) -> usize {
        3
    }

    /// Phase `l` (0-based) at `p`; zero outside that phase's region.
    pub fn eval<T: Real>(&self, l: usize, p: Point<T>) -> T {
        let [x, y] = p;
        let zero = T::zero();
        let three = T::lit(3.0);
        let v = match (self, l) {
            (Self::Example2, 0) if y < zero && y <= three * x => -(three * x - y) * y,
            (Self::Example2, 1) if y >= zero && y >= -three * x => y * (three * x + y),
            (Self::Example2, 2) if three * x < y && y < -three * x => {
                T::lit(0.5) * (T::lit(9.0) * x * x - y * y)
            }
            _ => zero,
        };
        v.positive_part()
    }

    /// Index of the phase whose region contains `p`.
    pub fn region<T: Real>(&self, p: Point<T>) -> usize {
        let [x, y] = p;
        let three = T::lit(3.0);
        if y < T::zero() && y <= three * x {
            0
        } else if y >= T::zero() && y >= -three * x {
            1
        } else {
            2
        }
    }
}

pub const REGISTRY: [&str; 3] = ["example1", "example2", "example3"];

/// Two phases, `f₁ = 2(x²+y²)|u|`, `f₂ = 10(x²+y²)|u|`, `N = 50`.
pub fn example1<T: Real>() -> ProblemSpec<T> {
    ProblemSpec {
        name: "example1".into(),
        dim: 2,
        n: 50,
        boundary: vec![
            BoundarySource::Preset(BoundaryPreset::Example1Phi1),
            BoundarySource::Preset(BoundaryPreset::Example1Phi2),
        ],
        dynamics: vec![
            DynamicsSpec::weighted_abs(T::lit(2.0)).expect("valid coefficient"),
            DynamicsSpec::weighted_abs(T::lit(10.0)).expect("valid coefficient"),
        ],
        exact: None,
    }
}

fn example2_boundary<T: Real>() -> Vec<BoundarySource<T>> {
    vec![
        BoundarySource::Preset(BoundaryPreset::Example2Phi1),
        BoundarySource::Preset(BoundaryPreset::Example2Phi2),
        BoundarySource::Preset(BoundaryPreset::Example2Phi3),
    ]
}

/// Three phases with constant reactions 2, 2, 8 and a known solution, `N = 40`.
pub fn example2<T: Real>() -> ProblemSpec<T> {
    let c = |v: f64| DynamicsSpec::constant(T::lit(v)).expect("valid coefficient");
    ProblemSpec {
        name: "example2".into(),
        dim: 2,
        n: 40,
        boundary: example2_boundary(),
        dynamics: vec![c(2.0), c(2.0), c(8.0)],
        exact: Some(ExactSolution::Preset(ExactPreset::Example2)),
    }
}

/// Same boundary as [`example2`], reactions `10ρ√u`, `10ρ√u`, `40ρ√u`.
pub fn example3<T: Real>() -> ProblemSpec<T> {
    let s = |v: f64| DynamicsSpec::weighted_sqrt(T::lit(v)).expect("valid coefficient");
    ProblemSpec {
        name: "example3".into(),
        dim: 2,
        n: 40,
        boundary: example2_boundary(),
        dynamics: vec![s(10.0), s(10.0), s(40.0)],
        exact: None,
    }
}

pub fn by_name<T: Real>(name: &str) -> Result<ProblemSpec<T>> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "example3" => Ok(example3()),
        other => Err(Error::ProblemDefinition(format!(
            "unknown problem {other:?}, expected one of {REGISTRY:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub m: usize,
    pub r: f64,
}

/// Max over all nodes of `|Σ_l w^l − Σ_l u_l|`, computed against exact fields.
pub fn sum_error<T: Real>(state: &MultiPhaseState<T>, exact: &[GridFunction<T>]) -> T {
    let computed = state.sum_field();
    let mut want = GridFunction::zeros(*state.grid());
    for e in exact {
        want = want.zip_with(e, |a, b| a + b);
    }
    computed.max_abs_diff(&want).expect("same grid")
}

/// Solves with a fixed budget of `m` sweeps and measures the max-norm error
/// of the summed field against the exact solution.
pub fn error_r<T: Real>(problem: &ProblemSpec<T>, n: usize, m: usize) -> Result<ErrorRecord> {
    error_r_with(problem, n, m, Sweep::Jacobi)
}

/// [`error_r`] with a chosen sweep order.
pub fn error_r_with<T: Real>(
    problem: &ProblemSpec<T>,
    n: usize,
    m: usize,
    sweep: Sweep,
) -> Result<ErrorRecord> {
    let problem = problem.clone().with_n(n);
    if problem.exact.is_none() {
        return Err(Error::Validation(format!(
            "problem {} has no exact solution",
            problem.name
        )));
    }
    let config = SolveConfig {
        max_iterations: m,
        sweep,
        ..SolveConfig::default()
    };
    let (state, _) = solve(&problem, &config)?;
    let exact = problem
        .exact_fields(state.grid())
        .expect("checked above");
    Ok(ErrorRecord {
        n,
        m,
        r: sum_error(&state, &exact).as_f64(),
    })
}

pub const TABLE_RULES: [usize; 6] = [5, 10, 20, 40, 80, 160];
pub const DESK_NS: [usize; 3] = [10, 20, 40];
pub const FULL_NS: [usize; 6] = [10, 20, 40, 80, 160, 320];

/// `r[i][j]` is the error for rule `rules[i]` (budget `rules[i]·N`) at `ns[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub problem: String,
    pub rules: Vec<usize>,
    pub ns: Vec<usize>,
    pub r: Vec<Vec<f64>>,
}

impl ErrorTable {
    pub fn get(&self, rule: usize, n: usize) -> Option<f64> {
        let i = self.rules.iter().position(|&k| k == rule)?;
        let j = self.ns.iter().position(|&v| v == n)?;
        Some(self.r[i][j])
    }

    /// Fixed-width text, one row per rule.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<14}", "");
        for n in &self.ns {
            let _ = write!(out, "{:>12}", format!("N={n}"));
        }
        out.push('\n');
        for (k, row) in self.rules.iter().zip(&self.r) {
            let _ = write!(out, "{:<14}", format!("R_{{N,{k}xN}}"));
            for v in row {
                let _ = write!(out, "{v:>12.2e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Every `(rule, N)` cell, solved independently and in parallel.
pub fn error_table<T: Real>(
    problem: &ProblemSpec<T>,
    ns: &[usize],
    rules: &[usize],
    sweep: Sweep,
) -> Result<ErrorTable> {
    let cells: Vec<(usize, usize)> = rules
        .iter()
        .flat_map(|&k| ns.iter().map(move |&n| (k, n)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(k, n)| error_r_with(problem, n, k * n, sweep).map(|rec| rec.r))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ErrorTable {
        problem: problem.name.clone(),
        rules: rules.to_vec(),
        ns: ns.to_vec(),
        r: values.chunks(ns.len().max(1)).map(<[f64]>::to_vec).collect(),
    })
}

/// Interior nodes where every phase vanishes.
pub fn zero_set_count<T: Real>(state: &MultiPhaseState<T>) -> usize {
    state
        .grid()
        .interior_nodes()
        .filter(|&k| state.phases().iter().all(|w| w.values()[k] == T::zero()))
        .count()
}

/// Positive phase at every node, `None` where all vanish.
pub fn sign_pattern<T: Real>(state: &MultiPhaseState<T>) -> Vec<Option<usize>> {
    (0..state.grid().node_count())
        .map(|k| state.phases().iter().position(|w| w.values()[k] > T::zero()))
        .collect()
}

/// Random problem with pairwise disjoint boundary data and catalog dynamics:
/// `dim ∈ {1, 2}`, `m ∈ {2, 3, 4}`, small `N`. Each boundary node belongs to
/// at most one phase, with a value in `[0, 2)`.
pub fn random_problem<T: Real>(rng: &mut ChaCha8Rng, index: usize) -> ProblemSpec<T> {
    let dim = rng.gen_range(1..=2);
    let n = if dim == 1 {
        rng.gen_range(2..=24)
    } else {
        rng.gen_range(2..=12)
    };
    let m = rng.gen_range(2..=4);
    let grid = UniformGrid::<T>::new(dim, n).expect("n ≥ 2");
    let nb = grid.boundary_nodes().count();
    let mut values = vec![vec![T::zero(); nb]; m];
    for j in 0..nb {
        let owner = rng.gen_range(0..=m);
        if owner < m {
            values[owner][j] = T::lit(rng.gen_range(0.0..2.0));
        }
    }
    let dynamics = (0..m)
        .map(|_| {
            let c = T::lit(rng.gen_range(0.0..8.0));
            match rng.gen_range(0..4) {
                0 => Ok(DynamicsSpec::zero()),
                1 => DynamicsSpec::constant(c),
                2 => DynamicsSpec::weighted_abs(c),
                _ => DynamicsSpec::weighted_sqrt(c),
            }
            .expect("nonnegative coefficient")
        })
        .collect();
    ProblemSpec {
        name: format!("random{index}"),
        dim,
        n,
        boundary: values.into_iter().map(BoundarySource::NodeValues).collect(),
        dynamics,
        exact: None,
    }
}

pub fn random_problems<T: Real>(seed: u64, count: usize) -> Vec<ProblemSpec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_problem(&mut rng, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segregation::audit;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn example1_boundary_values() {
        assert!(close(BoundaryPreset::Example1Phi1.eval([0.25, 1.0]), 0.5));
        assert!(close(BoundaryPreset::Example1Phi2.eval([-0.5, -1.0]), 0.5));
        assert_eq!(BoundaryPreset::Example1Phi1.eval([-0.5, 1.0]), 0.0);
        assert_eq!(BoundaryPreset::Example1Phi1.eval([1.0, 0.3]), 1.0);
        assert_eq!(BoundaryPreset::Example1Phi2.eval([1.0, 0.3]), 0.0);
        let (grid, fields) = example1::<f64>().validate().unwrap();
        for k in grid.boundary_nodes() {
            assert!(fields[0].values()[k] * fields[1].values()[k] == 0.0);
        }
    }

    #[test]
    fn example2_exact_values() {
        let e = ExactPreset::Example2;
        assert!(close(e.eval(1, [0.5, 0.5]), 1.0));
        assert!(close(e.eval(2, [-0.5, 0.0]), 1.125));
        assert!(close(e.eval(0, [0.5, -0.5]), 1.0));
        assert_eq!(e.eval(0, [0.5, 0.5]), 0.0);
        assert_eq!(e.region([-0.5, 0.0]), 2);
    }

    #[test]
    fn example2_exact_laplacians() {
        // Δ of each closed form by central differences at interior region points
        let e = ExactPreset::Example2;
        let h = 1e-3;
        for (l, p, want) in [(0, [0.5, -0.5], 2.0), (1, [0.3, 0.6], 2.0), (2, [-0.6, 0.1], 8.0)] {
            let f = |x: f64, y: f64| e.eval(l, [x, y]);
            let lap = (f(p[0] + h, p[1]) + f(p[0] - h, p[1]) + f(p[0], p[1] + h)
                + f(p[0], p[1] - h)
                - 4.0 * f(p[0], p[1]))
                / (h * h);
            assert!((lap - want).abs() < 1e-6, "phase {l}: {lap}");
        }
    }

    #[test]
    fn example2_boundary_is_exact_trace() {
        for n in [4, 10, 40] {
            let problem = example2::<f64>().with_n(n);
            let (grid, fields) = problem.validate().unwrap();
            let exact = problem.exact_fields(&grid).unwrap();
            for k in grid.boundary_nodes() {
                for l in 0..3 {
                    let (a, b) = (fields[l].values()[k], exact[l].values()[k]);
                    assert!((a - b).abs() <= 1e-12, "n={n} node {:?} phase {l}", grid.node_label(k));
                }
            }
        }
        let corner = [1.0, 1.0];
        let vals: Vec<f64> = [
            BoundaryPreset::Example2Phi1,
            BoundaryPreset::Example2Phi2,
            BoundaryPreset::Example2Phi3,
        ]
        .iter()
        .map(|p| p.eval(corner))
        .collect();
        assert_eq!(vals, vec![0.0, 4.0, 0.0]);
    }

    #[test]
    fn corners_agree_between_edge_formulas() {
        let top = |x: f64| 0.5 * (9.0 * x * x - 1.0);
        let left = |y: f64| 0.5 * (9.0 - y * y);
        assert_eq!(top(-1.0), left(1.0));
        assert_eq!(top(-1.0), left(-1.0));
    }

    #[test]
    fn example2_exact_is_segregated_on_grids() {
        for n in [5, 10, 20, 33] {
            let problem = example2::<f64>().with_n(n);
            let (grid, phi) = problem.validate().unwrap();
            let exact = problem.exact_fields(&grid).unwrap();
            let state = MultiPhaseState::new(grid, exact, phi).unwrap();
            assert!(audit(&state).is_empty(), "n={n}");
        }
    }

    #[test]
    fn example3_matches_example2_boundary() {
        let (g2, b2) = example2::<f64>().validate().unwrap();
        let (g3, b3) = example3::<f64>().validate().unwrap();
        assert_eq!(g2, g3);
        assert_eq!(b2, b3);
        let f2 = &example3::<f64>().dynamics[1];
        assert_eq!(f2.f([1.0, 0.0], 1.0), 10.0);
    }

    #[test]
    fn registry_lookup() {
        for name in REGISTRY {
            assert_eq!(by_name::<f64>(name).unwrap().name, name);
        }
        assert!(matches!(by_name::<f64>("nope"), Err(Error::ProblemDefinition(_))));
    }

    #[test]
    fn error_r_requires_exact() {
        assert!(matches!(error_r(&example1::<f64>(), 4, 4), Err(Error::Validation(_))));
    }

    #[test]
    fn table_text_layout() {
        let t = ErrorTable {
            problem: "p".into(),
            rules: vec![5, 10],
            ns: vec![10, 20],
            r: vec![vec![2.27e-2, 6.25e-3], vec![2.27e-2, 5.97e-3]],
        };
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("R_{N,5xN}"));
        assert!(lines[2].contains("5.97e-3"));
        assert_eq!(t.get(10, 20), Some(5.97e-3));
    }

    #[test]
    fn random_problems_are_valid_and_reproducible() {
        let a = random_problems::<f64>(7, 20);
        let b = random_problems::<f64>(7, 20);
        for (p, q) in a.iter().zip(&b) {
            let (_, fp) = p.validate().unwrap();
            let (_, fq) = q.validate().unwrap();
            assert_eq!(fp, fq);
        }
    }
}
