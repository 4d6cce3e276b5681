//! Problem definitions: grid size, phase count, boundary data, dynamics and
//! an optional exact solution, plus the JSON config form used by the CLI.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{BoundaryPreset, ExactPreset};
use crate::dynamics::{DynamicsConfig, DynamicsSpec};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Point, UniformGrid};
use crate::scalar::Real;

pub type PointFn<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub enum BoundarySource<T> {
    /// A named closed-form boundary formula.
    Preset(BoundaryPreset),
    /// One value per boundary node, boundary nodes in ascending flat order.
    NodeValues(Vec<T>),
    Function(PointFn<T>),
}

impl<T: Real> fmt::Debug for BoundarySource<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Preset(p) => write!(f, "Preset({p:?})"),
            Self::NodeValues(v) => write!(f, "NodeValues(len {})", v.len()),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

#[derive(Clone)]
pub enum ExactSolution<T> {
    Preset(ExactPreset),
    /// One closed form per phase.
    Functions(Vec<PointFn<T>>),
}

#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub boundary: Vec<BoundarySource<T>>,
    pub dynamics: Vec<DynamicsSpec<T>>,
    pub exact: Option<ExactSolution<T>>,
}

impl<T: Real> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("boundary", &self.boundary)
            .field("dynamics", &self.dynamics)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl<T: Real> ProblemSpec<T> {
    pub fn m(&self) -> usize {
        self.boundary.len()
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn grid(&self) -> Result<UniformGrid<T>> {
        UniformGrid::new(self.dim, self.n)
    }

    /// Boundary data `φ^l` as grid functions, zero at interior nodes.
    pub fn boundary_fields(&self, grid: &UniformGrid<T>) -> Result<Vec<GridFunction<T>>> {
        let boundary: Vec<usize> = grid.boundary_nodes().collect();
        self.boundary
            .iter()
            .enumerate()
            .map(|(l, src)| {
                let mut field = GridFunction::zeros(*grid);
                let vals = field.values_mut();
                match src {
                    BoundarySource::Preset(p) => {
                        for &k in &boundary {
                            vals[k] = p.eval(grid.point(k));
                        }
                    }
                    BoundarySource::Function(f) => {
                        for &k in &boundary {
                            vals[k] = f(grid.point(k));
                        }
                    }
                    BoundarySource::NodeValues(v) => {
                        if v.len() != boundary.len() {
                            return Err(Error::ProblemDefinition(format!(
                                "phase {}: {} boundary values given, grid has {} boundary nodes",
                                l + 1,
                                v.len(),
                                boundary.len()
                            )));
                        }
                        for (&k, &value) in boundary.iter().zip(v) {
                            vals[k] = value;
                        }
                    }
                }
                Ok(field)
            })
            .collect()
    }

    /// Checks the problem and returns its grid and boundary fields.
    ///
    /// Boundary data must be finite, nonnegative and pairwise disjoint at
    /// every boundary node; the first offending node is named in the error.
    pub fn validate(&self) -> Result<(UniformGrid<T>, Vec<GridFunction<T>>)> {
        if self.m() < 2 {
            return Err(Error::ProblemDefinition(format!(
                "need at least two phases, got {}",
                self.m()
            )));
        }
        if self.dynamics.len() != self.m() {
            return Err(Error::ProblemDefinition(format!(
                "{} phases but {} dynamics",
                self.m(),
                self.dynamics.len()
            )));
        }
        let grid = self.grid()?;
        let fields = self.boundary_fields(&grid)?;
        for k in grid.boundary_nodes() {
            let conflict = |detail: String| {
                let p = grid.point(k);
                Error::BoundaryConflict {
                    node: grid.node_label(k),
                    coords: [p[0].as_f64(), p[1].as_f64()],
                    detail,
                }
            };
            let mut positive: Option<usize> = None;
            for (l, field) in fields.iter().enumerate() {
                let v = field.values()[k];
                if !v.is_finite() {
                    return Err(conflict(format!("phi_{} = {v} is not finite", l + 1)));
                }
                if v < T::zero() {
                    return Err(conflict(format!("phi_{} = {v} < 0", l + 1)));
                }
                if v > T::zero() {
                    if let Some(p) = positive {
                        return Err(conflict(format!(
                            "phi_{} and phi_{} are both positive",
                            p + 1,
                            l + 1
                        )));
                    }
                    positive = Some(l);
                }
            }
        }
        Ok((grid, fields))
    }

    /// Exact phase values at every node, when a closed form is known.
    pub fn exact_fields(&self, grid: &UniformGrid<T>) -> Option<Vec<GridFunction<T>>> {
        match self.exact.as_ref()? {
            ExactSolution::Preset(p) => Some(
                (0..self.m())
                    .map(|l| GridFunction::from_fn(*grid, |x| p.eval(l, x)))
                    .collect(),
            ),
            ExactSolution::Functions(fs) => Some(
                fs.iter()
                    .map(|f| GridFunction::from_fn(*grid, |x| f(x)))
                    .collect(),
            ),
        }
    }

    /// Config form of this problem. Function boundaries are sampled at the
    /// current resolution; custom dynamics and function exact solutions
    /// have no config form.
    pub fn to_config(&self) -> Result<ProblemConfig> {
        let grid = self.grid()?;
        let phases = self
            .boundary
            .iter()
            .zip(&self.dynamics)
            .map(|(b, d)| {
                let dynamics = d.to_config().ok_or_else(|| {
                    Error::Validation(format!("dynamics {} has no config form", d.label()))
                })?;
                let boundary = match b {
                    BoundarySource::Preset(p) => BoundaryConfig::Preset(*p),
                    BoundarySource::NodeValues(v) => {
                        BoundaryConfig::Values(v.iter().map(|x| x.as_f64()).collect())
                    }
                    BoundarySource::Function(f) => BoundaryConfig::Values(
                        grid.boundary_nodes()
                            .map(|k| f(grid.point(k)).as_f64())
                            .collect(),
                    ),
                };
                Ok(PhaseConfig { dynamics, boundary })
            })
            .collect::<Result<Vec<_>>>()?;
        let exact = match &self.exact {
            None => None,
            Some(ExactSolution::Preset(p)) => Some(*p),
            Some(ExactSolution::Functions(_)) => {
                return Err(Error::Validation(
                    "exact solution given by closures has no config form".into(),
                ))
            }
        };
        Ok(ProblemConfig {
            name: self.name.clone(),
            dim: self.dim,
            n: self.n,
            phases,
            exact,
        })
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Self> {
        let mut boundary = Vec::with_capacity(config.phases.len());
        let mut dynamics = Vec::with_capacity(config.phases.len());
        for phase in &config.phases {
            dynamics.push(DynamicsSpec::from_config(&phase.dynamics)?);
            boundary.push(match &phase.boundary {
                BoundaryConfig::Preset(p) => BoundarySource::Preset(*p),
                BoundaryConfig::Values(v) => {
                    BoundarySource::NodeValues(v.iter().map(|x| T::lit(*x)).collect())
                }
            });
        }
        Ok(Self {
            name: config.name.clone(),
            dim: config.dim,
            n: config.n,
            boundary,
            dynamics,
            exact: config.exact.map(ExactSolution::Preset),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Preset(BoundaryPreset),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub dynamics: DynamicsConfig,
    pub boundary: BoundaryConfig,
}

/// JSON problem file, e.g.
///
/// ```json
/// {"name": "toy", "dim": 1, "n": 4,
///  "phases": [
///    {"dynamics": {"kind": "constant", "coef": 1.0}, "boundary": {"values": [1.0, 0.0]}},
///    {"dynamics": {"kind": "zero"}, "boundary": {"values": [0.0, 2.0]}}
///  ]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub phases: Vec<PhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactPreset>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(values: [[f64; 2]; 2]) -> ProblemSpec<f64> {
        ProblemSpec {
            name: "toy".into(),
            dim: 1,
            n: 4,
            boundary: values
                .iter()
                .map(|v| BoundarySource::NodeValues(v.to_vec()))
                .collect(),
            dynamics: vec![DynamicsSpec::zero(), DynamicsSpec::zero()],
            exact: None,
        }
    }

    #[test]
    fn accepts_disjoint_boundary() {
        let (grid, fields) = toy([[1.0, 0.0], [0.0, 2.0]]).validate().unwrap();
        assert_eq!(grid.node_count(), 5);
        assert_eq!(fields[0].values(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(fields[1].values(), &[0.0, 0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn overlapping_boundary_names_the_node() {
        let err = toy([[1.0, 0.0], [1.0, 0.0]]).validate().unwrap_err();
        match err {
            Error::BoundaryConflict { node, coords, .. } => {
                assert_eq!(node, vec![0]);
                assert_eq!(coords, [-1.0, 0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_boundary_rejected() {
        assert!(matches!(
            toy([[0.0, -0.5], [0.0, 0.0]]).validate(),
            Err(Error::BoundaryConflict { .. })
        ));
    }

    #[test]
    fn shape_errors() {
        let mut p = toy([[1.0, 0.0], [0.0, 0.0]]);
        p.dynamics.pop();
        assert!(matches!(p.validate(), Err(Error::ProblemDefinition(_))));
        let p = toy([[1.0, 0.0], [0.0, 0.0]]).with_n(1);
        assert!(matches!(p.validate(), Err(Error::ProblemDefinition(_))));
        let mut p = toy([[1.0, 0.0], [0.0, 0.0]]);
        p.boundary[0] = BoundarySource::NodeValues(vec![1.0]);
        assert!(matches!(p.validate(), Err(Error::ProblemDefinition(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"name": "toy", "dim": 1, "n": 4,
            "phases": [
              {"dynamics": {"kind": "constant", "coef": 1.0}, "boundary": {"values": [1.0, 0.0]}},
              {"dynamics": {"kind": "zero"}, "boundary": {"preset": "zero"}}
            ]}"#;
        let cfg = ProblemConfig::from_json(text).unwrap();
        let spec = ProblemSpec::<f64>::from_config(&cfg).unwrap();
        assert_eq!(spec.m(), 2);
        assert_eq!(spec.to_config().unwrap(), cfg);
        let again = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn function_boundary_exports_as_samples() {
        let mut p = toy([[1.0, 0.0], [0.0, 0.0]]);
        p.boundary[1] = BoundarySource::Function(Arc::new(|x: Point<f64>| x[0].max(0.0)));
        let cfg = p.to_config().unwrap();
        assert_eq!(cfg.phases[1].boundary, BoundaryConfig::Values(vec![0.0, 1.0]));
    }
}
