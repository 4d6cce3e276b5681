//! The m-phase discrete problem: segregated states, the hat transform, the
//! discrete energy `J_h` and the residual of the fixed-point system
//!
//! ```text
//! w^l_α = max(−f_l(x_α, w^l_α)·h²/K + w̄^l_α − Σ_{p≠l} w̄^p_α, 0),  α interior
//! w^l_α = φ^l_α,                                                 α on the boundary
//! ```
//!
//! where `w̄` is the neighbor average and `K = 2·dim`.
//!
//! A [`MultiPhaseState`] stores each phase as a full grid function `w^l`
//! (interior unknowns with the boundary trace attached). The constraint-set
//! element `u^l` is its interior part and `φ^l` its boundary part, so
//! `w^l = u^l + φ^l`.

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPhaseState<T> {
    grid: UniformGrid<T>,
    phases: Vec<GridFunction<T>>,
    boundary: Vec<GridFunction<T>>,
}

/// The scheme's right-hand side before clamping: `−f·h²/K + avg_l − others`.
#[inline]
pub fn scheme_raw<T: Real>(f: T, h2_over_k: T, avg_own: T, avg_others: T) -> T {
    -f * h2_over_k + avg_own - avg_others
}

/// One application of the scheme at a node: `max(−f·h²/K + avg_l − others, 0)`.
#[inline]
pub fn scheme_update<T: Real>(f: T, h2_over_k: T, avg_own: T, avg_others: T) -> T {
    scheme_raw(f, h2_over_k, avg_own, avg_others).positive_part()
}

impl<T: Real> MultiPhaseState<T> {
    /// Builds a state from full phase fields and boundary data.
    ///
    /// Only shapes are checked here; the segregation invariants are
    /// reported by [`audit`].
    pub fn new(
        grid: UniformGrid<T>,
        phases: Vec<GridFunction<T>>,
        boundary: Vec<GridFunction<T>>,
    ) -> Result<Self> {
        if phases.is_empty() || phases.len() != boundary.len() {
            return Err(Error::Validation(format!(
                "{} phase fields for {} boundary fields",
                phases.len(),
                boundary.len()
            )));
        }
        if phases.iter().chain(&boundary).any(|f| *f.grid() != grid) {
            return Err(Error::Validation("phase field on a different grid".into()));
        }
        Ok(Self {
            grid,
            phases,
            boundary,
        })
    }

    /// Zero interior, boundary values attached.
    pub fn initial(grid: UniformGrid<T>, boundary: Vec<GridFunction<T>>) -> Result<Self> {
        let phases = boundary
            .iter()
            .map(|phi| {
                let mut w = phi.clone();
                for k in grid.interior_nodes() {
                    w.values_mut()[k] = T::zero();
                }
                w
            })
            .collect();
        Self::new(grid, phases, boundary)
    }

    pub fn m(&self) -> usize {
        self.phases.len()
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn phases(&self) -> &[GridFunction<T>] {
        &self.phases
    }

    pub fn phases_mut(&mut self) -> &mut [GridFunction<T>] {
        &mut self.phases
    }

    pub fn boundary(&self) -> &[GridFunction<T>] {
        &self.boundary
    }

    pub fn into_phases(self) -> Vec<GridFunction<T>> {
        self.phases
    }

    pub fn phase(&self, l: usize) -> Result<&GridFunction<T>> {
        self.phases.get(l).ok_or(Error::IndexOutOfRange {
            what: "phase",
            index: l,
            limit: self.m().saturating_sub(1),
        })
    }

    /// `w^l_α − Σ_{j≠l} w^j_α` at a multi-index.
    pub fn hat(&self, l: usize, alpha: &[usize]) -> Result<T> {
        self.phase(l)?;
        let flat = self.grid.flat_index(alpha)?;
        Ok(self.hat_at(l, flat))
    }

    pub fn hat_at(&self, l: usize, flat: usize) -> T {
        self.phases
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, w)| {
                let v = w.values()[flat];
                if j == l {
                    acc + v
                } else {
                    acc - v
                }
            })
    }

    /// The whole hat field `ŵ^l`.
    pub fn hat_field(&self, l: usize) -> GridFunction<T> {
        let values = (0..self.grid.node_count())
            .map(|k| self.hat_at(l, k))
            .collect();
        GridFunction::from_values(self.grid, values).expect("sized from grid")
    }

    /// `u^l`: the phase with its boundary values zeroed.
    pub fn interior_part(&self, l: usize) -> GridFunction<T> {
        let mut u = self.phases[l].clone();
        for k in self.grid.boundary_nodes() {
            u.values_mut()[k] = T::zero();
        }
        u
    }

    /// `Σ_l w^l`.
    pub fn sum_field(&self) -> GridFunction<T> {
        let mut acc = GridFunction::zeros(self.grid);
        for w in &self.phases {
            acc = acc.zip_with(w, |a, b| a + b);
        }
        acc
    }

    /// `w¹ − w²` for a two-phase state.
    pub fn signed_two_phase(&self) -> Result<GridFunction<T>> {
        if self.m() != 2 {
            return Err(Error::Validation(format!(
                "signed field needs two phases, state has {}",
                self.m()
            )));
        }
        Ok(self.phases[0].zip_with(&self.phases[1], |a, b| a - b))
    }

    /// Largest boundary value per phase, the stability bound of the iteration.
    pub fn boundary_max(&self) -> Vec<T> {
        self.boundary
            .iter()
            .map(|phi| {
                self.grid
                    .boundary_nodes()
                    .fold(T::zero(), |m, k| m.max(phi.values()[k]))
            })
            .collect()
    }
}

fn inner_interior<T: Real>(grid: &UniformGrid<T>, a: &[T], b: &[T]) -> T {
    grid.interior_nodes()
        .fold(T::zero(), |acc, k| acc + a[k] * b[k])
}

fn laplacian_field<T: Real>(grid: &UniformGrid<T>, v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    for k in grid.interior_nodes() {
        out[k] = grid.laplacian_at(v, k);
    }
    out
}

fn check_dynamics<T: Real>(state: &MultiPhaseState<T>, dynamics: &[DynamicsSpec<T>]) -> Result<()> {
    if dynamics.len() != state.m() {
        return Err(Error::Validation(format!(
            "{} dynamics for {} phases",
            dynamics.len(),
            state.m()
        )));
    }
    Ok(())
}

/// Discrete energy
/// `J_h = −½ Σ_l (L_h û^l, u^l) + Σ_l Σ_α F_l(x_α, u^l_α) − Σ_l (L_h φ̂^l, u^l)`,
/// with `(·,·)` summing over interior nodes, `u^l` the interior part of each
/// phase and `φ^l` the boundary data.
pub fn energy<T: Real>(state: &MultiPhaseState<T>, dynamics: &[DynamicsSpec<T>]) -> Result<T> {
    check_dynamics(state, dynamics)?;
    let grid = state.grid();
    let m = state.m();
    let u: Vec<GridFunction<T>> = (0..m).map(|l| state.interior_part(l)).collect();
    let hat = |fields: &[GridFunction<T>], l: usize| -> Vec<T> {
        (0..grid.node_count())
            .map(|k| {
                fields.iter().enumerate().fold(T::zero(), |acc, (j, f)| {
                    if j == l {
                        acc + f.values()[k]
                    } else {
                        acc - f.values()[k]
                    }
                })
            })
            .collect()
    };
    let mut quadratic = T::zero();
    let mut linear = T::zero();
    let mut reaction = T::zero();
    for l in 0..m {
        let ul = u[l].values();
        quadratic = quadratic + inner_interior(grid, &laplacian_field(grid, &hat(&u, l)), ul);
        linear = linear + inner_interior(grid, &laplacian_field(grid, &hat(state.boundary(), l)), ul);
        for (k, &v) in ul.iter().enumerate() {
            reaction = reaction + dynamics[l].primitive(grid.point(k), v);
        }
    }
    Ok(-quadratic / T::lit(2.0) + reaction - linear)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResidual {
    /// Max-norm residual per phase.
    pub per_phase: Vec<f64>,
    /// Interior node attaining `per_phase[l]`, as a multi-index.
    pub worst_node: Vec<Option<Vec<usize>>>,
}

impl SchemeResidual {
    pub fn max(&self) -> f64 {
        self.per_phase.iter().copied().fold(0.0, f64::max)
    }
}

/// Neighbor averages of every phase at an interior node.
#[inline]
pub(crate) fn phase_averages<T: Real>(
    grid: &UniformGrid<T>,
    phases: &[GridFunction<T>],
    flat: usize,
    out: &mut Vec<T>,
) {
    out.clear();
    out.extend(phases.iter().map(|w| grid.neighbor_average_at(w.values(), flat)));
}

/// Sum of `avgs` over every phase but `l`, accumulated in phase order.
#[inline]
pub(crate) fn others_sum<T: Real>(avgs: &[T], l: usize) -> T {
    avgs.iter()
        .enumerate()
        .fold(T::zero(), |acc, (p, &a)| if p == l { acc } else { acc + a })
}

/// Max-norm distance of `state` from the fixed-point system, with `f`
/// evaluated at the state's own values.
pub fn scheme_residual<T: Real>(
    state: &MultiPhaseState<T>,
    dynamics: &[DynamicsSpec<T>],
) -> Result<SchemeResidual> {
    check_dynamics(state, dynamics)?;
    let grid = state.grid();
    let m = state.m();
    let h2k = grid.h() * grid.h() / T::of_usize(grid.neighbor_count());
    let mut per_phase = vec![T::zero(); m];
    let mut worst = vec![None; m];
    let mut avgs = Vec::with_capacity(m);
    for k in grid.interior_nodes() {
        phase_averages(grid, state.phases(), k, &mut avgs);
        let x = grid.point(k);
        for l in 0..m {
            let w = state.phases()[l].values()[k];
            let f = dynamics[l].scheme_f(x, w);
            let r = (w - scheme_update(f, h2k, avgs[l], others_sum(&avgs, l))).abs();
            if r > per_phase[l] || (worst[l].is_none() && r.is_nan()) {
                per_phase[l] = r;
                worst[l] = Some(k);
            }
        }
    }
    Ok(SchemeResidual {
        per_phase: per_phase.iter().map(|r| r.as_f64()).collect(),
        worst_node: worst
            .into_iter()
            .map(|k| k.map(|k| grid.node_label(k)))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantKind {
    Negative,
    Segregation,
    BoundaryAttachment,
    BoundaryCompatibility,
    NonFinite,
    StabilityBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub kind: InvariantKind,
    pub node: Vec<usize>,
    pub phases: Vec<usize>,
    pub detail: String,
}

/// Reports every node breaking nonnegativity, segregation (exact
/// `min(w^p, w^q) = 0` at interior nodes), boundary attachment or boundary
/// compatibility.
pub fn audit<T: Real>(state: &MultiPhaseState<T>) -> Vec<InvariantViolation> {
    let grid = state.grid();
    let m = state.m();
    let mut out = Vec::new();
    for k in 0..grid.node_count() {
        let interior = grid.is_interior(k);
        let at = |kind, phases: Vec<usize>, detail: String| InvariantViolation {
            kind,
            node: grid.node_label(k),
            phases,
            detail,
        };
        for l in 0..m {
            let w = state.phases[l].values()[k];
            let phi = state.boundary[l].values()[k];
            if !w.is_finite() {
                out.push(at(InvariantKind::NonFinite, vec![l], format!("w = {w}")));
            } else if w < T::zero() {
                out.push(at(InvariantKind::Negative, vec![l], format!("w = {w}")));
            }
            if interior {
                if phi != T::zero() {
                    out.push(at(
                        InvariantKind::BoundaryCompatibility,
                        vec![l],
                        format!("boundary data {phi} at interior node"),
                    ));
                }
            } else {
                if w != phi {
                    out.push(at(
                        InvariantKind::BoundaryAttachment,
                        vec![l],
                        format!("w = {w} but phi = {phi}"),
                    ));
                }
                if phi < T::zero() {
                    out.push(at(
                        InvariantKind::BoundaryCompatibility,
                        vec![l],
                        format!("phi = {phi} < 0"),
                    ));
                }
            }
        }
        for p in 0..m {
            for q in p + 1..m {
                let (a, b) = if interior {
                    (state.phases[p].values()[k], state.phases[q].values()[k])
                } else {
                    (state.boundary[p].values()[k], state.boundary[q].values()[k])
                };
                if a.min(b) != T::zero() && a > T::zero() && b > T::zero() {
                    let kind = if interior {
                        InvariantKind::Segregation
                    } else {
                        InvariantKind::BoundaryCompatibility
                    };
                    out.push(at(kind, vec![p, q], format!("values {a} and {b} overlap")));
                }
            }
        }
    }
    out
}

/// Reports interior values outside `[0, max_∂ φ^l]`.
pub fn stability_audit<T: Real>(state: &MultiPhaseState<T>) -> Vec<InvariantViolation> {
    let grid = state.grid();
    let bounds = state.boundary_max();
    let mut out = Vec::new();
    for k in grid.interior_nodes() {
        for (l, bound) in bounds.iter().enumerate() {
            let w = state.phases[l].values()[k];
            if !(w >= T::zero() && w <= *bound) {
                out.push(InvariantViolation {
                    kind: InvariantKind::StabilityBound,
                    node: grid.node_label(k),
                    phases: vec![l],
                    detail: format!("w = {w} outside [0, {bound}]"),
                });
            }
        }
    }
    out
}
