//! Internal dynamics `f(x, s)` and their primitives `F(x, s) = ∫₀ˢ f(x, v) dv`.
//!
//! Dynamics are given on `s ≥ 0` and extended to `s < 0` oddly (`f`) and
//! evenly (`F`). The scheme only ever evaluates `f` at nonnegative arguments
//! and at `s = 0` uses the right limit `f(x, 0⁺)`: for an `s`-independent
//! reaction such as [`DynamicsSpec::constant`] this is the constant itself,
//! which is what makes the fixed point coincide with the energy minimizer.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Point, UniformGrid};
use crate::scalar::Real;

type ReactionFn<T> = Arc<dyn Fn(Point<T>, T) -> T + Send + Sync>;
type TraceFn<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub struct CustomDynamics<T> {
    pub name: String,
    pub f: ReactionFn<T>,
    pub primitive: ReactionFn<T>,
    /// `f(x, 0⁺)`; when absent `f(x, 0)` is used.
    pub right_limit: Option<TraceFn<T>>,
}

#[derive(Clone)]
pub enum DynamicsKind<T> {
    Zero,
    /// `f = c` on `s > 0`.
    Constant(T),
    /// `f = c·(x² + y²)·s` on `s ≥ 0`.
    WeightedAbs(T),
    /// `f = c·(x² + y²)·√s` on `s ≥ 0`.
    WeightedSqrt(T),
    Custom(CustomDynamics<T>),
}

#[derive(Clone)]
pub struct DynamicsSpec<T> {
    pub kind: DynamicsKind<T>,
    /// `f ≥ 0` for `s ≥ 0`.
    pub declared_nonneg: bool,
    /// `f` nondecreasing in `s`.
    pub declared_monotone: bool,
}

impl<T: Real> fmt::Debug for DynamicsSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicsSpec")
            .field("kind", &self.label())
            .field("declared_nonneg", &self.declared_nonneg)
            .field("declared_monotone", &self.declared_monotone)
            .finish()
    }
}

/// Catalog entry as it appears in problem config files,
/// e.g. `{"kind": "weighted_abs", "coef": 10.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsConfig {
    Zero,
    Constant { coef: f64 },
    WeightedAbs { coef: f64 },
    WeightedSqrt { coef: f64 },
}

#[inline]
fn weight<T: Real>(x: Point<T>) -> T {
    x[0] * x[0] + x[1] * x[1]
}

#[inline]
fn signum0<T: Real>(s: T) -> T {
    if s > T::zero() {
        T::one()
    } else if s < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> DynamicsSpec<T> {
    fn builtin_kind(kind: DynamicsKind<T>) -> Self {
        Self {
            kind,
            declared_nonneg: true,
            declared_monotone: true,
        }
    }

    fn checked_coef(name: &str, c: T) -> Result<T> {
        if !(c >= T::zero()) || !c.is_finite() {
            return Err(Error::Validation(format!(
                "{name} coefficient must be finite and nonnegative, got {c}"
            )));
        }
        Ok(c)
    }

    pub fn zero() -> Self {
        Self::builtin_kind(DynamicsKind::Zero)
    }

    pub fn constant(c: T) -> Result<Self> {
        Ok(Self::builtin_kind(DynamicsKind::Constant(
            Self::checked_coef("constant", c)?,
        )))
    }

    pub fn weighted_abs(c: T) -> Result<Self> {
        Ok(Self::builtin_kind(DynamicsKind::WeightedAbs(
            Self::checked_coef("weighted_abs", c)?,
        )))
    }

    pub fn weighted_sqrt(c: T) -> Result<Self> {
        Ok(Self::builtin_kind(DynamicsKind::WeightedSqrt(
            Self::checked_coef("weighted_sqrt", c)?,
        )))
    }

    /// Looks up a catalog entry by id (`zero`, `constant`, `weighted_abs`,
    /// `weighted_sqrt`).
    pub fn builtin(name: &str, coef: T) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "constant" => Self::constant(coef),
            "weighted_abs" => Self::weighted_abs(coef),
            "weighted_sqrt" => Self::weighted_sqrt(coef),
            other => Err(Error::Validation(format!("unknown dynamics id {other:?}"))),
        }
    }

    pub fn from_config(config: &DynamicsConfig) -> Result<Self> {
        match *config {
            DynamicsConfig::Zero => Ok(Self::zero()),
            DynamicsConfig::Constant { coef } => Self::constant(T::lit(coef)),
            DynamicsConfig::WeightedAbs { coef } => Self::weighted_abs(T::lit(coef)),
            DynamicsConfig::WeightedSqrt { coef } => Self::weighted_sqrt(T::lit(coef)),
        }
    }

    /// Catalog form, `None` for custom dynamics.
    pub fn to_config(&self) -> Option<DynamicsConfig> {
        Some(match &self.kind {
            DynamicsKind::Zero => DynamicsConfig::Zero,
            DynamicsKind::Constant(c) => DynamicsConfig::Constant { coef: c.as_f64() },
            DynamicsKind::WeightedAbs(c) => DynamicsConfig::WeightedAbs { coef: c.as_f64() },
            DynamicsKind::WeightedSqrt(c) => DynamicsConfig::WeightedSqrt { coef: c.as_f64() },
            DynamicsKind::Custom(_) => return None,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(Point<T>, T) -> T + Send + Sync + 'static,
        primitive: impl Fn(Point<T>, T) -> T + Send + Sync + 'static,
        declared_nonneg: bool,
        declared_monotone: bool,
    ) -> Self {
        Self {
            kind: DynamicsKind::Custom(CustomDynamics {
                name: name.into(),
                f: Arc::new(f),
                primitive: Arc::new(primitive),
                right_limit: None,
            }),
            declared_nonneg,
            declared_monotone,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DynamicsKind::Zero => "zero".into(),
            DynamicsKind::Constant(c) => format!("constant({c})"),
            DynamicsKind::WeightedAbs(c) => format!("weighted_abs({c})"),
            DynamicsKind::WeightedSqrt(c) => format!("weighted_sqrt({c})"),
            DynamicsKind::Custom(c) => c.name.clone(),
        }
    }

    /// `f(x, s)` with the odd extension to negative `s`.
    #[inline]
    pub fn f(&self, x: Point<T>, s: T) -> T {
        match &self.kind {
            DynamicsKind::Zero => T::zero(),
            DynamicsKind::Constant(c) => *c * signum0(s),
            DynamicsKind::WeightedAbs(c) => *c * weight(x) * s,
            DynamicsKind::WeightedSqrt(c) => *c * weight(x) * s.abs().sqrt() * signum0(s),
            DynamicsKind::Custom(d) => (d.f)(x, s),
        }
    }

    /// `F(x, s)`, even in `s`.
    pub fn primitive(&self, x: Point<T>, s: T) -> T {
        match &self.kind {
            DynamicsKind::Zero => T::zero(),
            DynamicsKind::Constant(c) => *c * s.abs(),
            DynamicsKind::WeightedAbs(c) => *c * weight(x) * s * s / T::lit(2.0),
            DynamicsKind::WeightedSqrt(c) => {
                let a = s.abs();
                *c * weight(x) * T::lit(2.0) / T::lit(3.0) * a * a.sqrt()
            }
            DynamicsKind::Custom(d) => (d.primitive)(x, s),
        }
    }

    /// `f(x, 0⁺)`.
    #[inline]
    pub fn right_limit_at_zero(&self, x: Point<T>) -> T {
        match &self.kind {
            DynamicsKind::Constant(c) => *c,
            DynamicsKind::Custom(d) => match &d.right_limit {
                Some(r) => r(x),
                None => (d.f)(x, T::zero()),
            },
            _ => T::zero(),
        }
    }

    /// The value the scheme uses: `f(x, s)` for `s ≠ 0`, `f(x, 0⁺)` at zero.
    #[inline]
    pub fn scheme_f(&self, x: Point<T>, s: T) -> T {
        if s == T::zero() {
            self.right_limit_at_zero(x)
        } else {
            self.f(x, s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonzeroAtOrigin,
    OddExtension,
    EvenPrimitive,
    Monotonicity,
    Negative,
    PrimitiveMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsViolation {
    pub kind: ViolationKind,
    pub x: [f64; 2],
    pub s: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dynamics: String,
    pub checked_points: usize,
    pub violations: Vec<DynamicsViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the standing assumptions on `spec` at every node of `grid` and
/// every sample in `s_samples`. Findings are collected, never raised.
pub fn validate<T: Real>(
    spec: &DynamicsSpec<T>,
    grid: &UniformGrid<T>,
    s_samples: &[T],
) -> ValidationReport {
    const QUAD_TOL: f64 = 1e-8;
    let mut sorted: Vec<T> = s_samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut report = ValidationReport {
        dynamics: spec.label(),
        checked_points: grid.node_count() * sorted.len(),
        violations: Vec::new(),
    };
    let mut push = |kind, x: Point<T>, s: T, detail: String| {
        report.violations.push(DynamicsViolation {
            kind,
            x: [x[0].as_f64(), x[1].as_f64()],
            s: s.as_f64(),
            detail,
        })
    };

    for node in 0..grid.node_count() {
        let x = grid.point(node);
        let f0 = spec.f(x, T::zero());
        if f0 != T::zero() {
            push(
                ViolationKind::NonzeroAtOrigin,
                x,
                T::zero(),
                format!("f(x,0)={f0}≠0"),
            );
        }
        for &s in &sorted {
            let (fp, fm) = (spec.f(x, s), spec.f(x, -s));
            if fm != -fp {
                push(
                    ViolationKind::OddExtension,
                    x,
                    s,
                    format!("f(x,-s)={fm} but -f(x,s)={}", -fp),
                );
            }
            let (pp, pm) = (spec.primitive(x, s), spec.primitive(x, -s));
            if pp != pm {
                push(
                    ViolationKind::EvenPrimitive,
                    x,
                    s,
                    format!("F(x,-s)={pm} but F(x,s)={pp}"),
                );
            }
            if spec.declared_nonneg && s >= T::zero() && fp < T::zero() {
                push(ViolationKind::Negative, x, s, format!("f(x,s)={fp}<0"));
            }
            let quad = integrate(|v| spec.f(x, T::lit(v)).as_f64(), 0.0, s.as_f64());
            if (quad - pp.as_f64()).abs() > QUAD_TOL {
                push(
                    ViolationKind::PrimitiveMismatch,
                    x,
                    s,
                    format!("F(x,s)={pp} but quadrature gives {quad:e}"),
                );
            }
        }
        if spec.declared_monotone {
            for pair in sorted.windows(2) {
                let (lo, hi) = (spec.f(x, pair[0]), spec.f(x, pair[1]));
                if lo > hi {
                    push(
                        ViolationKind::Monotonicity,
                        x,
                        pair[0],
                        format!("f(x,{})={lo} > f(x,{})={hi}", pair[0], pair[1]),
                    );
                }
            }
        }
    }
    report
}

/// Default sample set: `{-2, -1, -0.5, 0, 0.5, 1, 2}`.
pub fn default_s_samples<T: Real>() -> Vec<T> {
    [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
        .into_iter()
        .map(T::lit)
        .collect()
}

// Adaptive 5-point Gauss-Legendre. Nodes never touch the interval ends, so a
// jump of `f` at `s = 0` does not pollute the estimate.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683,
        -0.538_469_310_105_683,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        half * X.iter().zip(W).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
    }
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (l, r) = (panel(f, a, m), panel(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        recurse(f, a, m, l, tol / 2.0, depth - 1) + recurse(f, m, b, r, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    recurse(&f, a, b, panel(&f, a, b), 1e-12, 48)
}
