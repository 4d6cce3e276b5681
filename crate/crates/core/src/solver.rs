//! The fixed-point iteration: zero initialization, synchronous sweeps,
//! stopping control and invariant monitoring.
//!
//! Phases are kept node-major (`buf[k·m + l]`) during the iteration so a row
//! of the grid is one contiguous chunk; rows are updated in parallel. Every
//! new value depends on the old buffer only, so the result does not depend
//! on the number of threads.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use crate::segregation::{
    audit, energy, scheme_raw, scheme_residual, stability_audit, MultiPhaseState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// All new values from the previous iterate.
    #[default]
    Jacobi,
    /// In-place lexicographic update. The invariant guarantees are only
    /// established for the synchronous form.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iterations: usize,
    /// Stop once the scheme residual is at most this; 0 disables.
    pub residual_tol: f64,
    /// Audit every this many iterations; 0 disables.
    pub audit_every: usize,
    pub record_energy: bool,
    pub sweep: Sweep,
    /// Worker threads for the sweeps; 0 uses the global pool.
    pub threads: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            residual_tol: 0.0,
            audit_every: 0,
            record_energy: false,
            sweep: Sweep::Jacobi,
            threads: 0,
        }
    }
}

impl SolveConfig {
    pub fn with_iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Tolerance,
    /// A sweep left the state unchanged bit for bit.
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub iteration: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Sweeps performed.
    pub iterations: usize,
    pub stop: StopReason,
    pub final_residual: f64,
    /// `delta_trace[k]` is the max change made by sweep `k + 1`, which equals
    /// the scheme residual of iterate `k`.
    #[serde(skip)]
    pub delta_trace: Vec<f64>,
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
    pub audits: Vec<AuditRecord>,
    pub stability_ok: bool,
    /// Filled in by the two-phase driver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minmax_residual: Option<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Report as written to disk: traces thinned to at most `samples` entries
/// (first and last always kept), no timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    #[serde(flatten)]
    pub report: SolveReport,
    pub delta_trace: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub energy_trace: Vec<(usize, f64)>,
}

fn thin(trace: &[f64], samples: usize) -> Vec<(usize, f64)> {
    if trace.is_empty() {
        return Vec::new();
    }
    let stride = trace.len().div_ceil(samples.max(1)).max(1);
    let mut out: Vec<(usize, f64)> = trace
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, v)| (i, *v))
        .collect();
    let last = trace.len() - 1;
    if out.last().map(|p| p.0) != Some(last) {
        out.push((last, trace[last]));
    }
    out
}

impl SolveReport {
    pub fn sampled(&self, samples: usize) -> ReportJson {
        ReportJson {
            report: self.clone(),
            delta_trace: thin(&self.delta_trace, samples),
            energy_trace: thin(&self.energy_trace, samples),
        }
    }

    pub fn to_json(&self, samples: usize) -> String {
        serde_json::to_string_pretty(&self.sampled(samples)).expect("report serializes")
    }
}

/// Zero interior values, boundary data attached.
pub fn initialize<T: Real>(problem: &ProblemSpec<T>) -> Result<MultiPhaseState<T>> {
    let (grid, boundary) = problem.validate()?;
    MultiPhaseState::initial(grid, boundary)
}

/// Node-major copy of the phases.
fn interleave<T: Real>(state: &MultiPhaseState<T>) -> Vec<T> {
    let m = state.m();
    let mut buf = vec![T::zero(); state.grid().node_count() * m];
    for (l, w) in state.phases().iter().enumerate() {
        for (k, &v) in w.values().iter().enumerate() {
            buf[k * m + l] = v;
        }
    }
    buf
}

fn deinterleave<T: Real>(
    grid: UniformGrid<T>,
    m: usize,
    buf: &[T],
    boundary: Vec<GridFunction<T>>,
) -> MultiPhaseState<T> {
    let phases = (0..m)
        .map(|l| {
            let values = buf.iter().skip(l).step_by(m).copied().collect();
            GridFunction::from_values(grid, values).expect("sized from grid")
        })
        .collect();
    MultiPhaseState::new(grid, phases, boundary).expect("shapes match")
}

/// Outcome of one sweep: largest change, and the first node (flat index)
/// where an update went non-finite.
struct SweepOutcome {
    delta: f64,
    bad: Option<usize>,
}

struct Kernel<'a, T> {
    grid: UniformGrid<T>,
    m: usize,
    dynamics: &'a [DynamicsSpec<T>],
    h2k: T,
    k: T,
}

impl<'a, T: Real> Kernel<'a, T> {
    fn new(grid: UniformGrid<T>, dynamics: &'a [DynamicsSpec<T>]) -> Self {
        let k = T::of_usize(grid.neighbor_count());
        Self {
            grid,
            m: dynamics.len(),
            dynamics,
            h2k: grid.h() * grid.h() / k,
            k,
        }
    }

    /// Updates all phases at interior node `k`, reading `src` and writing
    /// `out[0..m]`. Returns the largest change and whether any raw update was
    /// non-finite.
    #[inline]
    fn node(&self, src: &[T], k: usize, out: &mut [T], avgs: &mut [T]) -> (T, bool) {
        let m = self.m;
        let stencil = self.grid.stencil(k);
        for (l, a) in avgs.iter_mut().enumerate() {
            let mut s = T::zero();
            for &nb in stencil.iter() {
                s = s + src[nb * m + l];
            }
            *a = s / self.k;
        }
        let x = self.grid.point(k);
        let mut delta = T::zero();
        let mut bad = false;
        for l in 0..m {
            let old = src[k * m + l];
            let others = avgs
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (p, &a)| if p == l { acc } else { acc + a });
            let f = self.dynamics[l].scheme_f(x, old);
            let raw = scheme_raw(f, self.h2k, avgs[l], others);
            if !raw.is_finite() {
                bad = true;
            }
            let new = raw.positive_part();
            delta = delta.max((new - old).abs());
            out[l] = new;
        }
        (delta, bad)
    }

    fn jacobi(&self, src: &[T], dst: &mut [T]) -> SweepOutcome {
        let m = self.m;
        let side = self.grid.side();
        let row = side * m;
        let interior_row = |k: usize| self.grid.is_interior(k);
        let results: Vec<(T, Option<usize>)> = dst
            .par_chunks_mut(row)
            .enumerate()
            .map(|(j, chunk)| {
                let mut avgs = vec![T::zero(); m];
                let mut delta = T::zero();
                let mut bad = None;
                for i in 0..side {
                    let k = j * side + i;
                    if !interior_row(k) {
                        continue;
                    }
                    let (d, b) = self.node(src, k, &mut chunk[i * m..(i + 1) * m], &mut avgs);
                    delta = delta.max(d);
                    if b && bad.is_none() {
                        bad = Some(k);
                    }
                }
                (delta, bad)
            })
            .collect();
        Self::combine(results)
    }

    fn gauss_seidel(&self, buf: &mut [T]) -> SweepOutcome {
        let m = self.m;
        let mut avgs = vec![T::zero(); m];
        let mut out = vec![T::zero(); m];
        let mut delta = T::zero();
        let mut bad = None;
        for k in self.grid.interior_nodes() {
            let (d, b) = self.node(buf, k, &mut out, &mut avgs);
            buf[k * m..(k + 1) * m].copy_from_slice(&out);
            delta = delta.max(d);
            if b && bad.is_none() {
                bad = Some(k);
            }
        }
        Self::combine(vec![(delta, bad)])
    }

    fn combine(parts: Vec<(T, Option<usize>)>) -> SweepOutcome {
        let mut delta = T::zero();
        let mut bad = None;
        for (d, b) in parts {
            delta = delta.max(d);
            bad = bad.or(b);
        }
        SweepOutcome {
            delta: delta.as_f64(),
            bad,
        }
    }
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

/// One synchronous sweep.
pub fn iterate_step<T: Real>(
    state: &MultiPhaseState<T>,
    dynamics: &[DynamicsSpec<T>],
) -> Result<MultiPhaseState<T>> {
    check_dynamics(state, dynamics)?;
    let grid = *state.grid();
    let kernel = Kernel::new(grid, dynamics);
    let src = interleave(state);
    let mut dst = src.clone();
    let outcome = kernel.jacobi(&src, &mut dst);
    if let Some(k) = outcome.bad {
        return Err(non_finite(&grid, 1, k));
    }
    Ok(deinterleave(grid, state.m(), &dst, state.boundary().to_vec()))
}

/// Max over phases and nodes of `|next − prev|`.
pub fn successive_delta<T: Real>(
    prev: &MultiPhaseState<T>,
    next: &MultiPhaseState<T>,
) -> Result<T> {
    if prev.m() != next.m() || prev.grid() != next.grid() {
        return Err(Error::Validation(format!(
            "states differ in shape: {} phases on N={} vs {} phases on N={}",
            prev.m(),
            prev.grid().n_per_side(),
            next.m(),
            next.grid().n_per_side()
        )));
    }
    prev.phases()
        .iter()
        .zip(next.phases())
        .try_fold(T::zero(), |acc, (a, b)| Ok(acc.max(a.max_abs_diff(b)?)))
}

fn non_finite<T: Real>(grid: &UniformGrid<T>, iteration: usize, k: usize) -> Error {
    Error::Numerical {
        iteration,
        detail: format!("non-finite update at node {:?}", grid.node_label(k)),
    }
}

/// Validates the problem and iterates from the zero initial state.
pub fn solve<T: Real>(
    problem: &ProblemSpec<T>,
    config: &SolveConfig,
) -> Result<(MultiPhaseState<T>, SolveReport)> {
    let state = initialize(problem)?;
    solve_from(state, &problem.dynamics, config)
}

/// Iterates from a given admissible state.
pub fn solve_from<T: Real>(
    start: MultiPhaseState<T>,
    dynamics: &[DynamicsSpec<T>],
    config: &SolveConfig,
) -> Result<(MultiPhaseState<T>, SolveReport)> {
    if config.max_iterations == 0 {
        return Err(Error::Validation("max_iterations must be at least 1".into()));
    }
    if !(config.residual_tol >= 0.0) {
        return Err(Error::Validation(format!(
            "residual_tol must be nonnegative, got {}",
            config.residual_tol
        )));
    }
    check_dynamics(&start, dynamics)?;
    if let Some(d) = dynamics.iter().find(|d| !d.declared_nonneg) {
        return Err(Error::Validation(format!(
            "dynamics {} is not declared nonnegative",
            d.label()
        )));
    }
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| run(start, dynamics, config))
    } else {
        run(start, dynamics, config)
    }
}

fn run<T: Real>(
    start: MultiPhaseState<T>,
    dynamics: &[DynamicsSpec<T>],
    config: &SolveConfig,
) -> Result<(MultiPhaseState<T>, SolveReport)> {
    let clock = Instant::now();
    let grid = *start.grid();
    let m = start.m();
    let boundary = start.boundary().to_vec();
    let kernel = Kernel::new(grid, dynamics);
    let mut cur = interleave(&start);
    let mut next = cur.clone();
    let mut delta_trace = Vec::with_capacity(config.max_iterations.min(1 << 20));
    let mut energy_trace = Vec::new();
    let mut audits = Vec::new();
    let mut stop = StopReason::Budget;
    let mut iterations = 0;

    for k in 1..=config.max_iterations {
        let outcome = match config.sweep {
            Sweep::Jacobi => kernel.jacobi(&cur, &mut next),
            Sweep::GaussSeidel => {
                next.copy_from_slice(&cur);
                kernel.gauss_seidel(&mut next)
            }
        };
        if let Some(node) = outcome.bad {
            return Err(non_finite(&grid, k, node));
        }
        iterations = k;
        delta_trace.push(outcome.delta);
        if outcome.delta == 0.0 {
            stop = StopReason::FixedPoint;
            break;
        }
        if config.residual_tol > 0.0
            && config.sweep == Sweep::Jacobi
            && outcome.delta <= config.residual_tol
        {
            // `cur` is the iterate whose residual was just measured
            stop = StopReason::Tolerance;
            break;
        }
        std::mem::swap(&mut cur, &mut next);

        let want_audit = config.audit_every > 0 && k % config.audit_every == 0;
        if want_audit || config.record_energy {
            let state = deinterleave(grid, m, &cur, boundary.clone());
            if config.record_energy {
                energy_trace.push(energy(&state, dynamics)?.as_f64());
            }
            if want_audit {
                let mut found = audit(&state);
                found.extend(stability_audit(&state));
                audits.push(AuditRecord {
                    iteration: k,
                    violations: found.len(),
                });
                if let Some(v) = found.first() {
                    return Err(Error::InternalConsistency {
                        iteration: k,
                        detail: format!(
                            "{:?} at node {:?}, phases {:?}: {}",
                            v.kind, v.node, v.phases, v.detail
                        ),
                    });
                }
            }
        }
    }
    if stop == StopReason::Budget && config.residual_tol > 0.0 && config.sweep == Sweep::GaussSeidel {
        // Gauss-Seidel deltas are not residuals; check the final state directly
        let state = deinterleave(grid, m, &cur, boundary.clone());
        if scheme_residual(&state, dynamics)?.max() <= config.residual_tol {
            stop = StopReason::Tolerance;
        }
    }

    let state = deinterleave(grid, m, &cur, boundary);
    let final_residual = scheme_residual(&state, dynamics)?.max();
    let stability_ok = stability_audit(&state).is_empty();
    Ok((
        state,
        SolveReport {
            iterations,
            stop,
            final_residual,
            delta_trace,
            energy_trace,
            audits,
            stability_ok,
            minmax_residual: None,
            wall_time: clock.elapsed(),
        },
    ))
}
