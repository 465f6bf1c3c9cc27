//! Time stepping for `u' = L_h u`: implicit Euler, Crank-Nicolson and a
//! dense matrix-exponential reference, selectable by name.

mod schemes;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use schemes::{CrankNicolson, DenseExponential, ImplicitEuler, SchemeRegistry};

use crate::assembly::SparseOperator;
use crate::check::{CheckResult, Comparison};
use crate::grid::{l2_norm, lp_norm, GridError, GridFunction, NormKind};
use crate::linalg::{expm, least_squares_slope, BandedLu, LinalgError};

/// Largest system handled by the dense exponential.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("singular system: {0}")]
    SingularSystem(LinalgError),
    #[error("dense exponential limited to {limit} unknowns, got {n}")]
    SizeExceeded { n: usize, limit: usize },
    #[error("times {t} and {s} are not integer multiples of dt = {dt}")]
    NonCommensurateTimes { t: f64, s: f64, dt: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown time scheme '{0}'")]
    UnknownScheme(String),
    #[error("shift {lambda} must exceed the accretivity shift {omega}")]
    ShiftTooSmall { lambda: f64, omega: f64 },
    #[error("resolvent residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl From<LinalgError> for EvolveError {
    fn from(e: LinalgError) -> Self {
        Self::SingularSystem(e)
    }
}

/// A one-step map `u_n -> u_{n+1}` for a fixed operator and step.
pub trait Propagator: Send + Sync {
    fn step(&self, u: &mut Vec<f64>) -> Result<(), EvolveError>;
}

/// A time-discretization strategy.
pub trait TimeScheme: Send + Sync {
    fn name(&self) -> &str;
    /// Nominal convergence order, `None` for exact propagators.
    fn order(&self) -> Option<f64>;
    fn prepare(&self, op: &SparseOperator, dt: f64) -> Result<Box<dyn Propagator>, EvolveError>;
    /// True if steps of this scheme are exact semigroup samples.
    fn is_exact(&self) -> bool {
        self.order().is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    /// Output times; each must be a multiple of `dt` in `[0, t_final]`.
    pub snapshot_times: Vec<f64>,
}

impl EvolutionConfig {
    pub fn new(scheme: &str, dt: f64, t_final: f64) -> Self {
        Self {
            scheme: scheme.to_string(),
            dt,
            t_final,
            snapshot_times: vec![t_final],
        }
    }

    pub fn with_snapshots(mut self, times: &[f64]) -> Self {
        self.snapshot_times = times.to_vec();
        self
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(EvolveError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(EvolveError::InvalidConfig(format!(
                "need dt <= T, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_final * (1.0 + 1e-12)).contains(&t) {
                return Err(EvolveError::InvalidConfig(format!("snapshot time {t} outside [0, T]")));
            }
        }
        Ok(())
    }
}

/// Integer step count for `t = n dt`, if `t` is commensurate with `dt`.
pub fn step_count(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    if n >= 0.0 && (n * dt - t).abs() <= 1e-9 * t.abs().max(dt) {
        Some(n as usize)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub scheme: String,
    pub dt: f64,
    pub snapshots: Vec<(f64, GridFunction)>,
    /// Norms at `t = 0, dt, 2 dt, ...`.
    pub l2_norms: Vec<f64>,
    pub linf_norms: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl EvolutionResult {
    /// Snapshot CSV: a `# t=..., scheme=..., dt=...` manifest line followed
    /// by the grid-function CSV.
    pub fn snapshot_csv(&self, index: usize) -> String {
        let (t, f) = &self.snapshots[index];
        format!("# t={t}, scheme={}, dt={}\n{}", self.scheme, self.dt, f.to_csv())
    }
}

/// Marches `f0` with the given scheme, recording norms at every step and
/// snapshots at the requested times.
pub fn evolve(
    f0: &GridFunction,
    config: &EvolutionConfig,
    op: &SparseOperator,
    scheme: &dyn TimeScheme,
) -> Result<EvolutionResult, EvolveError> {
    config.validate()?;
    check_dim(f0, op)?;
    let started = Instant::now();
    let total = step_count(config.t_final, config.dt).ok_or(EvolveError::NonCommensurateTimes {
        t: config.t_final,
        s: 0.0,
        dt: config.dt,
    })?;
    let mut wanted = Vec::with_capacity(config.snapshot_times.len());
    for &t in &config.snapshot_times {
        let n = step_count(t, config.dt).ok_or(EvolveError::NonCommensurateTimes {
            t,
            s: 0.0,
            dt: config.dt,
        })?;
        wanted.push((n, t));
    }
    let prop = scheme.prepare(op, config.dt)?;
    let mut u = f0.values().to_vec();
    let mut snapshots: Vec<(usize, f64, GridFunction)> = Vec::new();
    let mut l2 = vec![l2_norm(f0)];
    let mut linf = vec![lp_norm(f0, NormKind::Infinity)];
    let take = |n: usize, u: &[f64], snaps: &mut Vec<(usize, f64, GridFunction)>| -> Result<(), EvolveError> {
        for (k, &(w, t)) in wanted.iter().enumerate() {
            if w == n {
                snaps.push((k, t, f0.with_values(u.to_vec())?));
            }
        }
        Ok(())
    };
    take(0, &u, &mut snapshots)?;
    for n in 1..=total {
        prop.step(&mut u)?;
        let cur = f0.with_values(u.clone())?;
        l2.push(l2_norm(&cur));
        linf.push(lp_norm(&cur, NormKind::Infinity));
        take(n, &u, &mut snapshots)?;
    }
    snapshots.sort_by_key(|s| s.0);
    Ok(EvolutionResult {
        scheme: scheme.name().to_string(),
        dt: config.dt,
        snapshots: snapshots.into_iter().map(|(_, t, f)| (t, f)).collect(),
        l2_norms: l2,
        linf_norms: linf,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

fn check_dim(f: &GridFunction, op: &SparseOperator) -> Result<(), EvolveError> {
    if f.len() != op.dim() || f.components() != op.components() {
        return Err(EvolveError::Grid(GridError::GridMismatch));
    }
    Ok(())
}

/// Applies `n` steps of a prepared propagator.
pub fn propagate(prop: &dyn Propagator, f: &GridFunction, n: usize) -> Result<GridFunction, EvolveError> {
    let mut u = f.values().to_vec();
    for _ in 0..n {
        prop.step(&mut u)?;
    }
    Ok(f.with_values(u)?)
}

/// Solution of `(lambda - L_h) f = g`.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub f: GridFunction,
    /// `|(lambda - L_h) f - g|_2`.
    pub residual: f64,
    /// `|f|_2 <= |g|_2 / (lambda - omega)` up to `1e-9` relative slack.
    pub within_bound: bool,
}

pub fn resolvent_solve(
    lambda: f64,
    g: &GridFunction,
    op: &SparseOperator,
    omega: f64,
) -> Result<ResolventSolution, EvolveError> {
    if !(lambda > omega) {
        return Err(EvolveError::ShiftTooSmall { lambda, omega });
    }
    check_dim(g, op)?;
    let lu = BandedLu::factor_shifted(op, lambda, -1.0)?;
    let mut x = lu.solve(g.values())?;
    let gnorm = l2_norm(g);
    let tolerance = 1e-10 * gnorm;
    let residual_of = |x: &[f64]| -> Vec<f64> {
        let lx = op.matvec(x);
        (0..x.len()).map(|i| g.values()[i] - (lambda * x[i] - lx[i])).collect()
    };
    let mut r = residual_of(&x);
    let mut rnorm = l2_norm(&g.with_values(r.clone())?);
    if rnorm > tolerance {
        // one step of iterative refinement
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        r = residual_of(&x);
        rnorm = l2_norm(&g.with_values(r)?);
    }
    if rnorm > tolerance {
        return Err(EvolveError::Residual {
            residual: rnorm,
            tolerance,
        });
    }
    let f = g.with_values(x)?;
    let within_bound = l2_norm(&f) <= gnorm / (lambda - omega) * (1.0 + 1e-9);
    Ok(ResolventSolution {
        f,
        residual: rnorm,
        within_bound,
    })
}

/// Dense propagator `exp(t L_h)`.
pub fn dense_propagator(op: &SparseOperator, t: f64) -> Result<DMatrix<f64>, EvolveError> {
    let n = op.dim();
    if n > DENSE_LIMIT {
        return Err(EvolveError::SizeExceeded {
            n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(expm(&(op.to_dense() * t)))
}

/// `exp(t L_h) f0` via the dense exponential.
pub fn dense_exponential_oracle(f0: &GridFunction, t: f64, op: &SparseOperator) -> Result<GridFunction, EvolveError> {
    check_dim(f0, op)?;
    let p = dense_propagator(op, t)?;
    if t == 0.0 {
        return Ok(f0.clone());
    }
    let v = &p * DVector::from_column_slice(f0.values());
    Ok(f0.with_values(v.as_slice().to_vec())?)
}

/// Compares `S(t + s) f0` with `S(t) S(s) f0`.
pub fn semigroup_law_check(
    f0: &GridFunction,
    t: f64,
    s: f64,
    scheme: &dyn TimeScheme,
    dt: f64,
    op: &SparseOperator,
) -> Result<CheckResult, EvolveError> {
    check_dim(f0, op)?;
    let f0n = l2_norm(f0);
    let (err, tol) = if scheme.is_exact() {
        let whole = dense_exponential_oracle(f0, t + s, op)?;
        let inner = dense_exponential_oracle(f0, s, op)?;
        let composed = dense_exponential_oracle(&inner, t, op)?;
        (l2_norm(&whole.sub(&composed)?), 1e-10 * f0n)
    } else {
        let (nt, ns) = match (step_count(t, dt), step_count(s, dt)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(EvolveError::NonCommensurateTimes { t, s, dt }),
        };
        let prop = scheme.prepare(op, dt)?;
        let whole = propagate(prop.as_ref(), f0, nt + ns)?;
        let inner = propagate(prop.as_ref(), f0, ns)?;
        let composed = propagate(prop.as_ref(), &inner, nt)?;
        (l2_norm(&whole.sub(&composed)?), 1e-12 * f0n)
    };
    Ok(CheckResult::new(
        format!("semigroup_law_{}", scheme.name()),
        "semigroup law S(t+s) = S(t)S(s)",
        err,
        0.0,
        tol,
        Comparison::AtMost,
    )
    .with_note(format!("t = {t}, s = {s}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceVerdict {
    /// Errors at roundoff level; no order is defined.
    Exact,
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub scheme: String,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: Option<f64>,
    pub verdict: ConvergenceVerdict,
}

/// Errors at `dt = T/8, ..., T/64` against the dense exponential and their
/// log-log slope.
pub fn convergence_order(
    f0: &GridFunction,
    t_final: f64,
    op: &SparseOperator,
    scheme: &dyn TimeScheme,
) -> Result<ConvergenceStudy, EvolveError> {
    let reference = dense_exponential_oracle(f0, t_final, op)?;
    let mut dts = Vec::new();
    let mut errors = Vec::new();
    for k in [8usize, 16, 32, 64] {
        let dt = t_final / k as f64;
        let prop = scheme.prepare(op, dt)?;
        let u = propagate(prop.as_ref(), f0, k)?;
        dts.push(dt);
        errors.push(l2_norm(&u.sub(&reference)?));
    }
    let scale = l2_norm(f0).max(f64::MIN_POSITIVE);
    if errors.iter().all(|&e| e <= 1e-13 * scale) {
        return Ok(ConvergenceStudy {
            scheme: scheme.name().to_string(),
            dts,
            errors,
            order: None,
            verdict: ConvergenceVerdict::Exact,
        });
    }
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(ConvergenceStudy {
        scheme: scheme.name().to_string(),
        dts,
        errors,
        order: Some(least_squares_slope(&lx, &ly)),
        verdict: ConvergenceVerdict::Measured,
    })
}
