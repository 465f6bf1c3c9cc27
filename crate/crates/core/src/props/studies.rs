//! Refinement and spectral studies: the modulus inequality, the adjoint,
//! the compact-resolvent fingerprint, time-scheme orders and the reduction
//! of the divergence term.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::trials::bump_value;
use super::{PropsError, Problem};
use crate::assembly::{assemble_adjoint, assemble_diffusion, assemble_l, SparseOperator};
use crate::check::{CheckResult, Comparison};
use crate::coeffs::{reduce_c, CoefficientSet, PotentialField, SamplePoints, SamplingConfig};
use crate::evolve::{
    convergence_order, semigroup_law_check, ConvergenceStudy, ConvergenceVerdict, CrankNicolson, DenseExponential,
    ImplicitEuler, DENSE_LIMIT,
};
use crate::grid::{pairing, Grid, GridFunction};
use crate::linalg::least_squares_slope;

/// Modulus floor below which nodes are excluded from the modulus check.
pub const KATO_FLOOR: f64 = 1e-2;

/// Test fields for the modulus inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoField {
    /// `f = 1 + 0.5 cos x1` in a single component.
    Scalar,
    /// `f = r (cos theta, sin theta)` with `r = 1 + 0.5 cos x1` and
    /// `theta = x1 (+ 0.5 x2)`.
    Polar,
    /// `f = (1, -2)`.
    Constant,
}

impl KatoField {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Scalar => "scalar",
            Self::Polar => "polar",
            Self::Constant => "constant",
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Self::Scalar => 1,
            _ => 2,
        }
    }

    pub fn sample(&self, grid: Grid) -> GridFunction {
        let d = grid.dim();
        match self {
            Self::Scalar => GridFunction::from_fn(grid, 1, |x, o| o[0] = 1.0 + 0.5 * x[0].cos()),
            Self::Polar => GridFunction::from_fn(grid, 2, |x, o| {
                let r = 1.0 + 0.5 * x[0].cos();
                let theta = x[0] + if d == 2 { 0.5 * x[1] } else { 0.0 };
                o[0] = r * theta.cos();
                o[1] = r * theta.sin();
            }),
            Self::Constant => GridFunction::from_fn(grid, 2, |_, o| {
                o[0] = 1.0;
                o[1] = -2.0;
            }),
        }
    }
}

/// `(max violation, min margin, largest |lhs|)` of
/// `Delta_Q,h |f| >= (1/|f|) sum_j f_j Delta_Q,h f_j` over nodes with
/// `|f| >= KATO_FLOOR`; a violation is positive.
fn kato_defect(coeffs: &CoefficientSet, grid: Grid, field: KatoField) -> Result<(f64, f64, f64), PropsError> {
    let f = field.sample(grid);
    let m = f.components();
    let scalar = assemble_diffusion(&coeffs.q, &grid, 1);
    let modulus: Vec<f64> = (0..grid.node_count()).map(|n| f.modulus_at(n)).collect();
    let lhs = scalar.matvec(&modulus);
    let mut comps = Vec::with_capacity(m);
    for c in 0..m {
        let fc: Vec<f64> = (0..grid.node_count()).map(|n| f.at(n)[c]).collect();
        comps.push(scalar.matvec(&fc));
    }
    let mut violation = f64::NEG_INFINITY;
    let mut margin = f64::INFINITY;
    let mut scale: f64 = 0.0;
    for node in 0..grid.node_count() {
        let r = modulus[node];
        if r < KATO_FLOOR {
            continue;
        }
        let rhs: f64 = (0..m).map(|c| f.at(node)[c] * comps[c][node]).sum::<f64>() / r;
        violation = violation.max(rhs - lhs[node]);
        margin = margin.min(lhs[node] - rhs);
        scale = scale.max(lhs[node].abs());
    }
    Ok((violation, margin, scale))
}

/// Modulus inequality for the diffusion part, with `O(h^2)` slack calibrated
/// on the grid with half the nodes: `K = max(v(2h), 0) / (2h)^2`.
pub fn check_kato_inequality(p: &Problem, field: KatoField) -> Result<CheckResult, PropsError> {
    let grid = p.grid;
    let (v, margin, scale) = kato_defect(&p.coeffs, grid, field)?;
    let coarse = grid.with_nodes((grid.n(0) / 2).max(3))?;
    let (v2, _, _) = kato_defect(&p.coeffs, coarse, field)?;
    let h = grid.max_spacing();
    let h2 = coarse.max_spacing();
    let k = v2.max(0.0) / (h2 * h2);
    Ok(CheckResult::new(
        format!("kato_inequality_{}", field.name()),
        "modulus inequality: Delta_Q |f| >= (1/|f|) sum_j f_j Delta_Q f_j where |f| >= 1e-2",
        v,
        k * h * h,
        1e-12 * scale.max(1.0),
        Comparison::AtMost,
    )
    .with_trials(grid.node_count())
    .with_note(format!("K = {k:.3e}; smallest margin lhs - rhs = {margin:.6e}")))
}

/// Lowest real parts of the spectra of `-L_h` for a bounded and a confining
/// potential.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumStudy {
    pub bounded: Vec<f64>,
    pub confining: Vec<f64>,
    /// First 1-based index from which dominance is required.
    pub k0: usize,
    pub gap_slope: f64,
    pub checks: Vec<CheckResult>,
}

/// Eigenvalue count of the spectrum study.
pub const SPECTRUM_COUNT: usize = 20;
/// Dominance is required from this 1-based index on.
pub const DOMINANCE_FROM: usize = 5;

/// Sorted real parts of the spectrum of `-L_h`, at most `count` of them.
pub fn lowest_real_parts(op: &SparseOperator, count: usize) -> Result<Vec<f64>, PropsError> {
    let a = -op.to_dense();
    let mut re: Vec<f64> = crate::linalg::eigenvalues(&a)?.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    re.truncate(count);
    Ok(re)
}

/// Adds `|x|^2 I` to the potential.
pub fn confining_partner(coeffs: &CoefficientSet, strength: f64) -> CoefficientSet {
    let v = coeffs.v.clone();
    let m = coeffs.components();
    coeffs.with_potential(PotentialField::new(
        m,
        Arc::new(move |x: &[f64]| {
            let mu: f64 = strength * x.iter().map(|t| t * t).sum::<f64>();
            v.eval(x) + DMatrix::identity(m, m) * mu
        }),
    ))
}

/// Compares the lowest eigenvalues for `bounded` and `confining`, both on
/// grids with at most `DENSE_LIMIT / 4` unknowns.
pub fn spectrum_study(bounded: &Problem, confining: &Problem) -> Result<SpectrumStudy, PropsError> {
    let limit = super::checks::DENSE_EIGEN_LIMIT;
    let b = bounded.coarsened(limit)?;
    let c = confining.coarsened(limit)?;
    let lb = lowest_real_parts(&b.op, SPECTRUM_COUNT)?;
    let lc = lowest_real_parts(&c.op, SPECTRUM_COUNT)?;
    let count = lb.len().min(lc.len());
    let k0 = DOMINANCE_FROM;
    let mut dominance = f64::INFINITY;
    let mut scale: f64 = 1.0;
    for k in (k0 - 1)..count {
        dominance = dominance.min(lc[k] - lb[k]);
        scale = scale.max(lc[k].abs()).max(lb[k].abs());
    }
    let gaps: Vec<f64> = lc.windows(2).map(|w| w[1] - w[0]).collect();
    let idx: Vec<f64> = (0..gaps.len()).map(|k| k as f64).collect();
    let gap_slope = if gaps.len() >= 2 { least_squares_slope(&idx, &gaps) } else { f64::NAN };
    let mut checks = vec![CheckResult::new(
        "spectrum_dominance",
        "confining eigenvalues dominate the bounded ones from index 5",
        dominance,
        0.0,
        1e-9 * scale,
        Comparison::AtLeast,
    )
    .with_trials(count.saturating_sub(k0 - 1))];
    // Growing gaps is a one-dimensional signature. In two dimensions the low
    // levels of -Δ + |x|² come in multiplets with λ_k ~ √k, so the gaps of the
    // lowest 20 shrink on average even for the scalar oscillator.
    if confining.grid.dim() == 1 {
        checks.push(
            CheckResult::new(
                "spectrum_gap_trend",
                "confining eigenvalue gaps grow: least-squares slope > 0",
                gap_slope,
                0.0,
                0.0,
                Comparison::Exceeds,
            )
            .with_trials(gaps.len()),
        );
    } else {
        checks[0] = checks[0].clone().with_note("gap trend not checked in d > 1 (oscillator multiplets)");
    }
    if b.op.dim() != bounded.op.dim() || c.op.dim() != confining.op.dim() {
        let coarse = format!("dense eigensolve on a coarsened grid with {} unknowns", c.op.dim());
        for r in &mut checks {
            let note = match &r.note {
                Some(n) => format!("{n}; {coarse}"),
                None => coarse.clone(),
            };
            r.note = Some(note);
        }
    }
    Ok(SpectrumStudy {
        bounded: lb,
        confining: lc,
        k0,
        gap_slope,
        checks,
    })
}

/// Duality and transpose defects of the assembled adjoint under refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointStudy {
    pub ns: Vec<usize>,
    /// `|<L_h f, g> - <f, L*_h g>|` for fixed smooth `f`, `g`.
    pub duality_defects: Vec<f64>,
    /// `max |L*_h - L_h^T|` relative to `max |L_h|`.
    pub transpose_defects: Vec<f64>,
    /// Refinement order of the duality defect; `None` when it is at roundoff.
    pub order: Option<f64>,
    pub check: CheckResult,
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Defects at roundoff level count as exact.
const ADJOINT_EXACT_TOL: f64 = 1e-12;

fn adjoint_test_pair(grid: Grid, m: usize) -> (GridFunction, GridFunction) {
    let d = grid.dim();
    let c = grid.domain().center();
    let r = 0.8 * grid.domain().inradius();
    let f = GridFunction::from_fn(grid, m, |x, o| {
        let b = bump_value(&x[..d], &c[..d], r);
        for (k, s) in o.iter_mut().enumerate() {
            *s = b * (1.0 + 0.5 * k as f64 + 0.3 * x[0].sin());
        }
    });
    let g = GridFunction::from_fn(grid, m, |x, o| {
        let b = bump_value(&x[..d], &c[..d], r);
        for (k, s) in o.iter_mut().enumerate() {
            *s = b * ((k as f64 + 1.0) * x[0]).cos();
        }
    });
    (f, g)
}

/// Assembles `L_h` and `L*_h` for `coeffs` on uniform grids with the given
/// node counts and fits the order of the duality defect.
pub fn adjoint_study(coeffs: &CoefficientSet, ns: &[usize]) -> Result<AdjointStudy, PropsError> {
    let m = coeffs.components();
    let mut duality = Vec::new();
    let mut transpose = Vec::new();
    let mut hs = Vec::new();
    for &n in ns {
        let grid = Grid::uniform(coeffs.domain, n)?;
        let l = assemble_l(coeffs, &grid)?;
        let ls = assemble_adjoint(coeffs, &grid)?;
        let (f, g) = adjoint_test_pair(grid, m);
        let lf = l.apply(&f)?;
        let lsg = ls.apply(&g)?;
        duality.push((pairing(&lf, &g)? - pairing(&f, &lsg)?).abs());
        transpose.push(ls.max_abs_diff(&l.transpose()) / l.max_abs().max(f64::MIN_POSITIVE));
        hs.push(grid.max_spacing());
    }
    let exact = duality.iter().all(|&e| e <= ADJOINT_EXACT_TOL);
    let (order, check) = if exact {
        let worst = duality.iter().copied().fold(0.0, f64::max);
        (
            None,
            CheckResult::new(
                "adjoint_duality",
                "assembled adjoint is the transpose: <L_h f, g> = <f, L*_h g>",
                worst,
                0.0,
                ADJOINT_EXACT_TOL,
                Comparison::AtMost,
            )
            .with_trials(ns.len())
            .with_note("defect at roundoff on every grid"),
        )
    } else {
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = duality.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
        let p = least_squares_slope(&lx, &ly);
        (
            Some(p),
            CheckResult::new(
                "adjoint_duality_order",
                "duality defect of the assembled adjoint decays at second order: |order - 2|",
                (p - 2.0).abs(),
                0.3,
                0.0,
                Comparison::AtMost,
            )
            .with_trials(ns.len())
            .with_note(format!("order = {p:.4}, defects = {}", fmt_list(&duality))),
        )
    };
    Ok(AdjointStudy {
        ns: ns.to_vec(),
        duality_defects: duality,
        transpose_defects: transpose,
        order,
        check,
    })
}

/// Time-scheme orders against the dense exponential and the dense
/// semigroup law.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub studies: Vec<ConvergenceStudy>,
    pub checks: Vec<CheckResult>,
}

fn order_check(study: &ConvergenceStudy, expected: f64, width: f64) -> CheckResult {
    let name = format!("order_{}", study.scheme);
    let property = format!("{} converges at order {expected}: |order - {expected}|", study.scheme);
    match (study.verdict, study.order) {
        (ConvergenceVerdict::Measured, Some(p)) => CheckResult::new(name, property, (p - expected).abs(), width, 0.0, Comparison::AtMost)
            .with_trials(study.dts.len())
            .with_note(format!("order = {p:.4}, errors = {}", fmt_list(&study.errors))),
        _ => CheckResult::new(name, property, 0.0, width, 0.0, Comparison::AtMost)
            .with_note("errors at roundoff: the scheme is exact on this data"),
    }
}

/// Initial datum of the convergence study: a smooth bump per component.
pub fn smooth_datum(grid: Grid, m: usize) -> GridFunction {
    let d = grid.dim();
    let c = grid.domain().center();
    let r = 0.8 * grid.domain().inradius();
    GridFunction::from_fn(grid, m, |x, o| {
        let b = bump_value(&x[..d], &c[..d], r);
        for (k, s) in o.iter_mut().enumerate() {
            *s = b * (1.0 - 0.25 * k as f64);
        }
    })
}

/// Implicit Euler and Crank-Nicolson orders over `dt = T/8 .. T/64` and the
/// dense semigroup law at `t = 0.3`, `s = 0.7`, on a grid with at most
/// `DENSE_LIMIT / 4` unknowns.
pub fn convergence_study(p: &Problem, t_final: f64) -> Result<ConvergenceOutcome, PropsError> {
    let q = p.coarsened(DENSE_LIMIT / 4)?;
    let f0 = smooth_datum(q.grid, q.components());
    let ie = convergence_order(&f0, t_final, &q.op, &ImplicitEuler)?;
    let cn = convergence_order(&f0, t_final, &q.op, &CrankNicolson)?;
    let mut checks = vec![order_check(&ie, 1.0, 0.2), order_check(&cn, 2.0, 0.3)];
    checks.push(semigroup_law_check(&f0, 0.3, 0.7, &DenseExponential, 0.1, &q.op)?);
    if q.op.dim() != p.op.dim() {
        for c in &mut checks {
            let note = c.note.clone().map(|n| format!("{n}; ")).unwrap_or_default();
            c.note = Some(format!("{note}coarsened to {} unknowns", q.op.dim()));
        }
    }
    Ok(ConvergenceOutcome {
        studies: vec![ie, cn],
        checks,
    })
}

/// Two-route check of the divergence elimination: the operator assembled
/// from the reduced coefficients against `L_h - gamma I`.
pub fn check_reduction_identity(p: &Problem, sampling: &SamplingConfig) -> Result<CheckResult, PropsError> {
    let gamma = p.hypotheses.gamma;
    let samples = SamplePoints::new(&p.coeffs.domain, sampling);
    let reduced = reduce_c(&p.coeffs, gamma, &samples, sampling.xi_per_point, sampling.seed)?;
    let lt = assemble_l(&reduced, &p.grid)?;
    let shifted = p.op.shifted(-gamma);
    let scale = p.op.max_abs();
    Ok(CheckResult::new(
        "reduction_identity",
        "eliminating div(C f) shifts the operator by gamma: |L~_h - (L_h - gamma)|_max",
        lt.max_abs_diff(&shifted),
        0.0,
        1e-10 * scale,
        Comparison::AtMost,
    )
    .with_note(format!("gamma = {gamma:.6e}, |L_h|_max = {scale:.6e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::presets::PresetRegistry;
    use crate::coeffs::{DiffusionField, DriftField};
    use crate::grid::BoxDomain;

    fn sampling() -> SamplingConfig {
        SamplingConfig {
            quasi_points: 500,
            ..SamplingConfig::default()
        }
    }

    fn build(name: &str, dim: usize, a: f64) -> CoefficientSet {
        let dom = BoxDomain::cube(dim, -a, a).unwrap();
        PresetRegistry::standard().get(name).unwrap().build(&dom).unwrap()
    }

    fn problem(c: CoefficientSet, n: usize) -> Problem {
        let g = Grid::uniform(c.domain, n).unwrap();
        Problem::new(c, g, &sampling()).unwrap()
    }

    #[test]
    fn kato_scalar_is_equality_and_constant_is_zero() {
        let p = problem(build("identity", 1, 3.0), 41);
        let (v, margin, scale) = kato_defect(&p.coeffs, p.grid, KatoField::Scalar).unwrap();
        assert!(v.abs() <= 1e-15 * scale && margin.abs() <= 1e-15 * scale);
        let r = check_kato_inequality(&p, KatoField::Constant).unwrap();
        assert!(r.passed && r.measured.abs() <= 1e-12, "{}", r.measured);
    }

    #[test]
    fn kato_polar_margin_matches_gradient_of_phase() {
        // |f| = r and the margin is r |grad theta|^2_Q = r for Q = I, theta = x
        let p = problem(build("identity", 1, 3.0), 401);
        let (v, margin, _) = kato_defect(&p.coeffs, p.grid, KatoField::Polar).unwrap();
        assert!(v < 0.0);
        let r = check_kato_inequality(&p, KatoField::Polar).unwrap();
        assert!(r.passed);
        // the smallest r on [-3, 3] is 1 + 0.5 cos 3, away from the boundary layer
        let want = 1.0 + 0.5 * 3f64.cos();
        assert!(margin > 0.0 && margin <= want + 1e-2, "{margin} {want}");
        let p2 = problem(build("trig-2d", 2, 2.0), 20);
        assert!(check_kato_inequality(&p2, KatoField::Polar).unwrap().passed);
    }

    #[test]
    fn spectrum_dirichlet_and_oscillator() {
        let dom = BoxDomain::cube(1, -4.0, 4.0).unwrap();
        let bounded = problem(build("identity", 1, 4.0), 300);
        let confining = problem(confining_partner(&bounded.coeffs, 1.0), 300);
        let s = spectrum_study(&bounded, &confining).unwrap();
        assert!(s.checks.iter().all(|c| c.passed), "{:?}", s.checks);
        // Dirichlet Laplacian on a box of width 8: (k pi / 8)^2
        for (k, l) in s.bounded.iter().take(5).enumerate() {
            let want = ((k + 1) as f64 * std::f64::consts::PI / dom.width(0)).powi(2);
            assert!((l - want).abs() < 1e-2 * want, "{l} {want}");
        }
        // harmonic oscillator: 2k + 1 for the lowest levels
        for (k, l) in s.confining.iter().take(3).enumerate() {
            assert!((l - (2 * k + 1) as f64).abs() < 1e-2, "{l}");
        }
    }

    #[test]
    fn spectrum_identical_and_scaled() {
        let p = problem(build("identity", 1, 4.0), 200);
        let s = spectrum_study(&p, &p).unwrap();
        assert_eq!(s.bounded, s.confining);
        assert!(s.checks[0].passed && s.checks[0].measured == 0.0);
        let c1 = problem(confining_partner(&p.coeffs, 1.0), 200);
        let c4 = problem(confining_partner(&p.coeffs, 4.0), 200);
        assert!(lowest_real_parts(&c4.op, 1).unwrap()[0] > lowest_real_parts(&c1.op, 1).unwrap()[0]);
    }

    #[test]
    fn spectrum_two_dimensional_drops_gap_trend() {
        let p = problem(build("identity", 2, 4.0), 20);
        let c = problem(confining_partner(&p.coeffs, 1.0), 20);
        let s = spectrum_study(&p, &c).unwrap();
        assert_eq!(s.checks.len(), 1);
        assert!(s.checks[0].passed);
        // the first multiplet above the ground state is doubly degenerate
        assert!((s.confining[1] - s.confining[2]).abs() < 1e-9);
        assert!(s.gap_slope < 0.0);
    }

    #[test]
    fn adjoint_constant_is_exact_and_smooth_is_second_order() {
        let dom = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let c = CoefficientSet::new(
            DiffusionField::scaled_identity(1, 1.3),
            DriftField::constant(vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3])]),
            DriftField::constant(vec![DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.4, -0.2])]),
            PotentialField::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0])),
            dom,
        )
        .unwrap();
        let s = adjoint_study(&c, &[16, 32, 64]).unwrap();
        assert!(s.order.is_none() && s.check.passed, "{:?}", s.duality_defects);
        assert!(s.transpose_defects.iter().all(|&t| t <= 1e-15));
        let smooth = build("smooth-coupled", 1, 3.0);
        let s = adjoint_study(&smooth, &[16, 32, 64]).unwrap();
        assert!(s.check.passed, "{:?} {:?}", s.order, s.duality_defects);
        let sym = build("identity", 2, 2.0);
        let s = adjoint_study(&sym, &[8, 16]).unwrap();
        assert!(s.transpose_defects.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn convergence_on_identity() {
        let p = problem(build("identity", 1, 4.0), 64);
        let out = convergence_study(&p, 1.0).unwrap();
        assert!(out.checks.iter().all(|c| c.passed), "{:?}", out.checks);
    }

    #[test]
    fn reduction_identity_on_trig() {
        let p = problem(build("trig-2d", 2, 3.0), 12);
        let r = check_reduction_identity(&p, &sampling()).unwrap();
        assert!(r.passed, "{}", r.measured);
    }
}
