//! Accretivity, contractivity and sector checks on a discretized problem.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trials::{adversarial_battery, random_function};
use super::{PropsError, Problem};
use crate::check::{CheckResult, Comparison};
use crate::evolve::{resolvent_solve, ImplicitEuler, TimeScheme};
use crate::grid::{l2_norm, lp_norm, ouhabaz_projection, pairing, GridFunction, NormKind};
use crate::linalg::SymmetricBand;

/// Exponents of the `L^p` contractivity checks; `inf` is the last entry.
pub const LP_EXPONENTS: [f64; 4] = [2.0, 4.0, 8.0, f64::INFINITY];

/// Required distance of the sector half-angle from `pi/2`.
pub const SECTOR_MARGIN: f64 = 0.05;

/// Times at which the semigroup bounds are sampled.
pub const CHECK_TIMES: [f64; 3] = [0.1, 0.5, 1.0];

/// Unknown count above which the dense eigenvalue check runs on a coarser grid.
pub const DENSE_EIGEN_LIMIT: usize = 512;

/// Work estimate `N k^2` above which the lowest symmetric mode is skipped.
const LOWEST_MODE_BUDGET: f64 = 5e7;

fn lowest_symmetric_mode(p: &Problem) -> Result<Option<(f64, GridFunction)>, PropsError> {
    let sym = SymmetricBand::symmetric_part(&p.op.scaled(-1.0));
    let (kl, ku) = crate::linalg::bandwidths(&p.op);
    let k = kl.max(ku) as f64;
    if sym.dim() as f64 * k * k > LOWEST_MODE_BUDGET {
        return Ok(None);
    }
    let (lambda, v) = sym.lowest_eigenpair()?;
    let f = GridFunction::from_values(p.grid, p.components(), v)?;
    Ok(Some((lambda, f)))
}

/// `min (Re a_h(f) + omega |f|^2) / |f|^2` over random trials, the adversarial
/// battery and the lowest mode of the symmetric part of `-L_h`.
pub fn check_accretivity(p: &Problem, omega: f64, n_trials: usize, seed: u64) -> Result<CheckResult, PropsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let mut worst = f64::INFINITY;
    let mut witness: Option<(String, GridFunction)> = None;
    let mut count = 0;
    let mut visit = |label: String, f: GridFunction| -> Result<(), PropsError> {
        let n2 = l2_norm(&f).powi(2);
        if n2 == 0.0 {
            return Ok(());
        }
        count += 1;
        let value = (p.form.quadratic(&f)?.a + omega * n2) / n2;
        if value < worst {
            worst = value;
            witness = Some((label, f));
        }
        Ok(())
    };
    for k in 0..n_trials {
        visit(format!("random trial {k}"), random_function(p.grid, m, &mut rng))?;
    }
    for (name, f) in adversarial_battery(p.grid, m) {
        visit(name, f)?;
    }
    let mut note = String::from("value normalized by |f|^2");
    if let Some((lambda, f)) = lowest_symmetric_mode(p)? {
        note = format!("{note}; lowest eigenvalue of the symmetric part of -L_h is {lambda:.6e}");
        visit("lowest symmetric mode".to_string(), f)?;
    } else {
        note.push_str("; lowest symmetric mode skipped (band too wide)");
    }
    let mut r = CheckResult::new(
        "accretivity",
        "shifted form is accretive: Re a_h(f) + omega |f|^2 >= 0",
        worst,
        0.0,
        1e-10,
        Comparison::AtLeast,
    )
    .with_trials(count)
    .with_note(format!("omega = {omega:.6e}; {note}"));
    if !r.passed {
        if let Some((label, f)) = witness {
            r = r.with_witness(format!("{label}: normalized value {worst:.6e}"), Some(f));
        }
    }
    Ok(r)
}

/// Runs implicit Euler to each of `CHECK_TIMES` and returns the snapshots.
fn trajectory(prop: &dyn crate::evolve::Propagator, f0: &GridFunction, dt: f64) -> Result<Vec<(f64, GridFunction)>, PropsError> {
    let mut out = Vec::new();
    let mut u = f0.values().to_vec();
    let mut done = 0;
    for t in CHECK_TIMES {
        let target = (t / dt).round() as usize;
        while done < target {
            prop.step(&mut u)?;
            done += 1;
        }
        out.push((done as f64 * dt, f0.with_values(u.clone())?));
    }
    Ok(out)
}

fn check_times_commensurate(dt: f64) -> Result<(), PropsError> {
    for t in CHECK_TIMES {
        if crate::evolve::step_count(t, dt).is_none() {
            return Err(PropsError::Precondition(format!("dt = {dt} does not divide t = {t}")));
        }
    }
    Ok(())
}

/// `max |S_h(t) f0|_2 / (e^{omega t} |f0|_2)` for implicit Euler.
pub fn check_l2_quasicontractivity(
    p: &Problem,
    omega: f64,
    trials: usize,
    dt: f64,
    seed: u64,
) -> Result<CheckResult, PropsError> {
    check_times_commensurate(dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prop = ImplicitEuler.prepare(&p.op, dt)?;
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for k in 0..trials {
        let f0 = random_function(p.grid, p.components(), &mut rng);
        let n0 = l2_norm(&f0);
        for (t, u) in trajectory(prop.as_ref(), &f0, dt)? {
            let ratio = l2_norm(&u) / ((omega * t).exp() * n0);
            if ratio > worst {
                worst = ratio;
                witness = Some((format!("random trial {k} at t = {t}"), f0.clone()));
            }
        }
    }
    let mut r = CheckResult::new(
        "l2_quasicontractivity",
        "|S_h(t) f0|_2 <= e^{omega t} |f0|_2 under implicit Euler",
        worst,
        1.0,
        1e-8,
        Comparison::AtMost,
    )
    .with_trials(trials)
    .with_note(format!("omega = {omega:.6e}, dt = {dt}, t in {{0.1, 0.5, 1}}"));
    if !r.passed {
        if let Some((label, f)) = witness {
            r = r.with_witness(label, Some(f));
        }
    }
    Ok(r)
}

/// `Re a_h(f, f - P f) + omega_tilde <f, f - P f>`, the shifted form on the
/// pair `(f, f - P f)` with `P` the projection onto the pointwise unit ball.
pub fn ouhabaz_functional(p: &Problem, f: &GridFunction, omega_tilde: f64) -> Result<f64, PropsError> {
    let g = f.sub(&ouhabaz_projection(f))?;
    Ok(p.form.form_value(f, &g)?.a + omega_tilde * pairing(f, &g)?)
}

/// Minimum of the unit-ball invariance functional, normalized by `1 + |f|^2`.
pub fn check_ouhabaz_linf_functional(
    p: &Problem,
    omega_tilde: f64,
    trials: usize,
    seed: u64,
) -> Result<CheckResult, PropsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let scales = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut count = 0;
    let mut visit = |label: String, f: GridFunction| -> Result<(), PropsError> {
        count += 1;
        let value = ouhabaz_functional(p, &f, omega_tilde)? / (1.0 + l2_norm(&f).powi(2));
        if value < worst {
            worst = value;
            witness = Some((label, f));
        }
        Ok(())
    };
    for k in 0..trials {
        let s = scales[k % scales.len()];
        visit(format!("random trial {k} scaled by {s}"), random_function(p.grid, m, &mut rng).scaled(s))?;
    }
    for (name, f) in adversarial_battery(p.grid, m) {
        for s in [0.5, 2.0, 10.0] {
            visit(format!("{name} scaled by {s}"), f.scaled(s))?;
        }
    }
    let mut r = CheckResult::new(
        "ouhabaz_linf_functional",
        "unit ball invariance criterion: Re a_h(f, f - Pf) + omega_tilde <f, f - Pf> >= 0",
        worst,
        0.0,
        1e-9,
        Comparison::AtLeast,
    )
    .with_trials(count)
    .with_note(format!("omega_tilde = {omega_tilde:.6e}; value normalized by 1 + |f|^2"));
    if !r.passed {
        if let Some((label, f)) = witness {
            r = r.with_witness(format!("{label}: normalized value {worst:.6e}"), Some(f));
        }
    }
    Ok(r)
}

fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// `max |e^{-omega_tilde t} S_h(t) f0|_p / |f0|_p` for each of `LP_EXPONENTS`.
/// Requires the monotone step restriction.
pub fn check_linf_quasicontractivity(
    p: &Problem,
    omega_tilde: f64,
    trials: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<CheckResult>, PropsError> {
    p.require_monotone_step()?;
    check_times_commensurate(dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let prop = ImplicitEuler.prepare(&p.op, dt)?;
    let kinds: Vec<NormKind> = LP_EXPONENTS
        .iter()
        .map(|&e| if e.is_infinite() { NormKind::Infinity } else { NormKind::Finite(e) })
        .collect();
    let mut worst = vec![0.0f64; kinds.len()];
    let mut labels = vec![String::new(); kinds.len()];
    let mut inputs: Vec<(String, GridFunction)> = (0..trials)
        .map(|k| (format!("random trial {k}"), random_function(p.grid, m, &mut rng)))
        .collect();
    inputs.extend(adversarial_battery(p.grid, m));
    for (label, f0) in &inputs {
        let norms0: Vec<f64> = kinds.iter().map(|&k| lp_norm(f0, k)).collect();
        for (t, u) in trajectory(prop.as_ref(), f0, dt)? {
            let damp = (-omega_tilde * t).exp();
            for (i, &k) in kinds.iter().enumerate() {
                let ratio = damp * lp_norm(&u, k) / norms0[i];
                if ratio > worst[i] {
                    worst[i] = ratio;
                    labels[i] = format!("{label} at t = {t}");
                }
            }
        }
    }
    let mut out = Vec::new();
    for (i, &e) in LP_EXPONENTS.iter().enumerate() {
        let name = format!("lp_quasicontractivity_p{}", exponent_label(e));
        let mut r = CheckResult::new(
            name,
            format!(
                "|e^(-omega_tilde t) S_h(t) f0|_{} <= |f0|_{} under implicit Euler",
                exponent_label(e),
                exponent_label(e)
            ),
            worst[i],
            1.0,
            1e-6,
            Comparison::AtMost,
        )
        .with_trials(inputs.len())
        .with_note(format!("omega_tilde = {omega_tilde:.6e}, dt = {dt}"));
        if !r.passed {
            r = r.with_witness(labels[i].clone(), None);
        }
        out.push(r);
    }
    Ok(out)
}

/// `|Im a_h(u)| / (Re a_h(u) + omega |u|^2)` for complex `u = re + i im`;
/// infinite when the denominator is not positive.
pub fn sector_ratio(p: &Problem, re: &GridFunction, im: &GridFunction, omega: f64) -> Result<f64, PropsError> {
    let (a_re, a_im) = p.form.complex_quadratic(re, im)?;
    let n2 = l2_norm(re).powi(2) + l2_norm(im).powi(2);
    let den = a_re + omega * n2;
    if a_im == 0.0 {
        return Ok(if den >= 0.0 { 0.0 } else { f64::INFINITY });
    }
    if den <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(a_im.abs() / den)
}

/// Numerical-range sector: `tan theta_h <= cot(SECTOR_MARGIN)`, and the
/// eigenvalues of `L_h` (on a grid with at most `DENSE_EIGEN_LIMIT` unknowns)
/// satisfy `Re lambda <= omega`.
pub fn check_sector(p: &Problem, omega: f64, n_trials: usize, seed: u64) -> Result<Vec<CheckResult>, PropsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let mut worst: f64 = 0.0;
    let mut witness = None;
    let mut count = 0;
    for k in 0..n_trials {
        let re = random_function(p.grid, m, &mut rng);
        let im = random_function(p.grid, m, &mut rng);
        let t = sector_ratio(p, &re, &im, omega)?;
        count += 1;
        if t > worst {
            worst = t;
            witness = Some((format!("random trial {k}"), re));
        }
    }
    let battery = adversarial_battery(p.grid, m);
    for w in battery.windows(2) {
        let t = sector_ratio(p, &w[0].1, &w[1].1, omega)?;
        count += 1;
        if t > worst {
            worst = t;
            witness = Some((format!("{} + i {}", w[0].0, w[1].0), w[0].1.clone()));
        }
    }
    let bound = (std::f64::consts::FRAC_PI_2 - SECTOR_MARGIN).tan();
    let mut sector = CheckResult::new(
        "sector_tan_theta",
        "numerical range of the shifted form lies in a sector: tan theta_h <= cot(0.05)",
        worst,
        bound,
        0.0,
        Comparison::AtMost,
    )
    .with_trials(count)
    .with_note(format!("theta_h = {:.6e} rad", worst.atan()));
    if !sector.passed {
        if let Some((label, f)) = witness {
            sector = sector.with_witness(label, Some(f));
        }
    }

    let coarse = p.coarsened(DENSE_EIGEN_LIMIT)?;
    let dense: DMatrix<f64> = coarse.op.to_dense();
    let max_re = crate::linalg::eigenvalues(&dense)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut spectral = CheckResult::new(
        "spectral_bound",
        "eigenvalues of L_h satisfy Re lambda <= omega",
        max_re,
        omega,
        1e-8,
        Comparison::AtMost,
    )
    .with_trials(coarse.op.dim());
    if coarse.op.dim() != p.op.dim() {
        spectral = spectral.with_note(format!(
            "evaluated on a coarsened grid with {} unknowns",
            coarse.op.dim()
        ));
    }
    Ok(vec![sector, spectral])
}

/// `max |a_h(f, g)| / (|f|_a |g|_a)` over random and battery pairs, against
/// the continuity constant assembled from the discrete ellipticity floor.
pub fn check_form_continuity(p: &Problem, n_pairs: usize, seed: u64) -> Result<CheckResult, PropsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let h = &p.hypotheses;
    let edges = crate::assembly::DiffusionEdges::new(&p.coeffs.q, &p.grid);
    let d = p.grid.dim();
    let mut div_c_sup: f64 = 0.0;
    for node in 0..p.grid.node_count() {
        let x = p.grid.coord(node);
        div_c_sup = div_c_sup.max(p.coeffs.c.div_eval(&x[..d]).norm());
    }
    let drift = m as f64 * (h.norm_f + h.norm_c);
    let bound = if edges.axis_floor > 0.0 {
        1.0 + (1.0 + h.sectoriality) * (1.0 + 1e-6)
            + if drift > 0.0 { drift / edges.axis_floor.sqrt() } else { 0.0 }
            + div_c_sup
    } else {
        f64::INFINITY
    };
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut visit = |f: &GridFunction, g: &GridFunction| -> Result<(), PropsError> {
        let nf = p.form.form_norm_sq(f)?;
        let ng = p.form.form_norm_sq(g)?;
        if nf <= 0.0 || ng <= 0.0 {
            return Ok(());
        }
        count += 1;
        worst = worst.max(p.form.form_value(f, g)?.a.abs() / (nf * ng).sqrt());
        Ok(())
    };
    for _ in 0..n_pairs {
        let f = random_function(p.grid, m, &mut rng);
        let g = random_function(p.grid, m, &mut rng);
        visit(&f, &g)?;
    }
    let battery = adversarial_battery(p.grid, m);
    for (_, f) in &battery {
        for (_, g) in &battery {
            visit(f, g)?;
        }
    }
    Ok(CheckResult::new(
        "form_continuity",
        "|a_h(f, g)| <= c |f|_a |g|_a",
        worst,
        bound,
        1e-12,
        Comparison::AtMost,
    )
    .with_trials(count)
    .with_note(format!("discrete ellipticity floor {:.6e}", edges.axis_floor)))
}

/// `max (lambda - omega) |R(lambda) g|_2 / |g|_2` at `lambda = omega + 1`.
pub fn check_resolvent_bound(p: &Problem, omega: f64, trials: usize, seed: u64) -> Result<CheckResult, PropsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = omega + 1.0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let g = random_function(p.grid, p.components(), &mut rng);
        let sol = resolvent_solve(lambda, &g, &p.op, omega)?;
        worst = worst.max((lambda - omega) * l2_norm(&sol.f) / l2_norm(&g));
    }
    Ok(CheckResult::new(
        "resolvent_bound",
        "|(lambda - L_h)^-1| <= 1 / (lambda - omega)",
        worst,
        1.0,
        1e-9,
        Comparison::AtMost,
    )
    .with_trials(trials)
    .with_note(format!("lambda = omega + 1 = {lambda:.6e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::presets::PresetRegistry;
    use crate::coeffs::{CoefficientSet, DriftField, PotentialField, SamplingConfig};
    use crate::coeffs::{DiffusionField, HypothesisReport};
    use crate::grid::{BoxDomain, Grid};

    fn sampling() -> SamplingConfig {
        SamplingConfig {
            quasi_points: 500,
            ..SamplingConfig::default()
        }
    }

    fn preset(name: &str, dim: usize, a: f64, n: usize) -> Problem {
        let reg = PresetRegistry::standard();
        let dom = BoxDomain::cube(dim, -a, a).unwrap();
        let c = reg.get(name).unwrap().build(&dom).unwrap();
        Problem::new(c, Grid::uniform(dom, n).unwrap(), &sampling()).unwrap()
    }

    /// `m = 2` drift-only coefficients with `F^(1) = s I`, `Q = I`.
    fn drift_only(s: f64, n: usize) -> Problem {
        let dom = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let c = CoefficientSet::new(
            DiffusionField::scaled_identity(1, 1.0),
            DriftField::constant(vec![DMatrix::identity(2, 2) * s]),
            DriftField::zero(1, 2),
            PotentialField::zero(2),
            dom,
        )
        .unwrap();
        Problem::new(c, Grid::uniform(dom, n).unwrap(), &sampling()).unwrap()
    }

    #[test]
    fn accretivity_symmetric_case_is_sum_of_squares() {
        let p = preset("coupling-negative", 1, 3.0, 40);
        let dom = *p.grid.domain();
        let c = CoefficientSet::potential_only(
            PotentialField::constant(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])),
            dom,
        );
        let p = Problem::new(c, p.grid, &sampling()).unwrap();
        let r = check_accretivity(&p, 0.0, 50, 1).unwrap();
        assert!(r.passed && r.measured >= 0.0);
    }

    #[test]
    fn accretivity_drift_only_with_young_shift() {
        let p = drift_only(1.0, 60);
        assert!((p.hypotheses.norm_f - 1.0).abs() < 1e-12);
        let omega = p.hypotheses.omega;
        // m (|F| + |C|)^2 / (4 eta1 / 2) = 2 / 2
        assert!((omega - 1.0).abs() < 1e-12);
        let r = check_accretivity(&p, omega, 200, 2).unwrap();
        assert!(r.passed, "{}", r.measured);
    }

    #[test]
    fn accretivity_without_shift_fails_under_strong_drift() {
        // an antisymmetric F^(1) times the antisymmetric central difference
        // is symmetric, so the drift lowers the symmetric part of -L_h
        let dom = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 10.0, -10.0, 0.0]);
        let c = CoefficientSet::new(
            DiffusionField::scaled_identity(1, 1.0),
            DriftField::constant(vec![f]),
            DriftField::zero(1, 2),
            PotentialField::zero(2),
            dom,
        )
        .unwrap();
        let p = Problem::new(c, Grid::uniform(dom, 60).unwrap(), &sampling()).unwrap();
        let r = check_accretivity(&p, 0.0, 100, 3).unwrap();
        assert!(!r.passed);
        assert!(r.measured < 0.0);
        assert!(r.witness.is_some());
        let shifted = check_accretivity(&p, p.hypotheses.omega, 100, 3).unwrap();
        assert!(shifted.passed);
    }

    #[test]
    fn l2_potential_decay_and_zero_data() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let c = CoefficientSet::potential_only(
            PotentialField::constant(DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0])),
            dom,
        );
        let p = Problem::new(c, Grid::uniform(dom, 20).unwrap(), &sampling()).unwrap();
        let r = check_l2_quasicontractivity(&p, 0.0, 5, 0.01, 1).unwrap();
        assert!(r.passed && r.measured < 1.0);
        let zero = GridFunction::zeros(p.grid, 2);
        assert_eq!(l2_norm(&zero), 0.0);
        let prop = ImplicitEuler.prepare(&p.op, 0.01).unwrap();
        for (_, u) in trajectory(prop.as_ref(), &zero, 0.01).unwrap() {
            assert_eq!(l2_norm(&u), 0.0);
        }
    }

    #[test]
    fn l2_on_trig() {
        let p = preset("trig-2d", 2, 3.0, 12);
        let r = check_l2_quasicontractivity(&p, p.hypotheses.omega, 5, 0.05, 4).unwrap();
        assert!(r.passed, "{}", r.measured);
    }

    #[test]
    fn ouhabaz_fixed_point_and_bump() {
        let p = preset("trig-2d", 2, 3.0, 14);
        let small = GridFunction::from_fn(p.grid, 2, |x, o| {
            o[0] = 0.5 * x[0].sin();
            o[1] = 0.5 * x[1].cos();
        });
        assert_eq!(ouhabaz_functional(&p, &small, p.hypotheses.omega_tilde).unwrap(), 0.0);
        let center = p.grid.domain().center();
        let big = GridFunction::from_fn(p.grid, 2, |x, o| {
            o[0] = 2.0 * super::super::trials::bump_value(x, &center[..2], 2.0);
        });
        assert!(ouhabaz_functional(&p, &big, p.hypotheses.omega_tilde).unwrap() > 0.0);
        let r = check_ouhabaz_linf_functional(&p, p.hypotheses.omega_tilde, 100, 5).unwrap();
        assert!(r.passed, "{}", r.measured);
    }

    #[test]
    fn ouhabaz_fails_without_divergence_margin() {
        // C = 8 x has div C = 8, which enters L_h as a growth rate
        let dom = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let c_field = DriftField::new(
            1,
            1,
            std::sync::Arc::new(|x: &[f64]| vec![DMatrix::from_element(1, 1, 8.0 * x[0])]),
            std::sync::Arc::new(|_: &[f64]| DMatrix::from_element(1, 1, 8.0)),
        );
        let c = CoefficientSet::new(
            DiffusionField::scaled_identity(1, 1.0),
            DriftField::zero(1, 1),
            c_field,
            PotentialField::zero(1),
            dom,
        )
        .unwrap();
        let p = Problem::new(c, Grid::uniform(dom, 60).unwrap(), &sampling()).unwrap();
        assert!(p.hypotheses.gamma >= 8.0 - 1e-12);
        let r = check_ouhabaz_linf_functional(&p, 0.0, 100, 6).unwrap();
        assert!(!r.passed, "{}", r.measured);
        assert!(r.witness.is_some());
        let ok = check_ouhabaz_linf_functional(&p, p.hypotheses.omega_tilde, 100, 6).unwrap();
        assert!(ok.passed, "{}", ok.measured);
    }

    #[test]
    fn linf_constant_data_under_diffusion() {
        let p = preset("identity", 1, 8.0, 81);
        let prop = ImplicitEuler.prepare(&p.op, 0.01).unwrap();
        let f0 = GridFunction::from_fn(p.grid, 1, |_, o| o[0] = 1.0);
        let mut prev = lp_norm(&f0, NormKind::Infinity);
        for (_, u) in trajectory(prop.as_ref(), &f0, 0.01).unwrap() {
            let now = lp_norm(&u, NormKind::Infinity);
            assert!(now <= prev);
            prev = now;
        }
    }

    #[test]
    fn linf_trig_and_adversarial() {
        let p = preset("trig-2d", 2, 3.0, 14);
        for r in check_linf_quasicontractivity(&p, p.hypotheses.omega_tilde, 5, 0.05, 7).unwrap() {
            assert!(r.passed, "{} {}", r.name, r.measured);
        }
        let p = preset("adversarial-v12", 1, 3.0, 40);
        for r in check_linf_quasicontractivity(&p, p.hypotheses.omega_tilde, 5, 0.05, 7).unwrap() {
            assert!(r.passed, "{} {}", r.name, r.measured);
        }
    }

    #[test]
    fn linf_requires_monotone_step() {
        let p = drift_only(30.0, 10);
        assert!(matches!(
            check_linf_quasicontractivity(&p, p.hypotheses.omega_tilde, 1, 0.05, 1),
            Err(PropsError::StepRestriction { .. })
        ));
    }

    #[test]
    fn sector_symmetric_and_nonsymmetric() {
        let p = preset("identity", 1, 3.0, 30);
        let r = check_sector(&p, p.hypotheses.omega, 50, 1).unwrap();
        assert!(r[0].passed && r[0].measured <= 1e-12, "{}", r[0].measured);
        assert!(r[1].passed);
        let p = preset("nonsymmetric-sectorial", 1, 3.0, 30);
        let r = check_sector(&p, p.hypotheses.omega, 200, 2).unwrap();
        assert!(r[0].measured <= p.hypotheses.sectoriality + 1e-3, "{}", r[0].measured);
        assert!(r[0].passed && r[1].passed);
    }

    #[test]
    fn sector_ratio_is_scale_invariant() {
        let p = preset("trig-2d", 2, 3.0, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let re = random_function(p.grid, 2, &mut rng);
        let im = random_function(p.grid, 2, &mut rng);
        let a = sector_ratio(&p, &re, &im, p.hypotheses.omega).unwrap();
        let b = sector_ratio(&p, &re.scaled(3.0), &im.scaled(3.0), p.hypotheses.omega).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn continuity_and_resolvent() {
        let p = preset("smooth-coupled", 1, 3.0, 40);
        let r = check_form_continuity(&p, 100, 3).unwrap();
        assert!(r.passed && r.bound.is_finite(), "{} {}", r.measured, r.bound);
        let r = check_resolvent_bound(&p, p.hypotheses.omega, 5, 3).unwrap();
        assert!(r.passed, "{}", r.measured);
    }

    #[test]
    fn lowest_mode_matches_dense() {
        let p = preset("smooth-coupled", 1, 3.0, 20);
        let (lambda, _) = lowest_symmetric_mode(&p).unwrap().unwrap();
        let a = -p.op.to_dense();
        let s = (&a + a.transpose()) * 0.5;
        let dense = s.symmetric_eigenvalues().min();
        assert!((lambda - dense).abs() <= 1e-9 * dense.abs().max(1.0));
        let _ = HypothesisReport::analyze(&p.coeffs, &sampling());
    }
}
