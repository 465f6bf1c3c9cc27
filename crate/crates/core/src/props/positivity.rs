//! Positivity of the semigroup: the form criterion `a_h(f+, f-) <= 0`, the
//! dynamic sign test, and the refutation constructions.
//!
//! Here `f-` is the nonnegative part `max(-f, 0)`, so the criterion reads
//! `a_h(f+, f-) <= 0` with both arguments nonnegative.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trials::{adversarial_battery, bump_value, cutoff_value, default_radius, random_function};
use super::{PropsError, Problem};
use crate::check::{CheckResult, Comparison};
use crate::coeffs::{PositivityStructure, SamplePoints, SamplingConfig};
use crate::evolve::{ImplicitEuler, TimeScheme};
use crate::grid::{l2_norm, lp_norm, GridFunction, NormKind};

/// Largest accepted normalized `a_h(f+, f-) / |f|^2` in the forward check.
pub const POSITIVITY_FORM_TOL: f64 = 1e-9;
/// A refuting construction must reach `a_h(f+, f-) > REVERSE_FORM_THRESHOLD`.
pub const REVERSE_FORM_THRESHOLD: f64 = 1e-6;
/// A refuting evolution must reach `min u < -REVERSE_DYNAMIC_THRESHOLD |f0|_inf`.
pub const REVERSE_DYNAMIC_THRESHOLD: f64 = 1e-3;
/// Accepted undershoot in the forward dynamic check, relative to `|f0|_inf`.
const FORWARD_DYNAMIC_TOL: f64 = 1e-12;
/// Steps of the forward dynamic check.
const FORWARD_STEPS: usize = 100;
/// Horizon of the reverse dynamic check.
const REVERSE_HORIZON: f64 = 0.5;
/// Tilt rates of the exponential constructions.
const TILT_RATES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Componentwise `(max(f, 0), max(-f, 0))`.
fn split(f: &GridFunction) -> (GridFunction, GridFunction) {
    let plus = f.values().iter().map(|&v| v.max(0.0)).collect();
    let minus = f.values().iter().map(|&v| (-v).max(0.0)).collect();
    (
        f.with_values(plus).expect("same length"),
        f.with_values(minus).expect("same length"),
    )
}

/// `a_h(f+, f-)` with `f- = max(-f, 0)`. Adding `omega <f+, f->` changes
/// nothing since the parts have disjoint support.
pub fn positivity_form_value(p: &Problem, f: &GridFunction) -> Result<f64, PropsError> {
    let (plus, minus) = split(f);
    Ok(p.form.form_value(&plus, &minus)?.a)
}

/// Discrete versions of the two refutation families, for every ordered pair
/// of distinct components `(i, j)`:
/// - `cut-n{n}-i{i}-j{j}`: `zeta_n e_i - phi e_j`, with `zeta_n` a cutoff equal
///   to one on a cube that grows with `n` towards the box;
/// - `tilt{+,-}-n{n}-k{k}-i{i}-j{j}`: `e^{+-n x_k} phi e_i - e^{-+n x_k} phi e_j`.
///
/// `phi` is the central bump of half-width `default_radius`.
pub fn tilt_constructions(grid: crate::grid::Grid, m: usize) -> Vec<(String, GridFunction)> {
    let d = grid.dim();
    let center = grid.domain().center();
    let r = default_radius(&grid);
    let half = 0.5 * (0..d).map(|k| grid.domain().width(k)).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for (step, &n) in TILT_RATES.iter().enumerate() {
                // inner radius grows from r towards the box half-width
                let inner = r + (half - r) * (1.0 - 0.5f64.powi(step as i32 + 1)) * 0.8;
                let outer = inner + 0.1 * (half - inner).max(0.0) + 1e-9;
                let f = GridFunction::from_fn(grid, m, |x, o| {
                    o[i] = cutoff_value(&x[..d], &center[..d], inner, outer);
                    o[j] = -bump_value(&x[..d], &center[..d], r);
                });
                out.push((format!("cut-n{n}-i{i}-j{j}"), f));
                for k in 0..d {
                    for (sign, label) in [(1.0, '+'), (-1.0, '-')] {
                        let g = GridFunction::from_fn(grid, m, |x, o| {
                            let phi = bump_value(&x[..d], &center[..d], r);
                            let e = (sign * n * (x[k] - center[k])).exp();
                            o[i] = e * phi;
                            o[j] = -phi / e;
                        });
                        out.push((format!("tilt{label}-n{n}-k{k}-i{i}-j{j}"), g));
                    }
                }
            }
        }
    }
    out
}

fn structure(p: &Problem) -> PositivityStructure {
    let cfg = SamplingConfig {
        quasi_points: 1000,
        ..SamplingConfig::default()
    };
    PositivityStructure::measure(&p.coeffs, &SamplePoints::new(&p.coeffs.domain, &cfg))
}

/// Nonnegative initial data: absolute values of random trials, one bump per
/// component, and the absolute battery.
fn nonnegative_data(p: &Problem, trials: usize, seed: u64) -> Vec<(String, GridFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let abs = |f: &GridFunction| f.with_values(f.values().iter().map(|v| v.abs()).collect()).expect("same length");
    let mut out: Vec<(String, GridFunction)> = (0..trials)
        .map(|k| (format!("|random trial {k}|"), abs(&random_function(p.grid, m, &mut rng))))
        .collect();
    for (name, f) in adversarial_battery(p.grid, m) {
        out.push((format!("|{name}|"), abs(&f)));
    }
    out
}

/// Sufficiency direction: for coefficients with vanishing off-diagonal drift,
/// nonpositive off-diagonal potential and `C = 0`, returns the form
/// criterion and the dynamic sign test as two results.
pub fn check_positivity_forward(p: &Problem, trials: usize, dt: f64, seed: u64) -> Result<Vec<CheckResult>, PropsError> {
    let s = structure(p);
    if !s.is_positive() {
        return Err(PropsError::Precondition(format!(
            "off-diagonal structure is not positive (drift {:.3e}, potential {:.3e})",
            s.offdiag_drift, s.offdiag_potential
        )));
    }
    if !p.coeffs.c.is_identically_zero() {
        return Err(PropsError::Precondition("positivity checks assume C = 0".to_string()));
    }
    p.require_monotone_step()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.components();
    let mut form_max = f64::NEG_INFINITY;
    let mut form_label = String::new();
    let mut count = 0;
    let mut candidates: Vec<(String, GridFunction)> = (0..trials)
        .map(|k| (format!("random trial {k}"), random_function(p.grid, m, &mut rng)))
        .collect();
    candidates.extend(adversarial_battery(p.grid, m));
    for (name, f) in &candidates {
        let n2 = l2_norm(f).powi(2);
        if n2 == 0.0 {
            continue;
        }
        count += 1;
        let v = positivity_form_value(p, f)? / n2;
        if v > form_max {
            form_max = v;
            form_label = name.clone();
        }
    }
    for (name, f) in tilt_constructions(p.grid, m) {
        count += 1;
        let v = positivity_form_value(p, &f)?;
        if v > form_max {
            form_max = v;
            form_label = name;
        }
    }
    let mut form = CheckResult::new(
        "positivity_form",
        "positive cone criterion: a_h(f+, f-) <= 0",
        form_max,
        0.0,
        POSITIVITY_FORM_TOL,
        Comparison::AtMost,
    )
    .with_trials(count)
    .with_note("random trials normalized by |f|^2, constructions raw");
    if !form.passed {
        form = form.with_witness(form_label, None);
    }

    let prop = ImplicitEuler.prepare(&p.op, dt)?;
    let data = nonnegative_data(p, trials, seed ^ 0x9e37_79b9);
    let mut dyn_min = f64::INFINITY;
    let mut dyn_label = String::new();
    for (name, f0) in &data {
        let scale = lp_norm(f0, NormKind::Infinity);
        if scale == 0.0 {
            continue;
        }
        let mut u = f0.values().to_vec();
        for step in 1..=FORWARD_STEPS {
            prop.step(&mut u)?;
            let lo = u.iter().copied().fold(f64::INFINITY, f64::min) / scale;
            if lo < dyn_min {
                dyn_min = lo;
                dyn_label = format!("{name} after {step} steps");
            }
        }
    }
    let mut dynamic = CheckResult::new(
        "positivity_dynamic",
        "implicit Euler keeps nonnegative data nonnegative",
        dyn_min,
        0.0,
        FORWARD_DYNAMIC_TOL,
        Comparison::AtLeast,
    )
    .with_trials(data.len())
    .with_note(format!("min u / |f0|_inf over {FORWARD_STEPS} steps of dt = {dt}"));
    if !dynamic.passed {
        dynamic = dynamic.with_witness(dyn_label, None);
    }
    Ok(vec![form, dynamic])
}

/// Necessity direction: looks for a refuting construction with
/// `a_h(f+, f-) > REVERSE_FORM_THRESHOLD` or an evolution of a nonnegative
/// bump whose minimum drops below `-REVERSE_DYNAMIC_THRESHOLD |f0|_inf` by
/// `t = 0.5`. The measured value is the larger of the two detections, each
/// divided by its threshold, and the check passes when it exceeds one.
pub fn check_positivity_reverse(p: &Problem, dt: f64) -> Result<CheckResult, PropsError> {
    let m = p.components();
    let mut form_max = f64::NEG_INFINITY;
    let mut form_witness: Option<(String, GridFunction)> = None;
    let constructions = tilt_constructions(p.grid, m);
    for (name, f) in &constructions {
        let v = positivity_form_value(p, f)?;
        if v > form_max {
            form_max = v;
            form_witness = Some((name.clone(), f.clone()));
        }
    }

    let steps = crate::evolve::step_count(REVERSE_HORIZON, dt)
        .ok_or_else(|| PropsError::Precondition(format!("dt = {dt} does not divide {REVERSE_HORIZON}")))?;
    let prop = ImplicitEuler.prepare(&p.op, dt)?;
    let d = p.grid.dim();
    let center = p.grid.domain().center();
    let r = default_radius(&p.grid);
    let mut dyn_neg = 0.0f64;
    let mut dyn_witness: Option<(String, GridFunction)> = None;
    for j in 0..m {
        let f0 = GridFunction::from_fn(p.grid, m, |x, o| o[j] = bump_value(&x[..d], &center[..d], r));
        let scale = lp_norm(&f0, NormKind::Infinity);
        let mut u = f0.values().to_vec();
        for step in 1..=steps {
            prop.step(&mut u)?;
            let neg = -u.iter().copied().fold(f64::INFINITY, f64::min) / scale;
            if neg > dyn_neg {
                dyn_neg = neg;
                dyn_witness = Some((format!("bump in component {j}, t = {:.3}", step as f64 * dt), f0.clone()));
            }
        }
    }

    let form_score = form_max / REVERSE_FORM_THRESHOLD;
    let dyn_score = dyn_neg / REVERSE_DYNAMIC_THRESHOLD;
    let measured = form_score.max(dyn_score);
    let mut r = CheckResult::new(
        "positivity_reverse",
        "non-positive structure is refuted by a form witness or a sign change",
        measured,
        1.0,
        0.0,
        Comparison::Exceeds,
    )
    .with_trials(constructions.len() + m);
    let summary = format!(
        "max construction a_h(f+, f-) = {form_max:.6e}, max negativity = {dyn_neg:.6e} |f0|_inf"
    );
    if r.passed {
        let (label, f) = if form_score >= dyn_score {
            form_witness.expect("constructions exist when m > 1")
        } else {
            dyn_witness.expect("negativity was recorded")
        };
        r = r.with_witness(label, Some(f)).with_note(summary);
    } else {
        r = r.with_note(format!("NoWitnessFound: positivity not refuted; {summary}"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::presets::PresetRegistry;
    use crate::coeffs::{CoefficientSet, PotentialField};
    use crate::evolve::dense_exponential_oracle;
    use crate::grid::{BoxDomain, Grid};
    use nalgebra::DMatrix;

    fn sampling() -> SamplingConfig {
        SamplingConfig {
            quasi_points: 500,
            ..SamplingConfig::default()
        }
    }

    fn preset(name: &str, n: usize) -> Problem {
        let reg = PresetRegistry::standard();
        let dom = BoxDomain::cube(1, -4.0, 4.0).unwrap();
        let c = reg.get(name).unwrap().build(&dom).unwrap();
        Problem::new(c, Grid::uniform(dom, n).unwrap(), &sampling()).unwrap()
    }

    fn potential_problem(v: [f64; 4], n: usize) -> Problem {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let c = CoefficientSet::potential_only(PotentialField::constant(DMatrix::from_row_slice(2, 2, &v)), dom);
        Problem::new(c, Grid::uniform(dom, n).unwrap(), &sampling()).unwrap()
    }

    #[test]
    fn split_parts_are_nonnegative_and_disjoint() {
        let g = Grid::interval(0.0, 1.0, 4).unwrap();
        let f = GridFunction::from_values(g, 1, vec![1.0, -2.0, 0.0, 3.0]).unwrap();
        let (p, m) = split(&f);
        assert_eq!(p.values(), &[1.0, 0.0, 0.0, 3.0]);
        assert_eq!(m.values(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_coupling_closed_form() {
        // V = [[0, -1], [-1, 0]]: constant data follows [[cosh t, sinh t], [sinh t, cosh t]]
        let p = potential_problem([0.0, -1.0, -1.0, 0.0], 9);
        let f0 = GridFunction::from_fn(p.grid, 2, |_, o| {
            o[0] = 1.0;
            o[1] = 0.0;
        });
        let t: f64 = 0.8;
        let u = dense_exponential_oracle(&f0, t, &p.op).unwrap();
        assert!((u.at(4)[0] - t.cosh()).abs() < 1e-6);
        assert!((u.at(4)[1] - t.sinh()).abs() < 1e-6);
        let checks = check_positivity_forward(&p, 20, 0.01, 1).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn positive_coupling_closed_form_and_witness() {
        // V = [[0, 1], [1, 0]]: exp(-tV) has off-diagonal -sinh t
        let p = potential_problem([0.0, 1.0, 1.0, 0.0], 9);
        let f0 = GridFunction::from_fn(p.grid, 2, |_, o| {
            o[0] = 1.0;
            o[1] = 0.0;
        });
        let t: f64 = 0.5;
        let u = dense_exponential_oracle(&f0, t, &p.op).unwrap();
        assert!((u.at(4)[1] + t.sinh()).abs() < 1e-6);
        let r = check_positivity_reverse(&p, 0.01).unwrap();
        assert!(r.passed && r.witness.is_some());
        assert!(matches!(
            check_positivity_forward(&p, 5, 0.01, 1),
            Err(PropsError::Precondition(_))
        ));
    }

    #[test]
    fn decoupled_and_zero_data() {
        let p = potential_problem([1.0, 0.0, 0.0, 2.0], 12);
        let checks = check_positivity_forward(&p, 10, 0.01, 2).unwrap();
        assert!(checks.iter().all(|c| c.passed));
        let zero = GridFunction::zeros(p.grid, 2);
        let prop = ImplicitEuler.prepare(&p.op, 0.01).unwrap();
        let u = crate::evolve::propagate(prop.as_ref(), &zero, 10).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shipped_positivity_presets() {
        let neg = preset("coupling-negative", 64);
        let fwd = check_positivity_forward(&neg, 20, 0.01, 3).unwrap();
        assert!(fwd.iter().all(|c| c.passed), "{fwd:?}");
        let rev = check_positivity_reverse(&neg, 0.01).unwrap();
        assert!(!rev.passed);
        assert!(rev.note.as_deref().unwrap().starts_with("NoWitnessFound"));

        let v12 = check_positivity_reverse(&preset("coupling-positive-v12", 64), 0.01).unwrap();
        assert!(v12.passed);
        let f12 = check_positivity_reverse(&preset("coupling-F12", 64), 0.01).unwrap();
        assert!(f12.passed);
    }

    #[test]
    fn drift_tilt_grows_with_rate() {
        // F_12 = e1 and V = 0: a_h(g+, g-) for the tilt is about n |phi|^2
        let p = preset("coupling-F12", 128);
        let mut best = Vec::new();
        for n in TILT_RATES {
            let v = tilt_constructions(p.grid, 2)
                .into_iter()
                .filter(|(name, _)| name.starts_with("tilt") && name.contains(&format!("-n{n}-")))
                .map(|(_, f)| positivity_form_value(&p, &f).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            best.push(v);
        }
        assert!(best[0] > 0.0);
        assert!(best.windows(2).all(|w| w[1] > w[0]), "{best:?}");
    }
}
