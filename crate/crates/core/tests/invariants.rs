//! Property-based invariants over the shipped presets on small grids.

use std::sync::OnceLock;

use proptest::prelude::*;
use semilab::cli::parse_config;
use semilab::coeffs::presets::PresetRegistry;
use semilab::coeffs::SamplingConfig;
use semilab::evolve::SchemeRegistry;
use semilab::grid::{l2_norm, ouhabaz_projection, pairing, BoxDomain, Grid, GridFunction};
use semilab::props::{ouhabaz_functional, positivity_form_value, sector_ratio, Problem};

const CASES: [(&str, usize, usize); 6] = [
    ("trig-2d", 2, 10),
    ("smooth-coupled", 1, 24),
    ("smooth-coupled", 2, 9),
    ("coupling-F12", 1, 24),
    ("nonsymmetric-sectorial", 2, 9),
    ("adversarial-v12", 1, 24),
];

/// Enough values for the largest case above.
const MAX_LEN: usize = 200;

fn problems() -> &'static Vec<Problem> {
    static CELL: OnceLock<Vec<Problem>> = OnceLock::new();
    CELL.get_or_init(|| {
        let reg = PresetRegistry::standard();
        let cfg = SamplingConfig {
            quasi_points: 500,
            ..SamplingConfig::default()
        };
        CASES
            .iter()
            .map(|&(name, d, n)| {
                let dom = BoxDomain::cube(d, -3.0, 3.0).unwrap();
                let c = reg.get(name).unwrap().build(&dom).unwrap();
                Problem::new(c, Grid::uniform(dom, n).unwrap(), &cfg).unwrap()
            })
            .collect()
    })
}

fn function(p: &Problem, raw: &[f64]) -> GridFunction {
    let len = p.grid.node_count() * p.components();
    assert!(len <= raw.len());
    GridFunction::from_values(p.grid, p.components(), raw[..len].to_vec()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, MAX_LEN)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn form_is_negative_pairing_with_operator(case in 0..CASES.len(), a in values(), b in values()) {
        let p = &problems()[case];
        let (f, g) = (function(p, &a), function(p, &b));
        let form = p.form.form_value(&f, &g).unwrap().a;
        let lf = p.op.apply(&f).unwrap();
        let direct = -pairing(&lf, &g).unwrap();
        prop_assert!((form - direct).abs() <= 1e-9 * l2_norm(&f) * l2_norm(&g));
    }

    #[test]
    fn shifted_form_is_accretive(case in 0..CASES.len(), a in values()) {
        let p = &problems()[case];
        let f = function(p, &a);
        let n2 = l2_norm(&f).powi(2);
        let re = p.form.quadratic(&f).unwrap().a;
        prop_assert!(re + p.hypotheses.omega * n2 >= -1e-10 * n2);
    }

    #[test]
    fn sector_ratio_is_scale_invariant(case in 0..CASES.len(), a in values(), b in values(), s in 1e-3f64..1e3) {
        let p = &problems()[case];
        let (re, im) = (function(p, &a), function(p, &b));
        let omega = p.hypotheses.omega;
        let r1 = sector_ratio(p, &re, &im, omega).unwrap();
        let r2 = sector_ratio(p, &re.scaled(s), &im.scaled(s), omega).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-9 * r1.max(1.0));
    }

    #[test]
    fn projection_is_idempotent_and_bounded(case in 0..CASES.len(), a in values(), s in 0.1f64..10.0) {
        let p = &problems()[case];
        let f = function(p, &a).scaled(s);
        let pf = ouhabaz_projection(&f);
        let ppf = ouhabaz_projection(&pf);
        for node in 0..p.grid.node_count() {
            prop_assert!(pf.modulus_at(node) <= 1.0 + 1e-15);
        }
        let diff = pf.values().iter().zip(ppf.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-15);
    }

    #[test]
    fn ouhabaz_functional_is_nonnegative(case in 0..CASES.len(), a in values(), s in 0.25f64..4.0) {
        let p = &problems()[case];
        let f = function(p, &a).scaled(s);
        let value = ouhabaz_functional(p, &f, p.hypotheses.omega_tilde).unwrap();
        prop_assert!(value >= -1e-9 * (1.0 + l2_norm(&f).powi(2)));
    }

    #[test]
    fn implicit_step_respects_resolvent_bound(case in 0..CASES.len(), a in values()) {
        let p = &problems()[case];
        let f = function(p, &a);
        let dt = 0.01;
        let prop = SchemeRegistry::standard().get("implicit-euler").unwrap().prepare(&p.op, dt).unwrap();
        let mut u = f.values().to_vec();
        prop.step(&mut u).unwrap();
        let u = f.with_values(u).unwrap();
        let bound = l2_norm(&f) / (1.0 - p.hypotheses.omega * dt);
        prop_assert!(l2_norm(&u) <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn negative_coupling_form_criterion(a in values()) {
        static CELL: OnceLock<Problem> = OnceLock::new();
        let p = CELL.get_or_init(|| {
            let dom = BoxDomain::cube(1, -3.0, 3.0).unwrap();
            let c = PresetRegistry::standard().get("coupling-negative").unwrap().build(&dom).unwrap();
            Problem::new(c, Grid::uniform(dom, 24).unwrap(), &SamplingConfig::default()).unwrap()
        });
        let f = function(p, &a);
        prop_assert!(positivity_form_value(p, &f).unwrap() <= 1e-9);
    }

    #[test]
    fn config_fields_round_trip(n in 3usize..400, steps in 1u32..200, seed in any::<u64>(), half in 0.5f64..10.0) {
        let dt = 1.0 / f64::from(steps);
        let text = format!("preset = smooth-coupled\nn = {n}\ndt = {dt}\nseed = {seed}\nbox = [{}, {half}]\n", -half);
        let cfg = parse_config(&text).unwrap();
        let s = &cfg.settings;
        prop_assert_eq!((s.n, s.dt, s.seed, s.box_lower, s.box_upper), (n, dt, seed, -half, half));
    }
}
