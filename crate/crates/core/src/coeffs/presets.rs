//! Named coefficient presets, selectable at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CoeffError, CoefficientSet, DiffusionField, DriftField, PotentialField};
use crate::grid::BoxDomain;

/// A named recipe for a [`CoefficientSet`] on a given box.
pub trait CoefficientPreset: Send + Sync {
    fn name(&self) -> &str;
    fn summary(&self) -> &str;
    /// Spatial dimensions the preset is defined for; the first is the default.
    fn dims(&self) -> &[usize];
    fn components(&self) -> usize;
    fn build(&self, domain: &BoxDomain) -> Result<CoefficientSet, CoeffError>;

    fn default_dim(&self) -> usize {
        self.dims()[0]
    }
}

type Builder = fn(&BoxDomain) -> CoefficientSet;

struct FnPreset {
    name: &'static str,
    summary: &'static str,
    dims: &'static [usize],
    components: usize,
    builder: Builder,
}

impl CoefficientPreset for FnPreset {
    fn name(&self) -> &str {
        self.name
    }

    fn summary(&self) -> &str {
        self.summary
    }

    fn dims(&self) -> &[usize] {
        self.dims
    }

    fn components(&self) -> usize {
        self.components
    }

    fn build(&self, domain: &BoxDomain) -> Result<CoefficientSet, CoeffError> {
        if !self.dims.contains(&domain.dim()) {
            return Err(CoeffError::UnsupportedDimension {
                preset: self.name.to_string(),
                dim: domain.dim(),
            });
        }
        Ok((self.builder)(domain))
    }
}

/// Registry of presets keyed by name.
pub struct PresetRegistry {
    entries: BTreeMap<String, Box<dyn CoefficientPreset>>,
}

impl PresetRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// The shipped catalog.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        for p in catalog() {
            r.register(Box::new(p));
        }
        r
    }

    /// Adds a preset, replacing any previous one with the same name.
    pub fn register(&mut self, preset: Box<dyn CoefficientPreset>) {
        self.entries.insert(preset.name().to_string(), preset);
    }

    pub fn get(&self, name: &str) -> Result<&dyn CoefficientPreset, CoeffError> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| CoeffError::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn CoefficientPreset> {
        self.entries.values().map(|b| b.as_ref())
    }
}

impl Default for PresetRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn mat(m: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, entries)
}

fn set(q: DiffusionField, f: DriftField, c: DriftField, v: PotentialField, dom: &BoxDomain) -> CoefficientSet {
    CoefficientSet::new(q, f, c, v, *dom).expect("preset fields have consistent shapes")
}

fn identity(dom: &BoxDomain) -> CoefficientSet {
    let d = dom.dim();
    set(
        DiffusionField::scaled_identity(d, 1.0),
        DriftField::zero(d, 1),
        DriftField::zero(d, 1),
        PotentialField::zero(1),
        dom,
    )
}

fn confining_quadratic(dom: &BoxDomain) -> CoefficientSet {
    let d = dom.dim();
    set(
        DiffusionField::scaled_identity(d, 1.0),
        DriftField::zero(d, 1),
        DriftField::zero(d, 1),
        PotentialField::new(
            1,
            Arc::new(|x: &[f64]| DMatrix::from_element(1, 1, x.iter().map(|t| t * t).sum())),
        ),
        dom,
    )
}

fn potential_preset(dom: &BoxDomain, v: DMatrix<f64>) -> CoefficientSet {
    let d = dom.dim();
    let m = v.nrows();
    set(
        DiffusionField::scaled_identity(d, 1.0),
        DriftField::zero(d, m),
        DriftField::zero(d, m),
        PotentialField::constant(v),
        dom,
    )
}

fn nonsymmetric_sectorial(dom: &BoxDomain) -> CoefficientSet {
    potential_preset(dom, mat(2, &[1.0, 1.0, -1.0, 1.0]))
}

fn coupling_negative(dom: &BoxDomain) -> CoefficientSet {
    let d = dom.dim();
    let mut f = vec![DMatrix::zeros(2, 2); d];
    f[0][(0, 0)] = 0.5;
    f[0][(1, 1)] = -0.5;
    set(
        DiffusionField::scaled_identity(d, 1.0),
        DriftField::constant(f),
        DriftField::zero(d, 2),
        PotentialField::constant(mat(2, &[1.0, -1.0, -1.0, 1.0])),
        dom,
    )
}

fn coupling_positive_v12(dom: &BoxDomain) -> CoefficientSet {
    potential_preset(dom, mat(2, &[1.0, 1.0, 1.0, 1.0]))
}

fn adversarial_v12(dom: &BoxDomain) -> CoefficientSet {
    potential_preset(dom, mat(2, &[5.0, 5.0, 5.0, 5.0]))
}

fn coupling_f12(dom: &BoxDomain) -> CoefficientSet {
    let d = dom.dim();
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    set(
        DiffusionField::scaled_identity(d, 1.0),
        DriftField::single_entry(2, 0, 1, &e),
        DriftField::zero(d, 2),
        PotentialField::zero(2),
        dom,
    )
}

fn trig_2d(dom: &BoxDomain) -> CoefficientSet {
    let q = DiffusionField::new(
        2,
        Arc::new(|x: &[f64]| {
            let s = x[0].sin();
            mat(2, &[2.0 + s, 0.5, 0.5, 2.0 - s])
        }),
        Arc::new(|x: &[f64]| {
            let c = x[0].cos();
            vec![mat(2, &[c, 0.0, 0.0, -c]), DMatrix::zeros(2, 2)]
        }),
    );
    let f = DriftField::new(
        2,
        2,
        Arc::new(|x: &[f64]| {
            let (s1, c1) = x[0].sin_cos();
            let (s2, c2) = x[1].sin_cos();
            vec![
                mat(2, &[0.5 * s1, 0.0, 0.25 * s2, 0.5]),
                mat(2, &[0.5 * c2, 0.5 * c1, 0.0, 0.5 * s2]),
            ]
        }),
        Arc::new(|x: &[f64]| {
            let (s2, c2) = x[1].sin_cos();
            mat(2, &[0.5 * x[0].cos() - 0.5 * s2, 0.0, 0.0, 0.5 * c2])
        }),
    );
    let c = DriftField::new(
        2,
        2,
        Arc::new(|x: &[f64]| {
            let c2 = x[1].cos();
            vec![
                mat(2, &[0.25 * c2, 0.25 * x[0].sin(), 0.0, 0.0]),
                mat(2, &[0.0, 0.0, 0.25 * c2, 0.0]),
            ]
        }),
        Arc::new(|x: &[f64]| mat(2, &[0.0, 0.25 * x[0].cos(), -0.25 * x[1].sin(), 0.0])),
    );
    let v = PotentialField::new(
        2,
        Arc::new(|x: &[f64]| {
            let s = 1.0 + 0.5 * x[0].cos() * x[1].cos();
            let w = x[1].sin();
            mat(2, &[s, 0.5 * s, -0.5 * s, s + 0.5 * w * w])
        }),
    );
    set(q, f, c, v, dom)
}

/// Smooth coefficients varying along the first axis, coupled in every term.
fn smooth_coupled(dom: &BoxDomain) -> CoefficientSet {
    let d = dom.dim();
    let q = DiffusionField::new(
        d,
        Arc::new(move |x: &[f64]| DMatrix::identity(d, d) * (1.5 + 0.5 * x[0].sin())),
        Arc::new(move |x: &[f64]| {
            let mut g = vec![DMatrix::zeros(d, d); d];
            g[0] = DMatrix::identity(d, d) * (0.5 * x[0].cos());
            g
        }),
    );
    let f = DriftField::new(
        d,
        2,
        Arc::new(move |x: &[f64]| {
            let (s, c) = x[0].sin_cos();
            let mut out = vec![mat(2, &[0.5 * c, 0.3, 0.0, -0.5 * s])];
            if d == 2 {
                out.push(mat(2, &[0.2, 0.0, 0.2 * c, 0.0]));
            }
            out
        }),
        Arc::new(|x: &[f64]| {
            let (s, c) = x[0].sin_cos();
            mat(2, &[-0.5 * s, 0.0, 0.0, -0.5 * c])
        }),
    );
    let c = DriftField::new(
        d,
        2,
        Arc::new(move |x: &[f64]| {
            let (s, c) = x[0].sin_cos();
            let mut out = vec![mat(2, &[0.25 * s, 0.0, 0.2 * c, 0.0])];
            if d == 2 {
                out.push(mat(2, &[0.0, 0.1, 0.0, 0.0]));
            }
            out
        }),
        Arc::new(|x: &[f64]| {
            let (s, c) = x[0].sin_cos();
            mat(2, &[0.25 * c, 0.0, -0.2 * s, 0.0])
        }),
    );
    let v = PotentialField::new(
        2,
        Arc::new(|x: &[f64]| mat(2, &[1.0 + 0.5 * x[0].cos(), 0.3, -0.3, 1.0])),
    );
    set(q, f, c, v, dom)
}

fn catalog() -> Vec<FnPreset> {
    vec![
        FnPreset {
            name: "identity",
            summary: "Q = I, no drift, no potential, one component",
            dims: &[1, 2],
            components: 1,
            builder: identity,
        },
        FnPreset {
            name: "trig-2d",
            summary: "variable Q with cross term, coupled F and C, nonsymmetric sectorial V",
            dims: &[2],
            components: 2,
            builder: trig_2d,
        },
        FnPreset {
            name: "confining-quadratic",
            summary: "Q = I, V = |x|^2, one component",
            dims: &[1, 2],
            components: 1,
            builder: confining_quadratic,
        },
        FnPreset {
            name: "nonsymmetric-sectorial",
            summary: "Q = I, V = [[1,1],[-1,1]]",
            dims: &[1, 2],
            components: 2,
            builder: nonsymmetric_sectorial,
        },
        FnPreset {
            name: "coupling-negative",
            summary: "diagonal drift, V = [[1,-1],[-1,1]]; positivity preserving",
            dims: &[1, 2],
            components: 2,
            builder: coupling_negative,
        },
        FnPreset {
            name: "coupling-positive-v12",
            summary: "Q = I, V = [[1,1],[1,1]]; positive off-diagonal potential",
            dims: &[1, 2],
            components: 2,
            builder: coupling_positive_v12,
        },
        FnPreset {
            name: "coupling-F12",
            summary: "Q = I, F_12 = e_1, V = 0; off-diagonal drift",
            dims: &[1, 2],
            components: 2,
            builder: coupling_f12,
        },
        FnPreset {
            name: "adversarial-v12",
            summary: "Q = I, V = [[5,5],[5,5]]; strong positive off-diagonal potential",
            dims: &[1, 2],
            components: 2,
            builder: adversarial_v12,
        },
        FnPreset {
            name: "smooth-coupled",
            summary: "smooth variable Q, F, C, V along the first axis",
            dims: &[1, 2],
            components: 2,
            builder: smooth_coupled,
        },
    ]
}
