//! Coefficient fields and the structural constants derived from them.
//!
//! All suprema and infima are estimated by deterministic sampling over a
//! tensor grid of the box joined with a Halton sequence. The constants feed
//! the accretivity shifts used by the property checks:
//! `c_eps = m (|F|_inf + |C|_inf)^2 / (4 eps)`, `omega = c_{eta1/2}`,
//! `omega_tilde = c_{eta1/2} + gamma + 1`.

mod fields;
pub mod presets;

use std::fmt::Write as _;

use nalgebra::{Cholesky, Complex, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use fields::{
    AxisMatricesFn, CoefficientSet, DiffusionField, DriftField, MatrixFn, PotentialField,
    DIFFUSION_FLOOR,
};

use crate::check::{CheckResult, Comparison};
use crate::grid::BoxDomain;

/// Floor on `Re <V xi, xi>` below which a direction counts as a kernel
/// direction of `V_s`.
pub const KERNEL_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("Q is not symmetric at {point:?} (defect {defect:e})")]
    NonSymmetric { point: Vec<f64>, defect: f64 },
    #[error("ellipticity lower bound {eta1} is not positive")]
    DegenerateEllipticity { eta1: f64 },
    #[error("V is not sectorial at {point:?}: <V xi, xi> = {re:e} + {im:e}i")]
    NotSectorial { point: Vec<f64>, re: f64, im: f64 },
    #[error("Cauchy-Schwarz bound for V violated at {point:?}: ratio {ratio} > {bound}")]
    LemmaViolated {
        point: Vec<f64>,
        xi1: Vec<Complex<f64>>,
        xi2: Vec<Complex<f64>>,
        ratio: f64,
        bound: f64,
    },
    #[error("reduced potential is not sectorial: {0}")]
    ReducedNotSectorial(Box<CoeffError>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("preset '{preset}' does not support dimension {dim}")]
    UnsupportedDimension { preset: String, dim: usize },
}

/// Sample counts and seed for the constant estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// Points per axis in the tensor part (box endpoints included).
    pub tensor_per_axis: usize,
    /// Halton points added to the tensor grid.
    pub quasi_points: usize,
    /// Random complex test vectors per sample point.
    pub xi_per_point: usize,
    /// Random `(x, xi1, xi2)` triples for the Cauchy-Schwarz check.
    pub pair_trials: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            tensor_per_axis: 33,
            quasi_points: 10_000,
            xi_per_point: 8,
            pair_trials: 100_000,
            seed: 42,
        }
    }
}

/// Deterministic point cloud in a box.
#[derive(Debug, Clone)]
pub struct SamplePoints {
    dim: usize,
    points: Vec<[f64; 2]>,
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

impl SamplePoints {
    pub fn new(domain: &BoxDomain, cfg: &SamplingConfig) -> Self {
        let d = domain.dim();
        let t = cfg.tensor_per_axis.max(2);
        let axis = |k: usize, i: usize| {
            domain.lower(k) + domain.width(k) * i as f64 / (t - 1) as f64
        };
        let mut points = Vec::new();
        if d == 1 {
            points.extend((0..t).map(|i| [axis(0, i), 0.0]));
        } else {
            for i in 0..t {
                for j in 0..t {
                    points.push([axis(0, i), axis(1, j)]);
                }
            }
        }
        const BASES: [usize; 2] = [2, 3];
        for i in 1..=cfg.quasi_points {
            let mut p = [0.0; 2];
            for k in 0..d {
                p[k] = domain.lower(k) + domain.width(k) * radical_inverse(i, BASES[k]);
            }
            points.push(p);
        }
        Self { dim: d, points }
    }

    pub fn from_points(dim: usize, points: Vec<[f64; 2]>) -> Self {
        Self { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn raw(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.iter().map(move |p| &p[..self.dim])
    }
}

/// Hermitian pairing `<A xi, eta> = sum_ij a_ij xi_j conj(eta_i)`.
pub fn hermitian_pairing(a: &DMatrix<f64>, xi: &[Complex<f64>], eta: &[Complex<f64>]) -> Complex<f64> {
    let m = a.nrows();
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..m {
        let mut row = Complex::new(0.0, 0.0);
        for j in 0..m {
            row += xi[j] * a[(i, j)];
        }
        acc += row * eta[i].conj();
    }
    acc
}

fn random_unit_complex(m: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
    let mut v: Vec<Complex<f64>> = (0..m)
        .map(|_| Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    v
}

/// `(eta1, eta2)`: extreme eigenvalues of `Q(x)` over the samples.
pub fn ellipticity_bounds(q: &DiffusionField, samples: &SamplePoints) -> Result<(f64, f64), CoeffError> {
    let mut eta1 = f64::INFINITY;
    let mut eta2 = f64::NEG_INFINITY;
    for x in samples.iter() {
        let qx = q.eval(x);
        let defect = (&qx - qx.transpose()).amax();
        if defect > 0.0 {
            return Err(CoeffError::NonSymmetric {
                point: x.to_vec(),
                defect,
            });
        }
        let eig = SymmetricEigen::new(qx).eigenvalues;
        eta1 = eta1.min(eig.min());
        eta2 = eta2.max(eig.max());
    }
    if !(eta1 > 0.0) {
        return Err(CoeffError::DegenerateEllipticity { eta1 });
    }
    Ok((eta1, eta2))
}

/// Directions maximising `|Im <V xi, xi>| / Re <V xi, xi>` when `V_s` is
/// positive definite: generalized eigenvectors of the pencil
/// `(i V_as, V_s)`.
fn pencil_directions(vs: &DMatrix<f64>, vas: &DMatrix<f64>) -> Vec<Vec<Complex<f64>>> {
    let m = vs.nrows();
    let Some(chol) = Cholesky::new(vs.clone()) else {
        return Vec::new();
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return Vec::new();
    };
    let k = &linv * vas * linv.transpose();
    let h: DMatrix<Complex<f64>> = k.map(|v| Complex::new(0.0, v));
    let eig = SymmetricEigen::new(h);
    let lt: DMatrix<Complex<f64>> = l.transpose().map(|v| Complex::new(v, 0.0));
    (0..m)
        .filter_map(|c| {
            let w = eig.eigenvectors.column(c).into_owned();
            lt.solve_upper_triangular(&w)
                .map(|xi| xi.iter().copied().collect())
        })
        .collect()
}

/// Estimate of the smallest `M` with `|Im <V xi, xi>| <= M Re <V xi, xi>`.
///
/// `V_s` must be positive semidefinite at every sample. Directions with
/// `Re <V xi, xi>` under [`KERNEL_FLOOR`] are skipped, provided the imaginary
/// part vanishes there as well.
pub fn sectoriality_constant(
    v: &PotentialField,
    samples: &SamplePoints,
    xi_per_point: usize,
    seed: u64,
) -> Result<f64, CoeffError> {
    let m = v.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup: f64 = 0.0;
    for x in samples.iter() {
        let vx = v.eval(x);
        let vs = (&vx + vx.transpose()) * 0.5;
        let vas = &vx - &vs;
        let scale = vx.amax().max(1.0);
        let lam_min = SymmetricEigen::new(vs.clone()).eigenvalues.min();
        if lam_min < -KERNEL_FLOOR * scale {
            return Err(CoeffError::NotSectorial {
                point: x.to_vec(),
                re: lam_min,
                im: 0.0,
            });
        }
        let mut candidates = pencil_directions(&vs, &vas);
        for _ in 0..xi_per_point {
            candidates.push(random_unit_complex(m, &mut rng));
        }
        for xi in &candidates {
            let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
            let z = hermitian_pairing(&vx, xi, xi) / norm2;
            if z.re < -KERNEL_FLOOR {
                return Err(CoeffError::NotSectorial {
                    point: x.to_vec(),
                    re: z.re,
                    im: z.im,
                });
            }
            if z.re < KERNEL_FLOOR {
                if z.im.abs() > KERNEL_FLOOR {
                    return Err(CoeffError::NotSectorial {
                        point: x.to_vec(),
                        re: z.re,
                        im: z.im,
                    });
                }
                continue;
            }
            sup = sup.max(z.im.abs() / z.re);
        }
    }
    Ok(sup)
}

/// Samples `|<V xi1, xi2>| / (<V_s xi1, xi1> <V_s xi2, xi2>)^(1/2)` (and the
/// same with `V_as`) and compares the largest ratio with `1 + M`.
pub fn check_generalized_cauchy_schwarz(
    v: &PotentialField,
    sectoriality: f64,
    samples: &SamplePoints,
    n_trials: usize,
    seed: u64,
) -> Result<CheckResult, CoeffError> {
    let m = v.components();
    let bound = 1.0 + sectoriality;
    let tol = 1e-10 * bound;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let pts = samples.raw();
    let d = samples.dim();
    let mut counted = 0;
    for t in 0..n_trials {
        let x = &pts[t % pts.len()][..d];
        let vx = v.eval(x);
        let vs = (&vx + vx.transpose()) * 0.5;
        let vas = &vx - &vs;
        let xi1 = random_unit_complex(m, &mut rng);
        let xi2 = if t % 16 == 0 {
            xi1.clone()
        } else {
            random_unit_complex(m, &mut rng)
        };
        let d1 = hermitian_pairing(&vs, &xi1, &xi1).re.max(0.0);
        let d2 = hermitian_pairing(&vs, &xi2, &xi2).re.max(0.0);
        let denom = (d1 * d2).sqrt();
        for a in [&vx, &vas] {
            let num = hermitian_pairing(a, &xi1, &xi2).norm();
            let violated = if denom < KERNEL_FLOOR {
                num > 1e-10
            } else {
                let ratio = num / denom;
                worst = worst.max(ratio);
                ratio > bound + tol
            };
            if violated {
                return Err(CoeffError::LemmaViolated {
                    point: x.to_vec(),
                    xi1,
                    xi2,
                    ratio: if denom > 0.0 { num / denom } else { f64::INFINITY },
                    bound,
                });
            }
        }
        counted += 1;
    }
    Ok(CheckResult::new(
        "cauchy_schwarz_potential",
        "Cauchy-Schwarz bound (1+M) for the potential and its antisymmetric part",
        worst,
        bound,
        tol,
        Comparison::AtMost,
    )
    .with_trials(counted))
}

/// Largest eigenvalue of the symmetrized divergence matrix over the samples.
pub fn divergence_bound(field: &DriftField, samples: &SamplePoints) -> f64 {
    if field.is_identically_zero() {
        return 0.0;
    }
    samples
        .iter()
        .map(|x| {
            let dv = field.div_eval(x);
            let sym = (&dv + dv.transpose()) * 0.5;
            SymmetricEigen::new(sym).eigenvalues.max()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_x max_ij |F_ij(x)|` over the samples.
pub fn sup_norm(field: &DriftField, samples: &SamplePoints) -> f64 {
    if field.is_identically_zero() {
        return 0.0;
    }
    let m = field.components();
    let mut sup: f64 = 0.0;
    for x in samples.iter() {
        let comps = field.eval(x);
        for i in 0..m {
            for j in 0..m {
                sup = sup.max(DriftField::entry_norm(&comps, i, j));
            }
        }
    }
    sup
}

/// Young constant `c_eps = m (|F|_inf + |C|_inf)^2 / (4 eps)`.
pub fn young_constant(m: usize, norm_f: f64, norm_c: f64, eps: f64) -> f64 {
    let s = norm_f + norm_c;
    if s == 0.0 {
        return 0.0;
    }
    m as f64 * s * s / (4.0 * eps)
}

/// Structural constants of a coefficient set and the hypothesis flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub dim: usize,
    pub components: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub sectoriality: f64,
    pub norm_f: f64,
    pub norm_c: f64,
    pub gamma: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub q_gradient_sup: f64,
    pub potential_sup: f64,
    pub divergence_defect: f64,
    /// Ellipticity, bounded drifts and sectoriality.
    pub h1: bool,
    /// Divergence bound for `F`, `C`, `C*`.
    pub h2: bool,
    /// Bounded diffusion gradients and locally bounded potential.
    pub h3: bool,
    pub issues: Vec<String>,
}

/// Step of the central difference used by the divergence self-test.
const DIVERGENCE_PROBE_STEP: f64 = 1e-4;
/// Accepted divergence self-test defect (the probe is second order).
const DIVERGENCE_PROBE_TOL: f64 = 1e-6;

impl HypothesisReport {
    pub fn analyze(coeffs: &CoefficientSet, cfg: &SamplingConfig) -> Self {
        let samples = SamplePoints::new(&coeffs.domain, cfg);
        let mut issues = Vec::new();
        let (eta1, eta2, elliptic) = match ellipticity_bounds(&coeffs.q, &samples) {
            Ok((a, b)) => (a, b, true),
            Err(e) => {
                issues.push(e.to_string());
                (f64::NAN, f64::NAN, false)
            }
        };
        let (sectoriality, sectorial) =
            match sectoriality_constant(&coeffs.v, &samples, cfg.xi_per_point, cfg.seed) {
                Ok(m) => (m, true),
                Err(e) => {
                    issues.push(e.to_string());
                    (f64::INFINITY, false)
                }
            };
        let norm_f = sup_norm(&coeffs.f, &samples);
        let norm_c = sup_norm(&coeffs.c, &samples);
        let gamma = divergence_bound(&coeffs.f, &samples).max(divergence_bound(&coeffs.c, &samples));

        let tensor = tensor_part(&samples, cfg);
        let divergence_defect = coeffs
            .f
            .divergence_defect(tensor, DIVERGENCE_PROBE_STEP)
            .max(coeffs.c.divergence_defect(tensor, DIVERGENCE_PROBE_STEP));
        if divergence_defect > DIVERGENCE_PROBE_TOL {
            issues.push(format!(
                "supplied divergence disagrees with finite differences by {divergence_defect:e}"
            ));
        }

        let mut q_gradient_sup: f64 = 0.0;
        let mut potential_sup: f64 = 0.0;
        for x in samples.iter() {
            for g in coeffs.q.grad_eval(x) {
                q_gradient_sup = q_gradient_sup.max(g.amax());
            }
            potential_sup = potential_sup.max(coeffs.v.eval(x).amax());
        }

        let h1 = elliptic && sectorial && norm_f.is_finite() && norm_c.is_finite();
        let h2 = gamma.is_finite() && divergence_defect <= DIVERGENCE_PROBE_TOL;
        let h3 = q_gradient_sup.is_finite() && potential_sup.is_finite();
        let mut report = Self {
            dim: coeffs.dim(),
            components: coeffs.components(),
            eta1,
            eta2,
            sectoriality,
            norm_f,
            norm_c,
            gamma,
            omega: f64::NAN,
            omega_tilde: f64::NAN,
            q_gradient_sup,
            potential_sup,
            divergence_defect,
            h1,
            h2,
            h3,
            issues,
        };
        let (omega, omega_tilde) = accretivity_shifts(&report);
        report.omega = omega;
        report.omega_tilde = omega_tilde;
        report
    }

    pub fn all_hold(&self) -> bool {
        self.h1 && self.h2 && self.h3
    }

    /// Largest grid spacing for which the drift keeps the implicit step
    /// matrix sign-monotone: `h <= eta1 / (m |F|_inf)`.
    pub fn monotone_step_limit(&self) -> f64 {
        if self.norm_f == 0.0 {
            f64::INFINITY
        } else {
            self.eta1 / (self.components as f64 * self.norm_f)
        }
    }

    /// Two-column CSV `quantity,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        let rows: [(&str, f64); 13] = [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("M", self.sectoriality),
            ("norm_F", self.norm_f),
            ("norm_C", self.norm_c),
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("omega_tilde", self.omega_tilde),
            ("q_gradient_sup", self.q_gradient_sup),
            ("potential_sup", self.potential_sup),
            ("divergence_defect", self.divergence_defect),
            ("dim", self.dim as f64),
            ("components", self.components as f64),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v:.12e}");
        }
        for (k, v) in [("H1", self.h1), ("H2", self.h2), ("H3", self.h3)] {
            let _ = writeln!(out, "{k},{}", if v { "pass" } else { "fail" });
        }
        out
    }
}

fn tensor_part<'a>(samples: &'a SamplePoints, cfg: &SamplingConfig) -> &'a [[f64; 2]] {
    let t = cfg.tensor_per_axis.max(2);
    let count = if samples.dim() == 1 { t } else { t * t };
    &samples.raw()[..count.min(samples.len())]
}

/// `(omega, omega_tilde) = (c_{eta1/2}, c_{eta1/2} + gamma + 1)`.
pub fn accretivity_shifts(report: &HypothesisReport) -> (f64, f64) {
    if !(report.eta1 > 0.0) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let c = young_constant(report.components, report.norm_f, report.norm_c, 0.5 * report.eta1);
    (c, c + report.gamma + 1.0)
}

/// Eliminates the divergence term: returns `(Q, F - C, 0, V - div C + gamma I)`,
/// whose operator is `L - gamma`.
pub fn reduce_c(
    coeffs: &CoefficientSet,
    gamma: f64,
    samples: &SamplePoints,
    xi_per_point: usize,
    seed: u64,
) -> Result<CoefficientSet, CoeffError> {
    let d = coeffs.dim();
    let m = coeffs.components();
    if coeffs.c.is_identically_zero() && gamma == 0.0 {
        return Ok(coeffs.clone());
    }
    let c = coeffs.c.clone();
    let v = coeffs.v.clone();
    let reduced_v = PotentialField::new(
        m,
        std::sync::Arc::new(move |x: &[f64]| {
            let mut out = v.eval(x) - c.div_eval(x);
            for i in 0..m {
                out[(i, i)] += gamma;
            }
            out
        }),
    );
    sectoriality_constant(&reduced_v, samples, xi_per_point, seed)
        .map_err(|e| CoeffError::ReducedNotSectorial(Box::new(e)))?;
    CoefficientSet::new(
        coeffs.q.clone(),
        coeffs.f.sub(&coeffs.c),
        DriftField::zero(d, m),
        reduced_v,
        coeffs.domain,
    )
}

/// Off-diagonal structure that decides positivity of the semigroup, measured
/// on the divergence-free form `(F - C, V - div C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityStructure {
    /// `sup |F_ij - C_ij|` over `i != j`.
    pub offdiag_drift: f64,
    /// `sup (v_ij - div C_ij)` over `i != j`; must be `<= 0`.
    pub offdiag_potential: f64,
}

/// Tolerance on the off-diagonal structure test.
pub const STRUCTURE_TOL: f64 = 1e-14;

impl PositivityStructure {
    pub fn measure(coeffs: &CoefficientSet, samples: &SamplePoints) -> Self {
        let m = coeffs.components();
        let mut offdiag_drift: f64 = 0.0;
        let mut offdiag_potential = f64::NEG_INFINITY;
        for x in samples.iter() {
            let fx = coeffs.f.eval(x);
            let cx = coeffs.c.eval(x);
            let dc = coeffs.c.div_eval(x);
            let vx = coeffs.v.eval(x);
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let diff: Vec<DMatrix<f64>> =
                        fx.iter().zip(&cx).map(|(a, b)| a - b).collect();
                    offdiag_drift = offdiag_drift.max(DriftField::entry_norm(&diff, i, j));
                    offdiag_potential = offdiag_potential.max(vx[(i, j)] - dc[(i, j)]);
                }
            }
        }
        if m == 1 {
            offdiag_potential = 0.0;
        }
        Self {
            offdiag_drift,
            offdiag_potential,
        }
    }

    /// Off-diagonal drift vanishes and off-diagonal potential is nonpositive.
    pub fn is_positive(&self) -> bool {
        self.offdiag_drift <= STRUCTURE_TOL && self.offdiag_potential <= STRUCTURE_TOL
    }
}
