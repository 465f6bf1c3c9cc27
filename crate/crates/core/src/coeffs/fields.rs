use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::CoeffError;
use crate::grid::BoxDomain;

/// Pointwise matrix-valued function.
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// Pointwise function returning one matrix per spatial axis.
pub type AxisMatricesFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Diffusion matrix `Q(x)`, symmetric `d x d`, with its entry gradients.
#[derive(Clone)]
pub struct DiffusionField {
    dim: usize,
    eval: MatrixFn,
    grad: AxisMatricesFn,
}

impl DiffusionField {
    /// `grad(x)[k]` must hold the entrywise partial derivative of `Q` along
    /// axis `k`.
    pub fn new(dim: usize, eval: MatrixFn, grad: AxisMatricesFn) -> Self {
        Self { dim, eval, grad }
    }

    pub fn constant(q: DMatrix<f64>) -> Self {
        let dim = q.nrows();
        let zero = DMatrix::zeros(dim, dim);
        Self {
            dim,
            eval: Arc::new(move |_| q.clone()),
            grad: Arc::new(move |_| vec![zero.clone(); dim]),
        }
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self::constant(DMatrix::identity(dim, dim) * s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        (self.eval)(x)
    }

    pub fn grad_eval(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        (self.grad)(x)
    }
}

impl fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionField").field("dim", &self.dim).finish()
    }
}

/// First-order coefficient `F = (F_ij)` with `F_ij(x) in R^d`.
///
/// Stored axis-wise: `eval(x)[k]` is the `m x m` matrix of `k`-th components
/// `F_ij^(k)(x)`, so that `(F . grad f)_i = sum_k (F^(k) d_k f)_i`.
/// `div_eval(x)` is the matrix of divergences `div F_ij(x)`.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    m: usize,
    eval: AxisMatricesFn,
    div: MatrixFn,
    is_zero: bool,
}

impl DriftField {
    pub fn new(dim: usize, m: usize, eval: AxisMatricesFn, div: MatrixFn) -> Self {
        Self {
            dim,
            m,
            eval,
            div,
            is_zero: false,
        }
    }

    pub fn zero(dim: usize, m: usize) -> Self {
        let z = DMatrix::zeros(m, m);
        let z2 = z.clone();
        Self {
            dim,
            m,
            eval: Arc::new(move |_| vec![z.clone(); dim]),
            div: Arc::new(move |_| z2.clone()),
            is_zero: true,
        }
    }

    /// Spatially constant field; divergence vanishes.
    pub fn constant(components: Vec<DMatrix<f64>>) -> Self {
        let dim = components.len();
        let m = components[0].nrows();
        let zero = DMatrix::zeros(m, m);
        Self::new(
            dim,
            m,
            Arc::new(move |_| components.clone()),
            Arc::new(move |_| zero.clone()),
        )
    }

    /// Constant field with a single nonzero entry `F_ij = vector`.
    pub fn single_entry(m: usize, i: usize, j: usize, vector: &[f64]) -> Self {
        let components = vector
            .iter()
            .map(|&v| {
                let mut c = DMatrix::zeros(m, m);
                c[(i, j)] = v;
                c
            })
            .collect();
        Self::constant(components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// True only for fields built with [`DriftField::zero`].
    pub fn is_identically_zero(&self) -> bool {
        self.is_zero
    }

    pub fn eval(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        (self.eval)(x)
    }

    pub fn div_eval(&self, x: &[f64]) -> DMatrix<f64> {
        (self.div)(x)
    }

    /// Euclidean length of the vector `F_ij(x)`.
    pub fn entry_norm(components: &[DMatrix<f64>], i: usize, j: usize) -> f64 {
        components
            .iter()
            .map(|c| c[(i, j)] * c[(i, j)])
            .sum::<f64>()
            .sqrt()
    }

    /// Entrywise transpose `(F*)_ij = F_ji`.
    pub fn transpose(&self) -> Self {
        if self.is_zero {
            return Self::zero(self.dim, self.m);
        }
        let eval = self.eval.clone();
        let div = self.div.clone();
        Self::new(
            self.dim,
            self.m,
            Arc::new(move |x| eval(x).into_iter().map(|c| c.transpose()).collect()),
            Arc::new(move |x| div(x).transpose()),
        )
    }

    /// `self - other`, divergence included.
    pub fn sub(&self, other: &Self) -> Self {
        if other.is_zero {
            return self.clone();
        }
        let (ea, eb) = (self.eval.clone(), other.eval.clone());
        let (da, db) = (self.div.clone(), other.div.clone());
        Self::new(
            self.dim,
            self.m,
            Arc::new(move |x| {
                ea(x)
                    .into_iter()
                    .zip(eb(x))
                    .map(|(a, b)| a - b)
                    .collect()
            }),
            Arc::new(move |x| da(x) - db(x)),
        )
    }

    /// Largest deviation between `div_eval` and a central difference of
    /// `eval` with step `h`, over the given points.
    pub fn divergence_defect(&self, points: &[[f64; 2]], h: f64) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for p in points {
            let x = &p[..d];
            let mut fd = DMatrix::zeros(self.m, self.m);
            for k in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                fd += (&self.eval(&xp)[k] - &self.eval(&xm)[k]) / (2.0 * h);
            }
            let defect = (fd - self.div_eval(x)).amax();
            worst = worst.max(defect);
        }
        worst
    }
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .field("is_zero", &self.is_zero)
            .finish()
    }
}

/// Matrix potential `V(x)`, real `m x m`, not necessarily symmetric.
#[derive(Clone)]
pub struct PotentialField {
    m: usize,
    eval: MatrixFn,
    is_zero: bool,
}

impl PotentialField {
    pub fn new(m: usize, eval: MatrixFn) -> Self {
        Self {
            m,
            eval,
            is_zero: false,
        }
    }

    pub fn constant(v: DMatrix<f64>) -> Self {
        Self::new(v.nrows(), Arc::new(move |_| v.clone()))
    }

    pub fn zero(m: usize) -> Self {
        let z = DMatrix::zeros(m, m);
        Self {
            m,
            eval: Arc::new(move |_| z.clone()),
            is_zero: true,
        }
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn is_identically_zero(&self) -> bool {
        self.is_zero
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        (self.eval)(x)
    }

    /// `V_s = (V + V^T) / 2`.
    pub fn symmetric_part(&self, x: &[f64]) -> DMatrix<f64> {
        let v = self.eval(x);
        (&v + v.transpose()) * 0.5
    }

    /// `V_as = V - V_s`.
    pub fn antisymmetric_part(&self, x: &[f64]) -> DMatrix<f64> {
        let v = self.eval(x);
        let vs = (&v + v.transpose()) * 0.5;
        v - vs
    }

    pub fn transpose(&self) -> Self {
        if self.is_zero {
            return self.clone();
        }
        let eval = self.eval.clone();
        Self::new(self.m, Arc::new(move |x| eval(x).transpose()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self::new(self.m, Arc::new(move |x| a(x) + b(x)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let a = self.eval.clone();
        Self::new(self.m, Arc::new(move |x| a(x) * s))
    }
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialField")
            .field("m", &self.m)
            .field("is_zero", &self.is_zero)
            .finish()
    }
}

/// Diffusion floor used when a scenario asks for potential-only dynamics.
pub const DIFFUSION_FLOOR: f64 = 1e-8;

/// The coefficients `Q, F, C, V` of
/// `Lf = div(Q grad f) - F . grad f + div(C f) - V f` on a truncated box.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub q: DiffusionField,
    pub f: DriftField,
    pub c: DriftField,
    pub v: PotentialField,
    pub domain: BoxDomain,
}

impl CoefficientSet {
    pub fn new(
        q: DiffusionField,
        f: DriftField,
        c: DriftField,
        v: PotentialField,
        domain: BoxDomain,
    ) -> Result<Self, CoeffError> {
        let d = domain.dim();
        if q.dim() != d || f.dim() != d || c.dim() != d {
            return Err(CoeffError::DimensionMismatch(format!(
                "box is {d}-dimensional but Q, F, C have dimensions {}, {}, {}",
                q.dim(),
                f.dim(),
                c.dim()
            )));
        }
        let m = v.components();
        if f.components() != m || c.components() != m {
            return Err(CoeffError::DimensionMismatch(format!(
                "V has {m} components but F, C have {}, {}",
                f.components(),
                c.components()
            )));
        }
        Ok(Self { q, f, c, v, domain })
    }

    /// `Q = eps I`, `F = C = 0`: dynamics driven by the potential alone.
    pub fn potential_only(v: PotentialField, domain: BoxDomain) -> Self {
        let d = domain.dim();
        let m = v.components();
        Self {
            q: DiffusionField::scaled_identity(d, DIFFUSION_FLOOR),
            f: DriftField::zero(d, m),
            c: DriftField::zero(d, m),
            v,
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn components(&self) -> usize {
        self.v.components()
    }

    /// Coefficients of the formal adjoint
    /// `L* f = div(Q grad f) - C* . grad f + div(F* f) - V* f`.
    pub fn adjoint(&self) -> Self {
        Self {
            q: self.q.clone(),
            f: self.c.transpose(),
            c: self.f.transpose(),
            v: self.v.transpose(),
            domain: self.domain,
        }
    }

    pub fn with_potential(&self, v: PotentialField) -> Self {
        Self {
            v,
            ..self.clone()
        }
    }
}
