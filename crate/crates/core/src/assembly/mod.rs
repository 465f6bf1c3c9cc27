//! Discrete operator `L_h`, its pieces, the formal adjoint and the discrete
//! sesquilinear form.
//!
//! The diffusion piece is built from an edge energy: every grid edge `e`
//! (axis edges and, in 2D, one cell diagonal per cell) carries a weight
//! `w_e` and contributes `vol * w_e * (f_p - f_q)(g_p - g_q)` to the form,
//! with zero values outside the box. Writing
//! `<Q xi, xi> = (q11 - |q12| r) xi1^2 + (q22 - |q12| / r) xi2^2 + |q12| (xi1 +- xi2 / r)^2 r`
//! with `r = h1 / h2` turns the mixed derivative into a second difference
//! along the cell diagonal matching the sign of `q12`, so the stencil keeps
//! nonpositive off-diagonal entries whenever `q_kk >= |q12| h_k / h_l`.
//! First-order terms use central differences.

mod sparse;

pub use sparse::{SparseOperator, TripletBuilder};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::coeffs::{CoefficientSet, DiffusionField, DriftField, PotentialField};
use crate::grid::{dot, Grid, GridError, GridFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("coefficient set is {coeff}-dimensional but the grid is {grid}-dimensional")]
    DimensionMismatch { coeff: usize, grid: usize },
    #[error("hypotheses not verified: {0}")]
    HypothesisNotVerified(String),
}

fn check_dims(coeffs: &CoefficientSet, grid: &Grid) -> Result<(), AssemblyError> {
    if coeffs.dim() != grid.dim() {
        return Err(AssemblyError::DimensionMismatch {
            coeff: coeffs.dim(),
            grid: grid.dim(),
        });
    }
    Ok(())
}

/// One energy edge between two lattice points; `None` marks a point on or
/// outside the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub weight: f64,
}

/// Edge weights of the diffusion energy for a scalar component.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEdges {
    pub edges: Vec<Edge>,
    /// `min w_e h_k^2` over axis edges: a discrete ellipticity constant for
    /// the forward differences.
    pub axis_floor: f64,
}

fn lattice_node(grid: &Grid, idx: [isize; 2]) -> Option<usize> {
    for k in 0..grid.dim() {
        if idx[k] < 0 || idx[k] >= grid.n(k) as isize {
            return None;
        }
    }
    Some(grid.node_index([idx[0] as usize, idx[1] as usize]))
}

fn midpoint(grid: &Grid, a: [isize; 2], b: [isize; 2]) -> [f64; 2] {
    let xa = grid.coord_of(a);
    let xb = grid.coord_of(b);
    [0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1])]
}

impl DiffusionEdges {
    pub fn new(q: &DiffusionField, grid: &Grid) -> Self {
        let d = grid.dim();
        let mut edges = Vec::new();
        let mut axis_floor = f64::INFINITY;
        let h = [grid.spacing(0), if d == 2 { grid.spacing(1) } else { 1.0 }];
        let ratio = [h[0] / h[1], h[1] / h[0]];
        let n = [grid.n(0) as isize, if d == 2 { grid.n(1) as isize } else { 1 }];
        for axis in 0..d {
            let other = 1 - axis;
            let span_other = if d == 2 { 0..n[other] } else { 0..1 };
            for j in span_other {
                for i in -1..n[axis] {
                    let mut a = [0isize; 2];
                    a[axis] = i;
                    a[other] = j;
                    let mut b = a;
                    b[axis] += 1;
                    let x = midpoint(grid, a, b);
                    let qx = q.eval(&x[..d]);
                    let mut w = qx[(axis, axis)];
                    if d == 2 {
                        w -= qx[(0, 1)].abs() * ratio[axis];
                    }
                    axis_floor = axis_floor.min(w);
                    w /= h[axis] * h[axis];
                    edges.push(Edge {
                        a: lattice_node(grid, a),
                        b: lattice_node(grid, b),
                        weight: w,
                    });
                }
            }
        }
        if d == 2 {
            for i in -1..n[0] {
                for j in -1..n[1] {
                    let x = midpoint(grid, [i, j], [i + 1, j + 1]);
                    let q12 = q.eval(&x)[(0, 1)];
                    if q12 == 0.0 {
                        continue;
                    }
                    let (a, b) = if q12 > 0.0 {
                        ([i, j], [i + 1, j + 1])
                    } else {
                        ([i + 1, j], [i, j + 1])
                    };
                    let (na, nb) = (lattice_node(grid, a), lattice_node(grid, b));
                    if na.is_none() && nb.is_none() {
                        continue;
                    }
                    edges.push(Edge {
                        a: na,
                        b: nb,
                        weight: q12.abs() / (h[0] * h[1]),
                    });
                }
            }
        }
        Self { edges, axis_floor }
    }

    /// `sum_e w_e (f_a - f_b)(g_a - g_b)` for component `c` (no volume
    /// factor).
    pub fn energy(&self, f: &GridFunction, g: &GridFunction, c: usize) -> f64 {
        let mut s = 0.0;
        for e in &self.edges {
            let df = f.value_or_zero(e.a, c) - f.value_or_zero(e.b, c);
            let dg = g.value_or_zero(e.a, c) - g.value_or_zero(e.b, c);
            s += e.weight * df * dg;
        }
        s
    }
}

/// Conservative diffusion stencil `div(Q grad f_i)`, replicated across the
/// `m` components.
pub fn assemble_diffusion(q: &DiffusionField, grid: &Grid, m: usize) -> SparseOperator {
    let edges = DiffusionEdges::new(q, grid);
    diffusion_from_edges(&edges, grid, m)
}

fn diffusion_from_edges(edges: &DiffusionEdges, grid: &Grid, m: usize) -> SparseOperator {
    let mut t = TripletBuilder::new(grid.node_count(), m);
    for e in &edges.edges {
        let w = e.weight;
        for c in 0..m {
            match (e.a, e.b) {
                (Some(a), Some(b)) => {
                    t.push(a * m + c, a * m + c, -w);
                    t.push(b * m + c, b * m + c, -w);
                    t.push(a * m + c, b * m + c, w);
                    t.push(b * m + c, a * m + c, w);
                }
                (Some(a), None) | (None, Some(a)) => t.push(a * m + c, a * m + c, -w),
                (None, None) => {}
            }
        }
    }
    t.build("diffusion")
}

fn push_gradient(t: &mut TripletBuilder, grid: &Grid, node: usize, blocks: &[DMatrix<f64>], m: usize) {
    for (k, block) in blocks.iter().enumerate().take(grid.dim()) {
        let scale = 1.0 / (2.0 * grid.spacing(k));
        for (step, sign) in [(1isize, 1.0), (-1, -1.0)] {
            if let Some(nb) = grid.neighbor(node, k, step) {
                for i in 0..m {
                    for j in 0..m {
                        t.push(node * m + i, nb * m + j, sign * scale * block[(i, j)]);
                    }
                }
            }
        }
    }
}

/// Matrix of `f -> F . grad f` with central differences; enters `L_h` with
/// a minus sign.
pub fn assemble_drift_gradient(f: &DriftField, grid: &Grid) -> SparseOperator {
    let m = f.components();
    let mut t = TripletBuilder::new(grid.node_count(), m);
    if !f.is_identically_zero() {
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            let blocks = f.eval(&x[..grid.dim()]);
            push_gradient(&mut t, grid, node, &blocks, m);
        }
    }
    t.build("drift")
}

/// Matrix of `f -> div(C f) = C . grad f + div(C) f`.
pub fn assemble_div_c(c: &DriftField, grid: &Grid) -> SparseOperator {
    let m = c.components();
    let mut t = TripletBuilder::new(grid.node_count(), m);
    if !c.is_identically_zero() {
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            let x = &x[..grid.dim()];
            push_gradient(&mut t, grid, node, &c.eval(x), m);
            let dc = c.div_eval(x);
            for i in 0..m {
                for j in 0..m {
                    t.push(node * m + i, node * m + j, dc[(i, j)]);
                }
            }
        }
    }
    t.build("div_c")
}

/// Matrix of `f -> -V f` (nodal block multiplication).
pub fn assemble_potential(v: &PotentialField, grid: &Grid) -> SparseOperator {
    let m = v.components();
    let mut t = TripletBuilder::new(grid.node_count(), m);
    if !v.is_identically_zero() {
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            let vx = v.eval(&x[..grid.dim()]);
            for i in 0..m {
                for j in 0..m {
                    t.push(node * m + i, node * m + j, -vx[(i, j)]);
                }
            }
        }
    }
    t.build("potential")
}

/// `L_h = diffusion - drift(F) + div_c(C) + potential(V)`.
pub fn assemble_l(coeffs: &CoefficientSet, grid: &Grid) -> Result<SparseOperator, AssemblyError> {
    check_dims(coeffs, grid)?;
    let m = coeffs.components();
    let diff = assemble_diffusion(&coeffs.q, grid, m);
    let drift = assemble_drift_gradient(&coeffs.f, grid);
    let divc = assemble_div_c(&coeffs.c, grid);
    let pot = assemble_potential(&coeffs.v, grid);
    Ok(diff
        .sub(&drift)
        .add(&divc)
        .add(&pot)
        .with_pieces("diffusion-drift+div_c+potential"))
}

/// `L*_h`, assembled from the adjoint coefficients
/// `(Q, C^T, F^T, V^T)` rather than by transposing `L_h`.
pub fn assemble_adjoint(coeffs: &CoefficientSet, grid: &Grid) -> Result<SparseOperator, AssemblyError> {
    Ok(assemble_l(&coeffs.adjoint(), grid)?.with_pieces("adjoint"))
}

/// Values of the discrete form and its split `a = a0 + b + v_term`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormValue {
    pub a: f64,
    /// Diffusion energy plus the `V_s` term.
    pub a0: f64,
    /// First-order terms from `F` and `C`.
    pub b: f64,
    /// The `V_as` term.
    pub v_term: f64,
}

/// Discrete sesquilinear form `a_h(f, g)` with `a_h(f, g) = -<L_h f, g>`.
///
/// Nodal quadrature; the `C` term is taken in the product-rule form
/// `-(C . grad f + div(C) f) g` so that it matches the operator exactly.
#[derive(Debug, Clone)]
pub struct FormEvaluator {
    grid: Grid,
    m: usize,
    edges: DiffusionEdges,
    drift: Vec<Vec<DMatrix<f64>>>,
    conv: Vec<Vec<DMatrix<f64>>>,
    div_c: Vec<DMatrix<f64>>,
    vs: Vec<DMatrix<f64>>,
    vas: Vec<DMatrix<f64>>,
    has_drift: bool,
    has_c: bool,
}

impl FormEvaluator {
    pub fn new(coeffs: &CoefficientSet, grid: &Grid) -> Result<Self, AssemblyError> {
        check_dims(coeffs, grid)?;
        let d = grid.dim();
        let nodes = grid.node_count();
        let mut drift = Vec::with_capacity(nodes);
        let mut conv = Vec::with_capacity(nodes);
        let mut div_c = Vec::with_capacity(nodes);
        let mut vs = Vec::with_capacity(nodes);
        let mut vas = Vec::with_capacity(nodes);
        let has_drift = !coeffs.f.is_identically_zero();
        let has_c = !coeffs.c.is_identically_zero();
        for node in 0..nodes {
            let x = grid.coord(node);
            let x = &x[..d];
            if has_drift {
                drift.push(coeffs.f.eval(x));
            }
            if has_c {
                conv.push(coeffs.c.eval(x));
                div_c.push(coeffs.c.div_eval(x));
            }
            vs.push(coeffs.v.symmetric_part(x));
            vas.push(coeffs.v.antisymmetric_part(x));
        }
        Ok(Self {
            grid: *grid,
            m: coeffs.components(),
            edges: DiffusionEdges::new(&coeffs.q, grid),
            drift,
            conv,
            div_c,
            vs,
            vas,
            has_drift,
            has_c,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    fn check(&self, f: &GridFunction) -> Result<(), GridError> {
        if f.grid() != &self.grid || f.components() != self.m {
            return Err(GridError::GridMismatch);
        }
        Ok(())
    }

    fn first_order(&self, blocks: &[DMatrix<f64>], f: &GridFunction, node: usize, i: usize) -> f64 {
        let mut s = 0.0;
        for (k, block) in blocks.iter().enumerate() {
            for j in 0..self.m {
                let b = block[(i, j)];
                if b != 0.0 {
                    s += b * f.central_difference(node, j, k);
                }
            }
        }
        s
    }

    pub fn form_value(&self, f: &GridFunction, g: &GridFunction) -> Result<FormValue, GridError> {
        self.check(f)?;
        self.check(g)?;
        let vol = self.grid.cell_volume();
        let m = self.m;
        let mut energy = 0.0;
        for c in 0..m {
            energy += self.edges.energy(f, g, c);
        }
        let mut pot_s = 0.0;
        let mut pot_as = 0.0;
        let mut first = 0.0;
        let mut fv = vec![0.0; m];
        for node in 0..self.grid.node_count() {
            let fx = f.at(node);
            let gx = g.at(node);
            for i in 0..m {
                let mut s = 0.0;
                let mut a = 0.0;
                for j in 0..m {
                    s += self.vs[node][(i, j)] * fx[j];
                    a += self.vas[node][(i, j)] * fx[j];
                }
                pot_s += s * gx[i];
                pot_as += a * gx[i];
            }
            if self.has_drift || self.has_c {
                for (i, slot) in fv.iter_mut().enumerate() {
                    let mut v = 0.0;
                    if self.has_drift {
                        v += self.first_order(&self.drift[node], f, node, i);
                    }
                    if self.has_c {
                        v -= self.first_order(&self.conv[node], f, node, i);
                        for j in 0..m {
                            v -= self.div_c[node][(i, j)] * fx[j];
                        }
                    }
                    *slot = v;
                }
                first += dot(&fv, gx);
            }
        }
        let a0 = vol * (energy + pot_s);
        let b = vol * first;
        let v_term = vol * pot_as;
        Ok(FormValue {
            a: a0 + b + v_term,
            a0,
            b,
            v_term,
        })
    }

    /// `a_h(f, f)`.
    pub fn quadratic(&self, f: &GridFunction) -> Result<FormValue, GridError> {
        self.form_value(f, f)
    }

    /// `a_h(u, u)` for complex `u = re + i im`, returned as `(Re, Im)`.
    pub fn complex_quadratic(&self, re: &GridFunction, im: &GridFunction) -> Result<(f64, f64), GridError> {
        let rr = self.form_value(re, re)?.a;
        let ii = self.form_value(im, im)?.a;
        let ir = self.form_value(im, re)?.a;
        let ri = self.form_value(re, im)?.a;
        Ok((rr + ii, ir - ri))
    }

    /// `a0_h(f, f) + |f|_2^2`, the squared form norm.
    pub fn form_norm_sq(&self, f: &GridFunction) -> Result<f64, GridError> {
        let a0 = self.form_value(f, f)?.a0;
        let l2 = crate::grid::l2_norm(f);
        Ok(a0 + l2 * l2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::presets::PresetRegistry;
    use crate::grid::{pairing, BoxDomain};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn random_fn(grid: Grid, m: usize, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..grid.node_count() * m).map(|_| StandardNormal.sample(rng)).collect();
        GridFunction::from_values(grid, m, v).unwrap()
    }

    #[test]
    fn laplacian_1d_stencil() {
        let g = Grid::interval(0.0, 2.0, 3).unwrap();
        let op = assemble_diffusion(&DiffusionField::scaled_identity(1, 1.0), &g, 1);
        assert_eq!(op.get(1, 0), 4.0);
        assert_eq!(op.get(1, 1), -8.0);
        assert_eq!(op.get(1, 2), 4.0);
        let op2 = assemble_diffusion(&DiffusionField::scaled_identity(1, 2.0), &g, 1);
        assert_eq!(op2.max_abs_diff(&op.scaled(2.0)), 0.0);
    }

    #[test]
    fn variable_diffusion_midpoints() {
        let q = DiffusionField::new(
            1,
            Arc::new(|x: &[f64]| DMatrix::from_element(1, 1, 1.0 + x[0] * x[0])),
            Arc::new(|x: &[f64]| vec![DMatrix::from_element(1, 1, 2.0 * x[0])]),
        );
        let g = Grid::interval(0.0, 1.0, 3).unwrap();
        let op = assemble_diffusion(&q, &g, 1);
        let qm = |x: f64| (1.0 + x * x) * 16.0;
        assert_eq!(op.get(1, 0), qm(0.375));
        assert_eq!(op.get(1, 2), qm(0.625));
        assert_eq!(op.get(1, 1), -(qm(0.375) + qm(0.625)));
        assert!(op.is_symmetric());
        // interior rows of the Neumann variant (boundary edges removed) sum to zero
        let row_sum: f64 = op.row(1).map(|(_, v)| v).sum();
        assert!(row_sum.abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_fn(g, 1, &mut rng);
        let h = random_fn(g, 1, &mut rng);
        let lhs = pairing(&op.apply(&f).unwrap(), &h).unwrap();
        let rhs = pairing(&f, &op.apply(&h).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs().max(1.0));
    }

    #[test]
    fn diffusion_2d_is_symmetric_and_consistent() {
        let reg = PresetRegistry::standard();
        let dom = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let c = reg.get("trig-2d").unwrap().build(&dom).unwrap();
        let g = Grid::uniform(dom, 24).unwrap();
        let op = assemble_diffusion(&c.q, &g, 2);
        assert!(op.is_symmetric());
        // M-matrix sign pattern for diagonally dominant Q
        for i in 0..op.dim() {
            for (j, v) in op.row(i) {
                if i != j {
                    assert!(v >= 0.0);
                }
            }
        }
        // consistency on a smooth function: div(Q grad u) for u = exp(-|x|^2)
        let exact = |x: &[f64]| {
            let (s, co) = x[0].sin_cos();
            let u = (-(x[0] * x[0] + x[1] * x[1])).exp();
            let (ux, uy) = (-2.0 * x[0] * u, -2.0 * x[1] * u);
            let uxx = (4.0 * x[0] * x[0] - 2.0) * u;
            let uyy = (4.0 * x[1] * x[1] - 2.0) * u;
            let uxy = 4.0 * x[0] * x[1] * u;
            (2.0 + s) * uxx + co * ux + 2.0 * 0.5 * uxy + (2.0 - s) * uyy + 0.0 * uy
        };
        let wide = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let c = reg.get("trig-2d").unwrap().build(&wide).unwrap();
        let mut errs = Vec::new();
        for n in [31usize, 63] {
            let g = Grid::uniform(wide, n).unwrap();
            let op = assemble_diffusion(&c.q, &g, 1);
            let u = GridFunction::from_fn(g, 1, |x, o| o[0] = (-(x[0] * x[0] + x[1] * x[1])).exp());
            let lu = op.apply(&u).unwrap();
            let mut e: f64 = 0.0;
            for node in 0..g.node_count() {
                let x = g.coord(node);
                e = e.max((lu.at(node)[0] - exact(&x)).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn drift_and_divergence_stencils() {
        let g = Grid::interval(0.0, 2.0, 3).unwrap();
        let f = DriftField::single_entry(1, 0, 0, &[1.0]);
        let op = assemble_drift_gradient(&f, &g);
        assert_eq!((op.get(1, 0), op.get(1, 1), op.get(1, 2)), (-1.0, 0.0, 1.0));
        assert_eq!(assemble_drift_gradient(&DriftField::zero(1, 1), &g).nnz(), 0);
        // constant C: div_c equals the gradient matrix
        assert_eq!(assemble_div_c(&f, &g).max_abs_diff(&op), 0.0);
        // block pattern with only F_12
        let g = Grid::interval(0.0, 1.0, 5).unwrap();
        let f12 = DriftField::single_entry(2, 0, 1, &[1.0]);
        let op = assemble_drift_gradient(&f12, &g);
        for i in 0..op.dim() {
            for (j, _) in op.row(i) {
                assert_eq!(i % 2, 0);
                assert_eq!(j % 2, 1);
            }
        }
    }

    #[test]
    fn potential_values() {
        let g = Grid::interval(0.0, 1.0, 3).unwrap();
        let v = PotentialField::new(
            2,
            Arc::new(|x: &[f64]| DMatrix::identity(2, 2) * (x[0] * x[0])),
        );
        let op = assemble_potential(&v, &g);
        let want = [0.0625, 0.25, 0.5625];
        for (node, w) in want.iter().enumerate() {
            for c in 0..2 {
                assert_eq!(op.get(2 * node + c, 2 * node + c), -w);
            }
        }
        let id = assemble_potential(&PotentialField::constant(DMatrix::identity(2, 2)), &g);
        assert_eq!(id.max_abs_diff(&SparseOperator::identity(3, 2).scaled(-1.0)), 0.0);
    }

    #[test]
    fn form_matches_operator_on_all_presets() {
        let reg = PresetRegistry::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in reg.iter() {
            for &d in p.dims() {
                let dom = BoxDomain::cube(d, -3.0, 3.0).unwrap();
                let c = p.build(&dom).unwrap();
                let g = Grid::uniform(dom, if d == 1 { 40 } else { 12 }).unwrap();
                let l = assemble_l(&c, &g).unwrap();
                let form = FormEvaluator::new(&c, &g).unwrap();
                for _ in 0..5 {
                    let f = random_fn(g, c.components(), &mut rng);
                    let h = random_fn(g, c.components(), &mut rng);
                    let fv = form.form_value(&f, &h).unwrap();
                    let op = -pairing(&l.apply(&f).unwrap(), &h).unwrap();
                    let scale = crate::grid::l2_norm(&f) * crate::grid::l2_norm(&h) * l.max_abs();
                    assert!((fv.a - op).abs() <= 1e-12 * scale, "{}: {} vs {}", p.name(), fv.a, op);
                    assert_eq!(fv.a, fv.a0 + fv.b + fv.v_term);
                }
            }
        }
    }

    #[test]
    fn self_adjoint_case_exact() {
        let reg = PresetRegistry::standard();
        for name in ["identity", "confining-quadratic", "coupling-positive-v12"] {
            let dom = BoxDomain::cube(2, -2.0, 2.0).unwrap();
            let c = reg.get(name).unwrap().build(&dom).unwrap();
            let g = Grid::uniform(dom, 9).unwrap();
            let l = assemble_l(&c, &g).unwrap();
            let la = assemble_adjoint(&c, &g).unwrap();
            assert_eq!(l.max_abs_diff(&la), 0.0);
            assert!(l.is_symmetric());
        }
    }

    #[test]
    fn potential_only_adjoint_is_transpose() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let v = PotentialField::constant(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 1.0]));
        let c = CoefficientSet::potential_only(v, dom);
        let g = Grid::uniform(dom, 5).unwrap();
        let pot = assemble_potential(&c.v, &g);
        let pot_t = assemble_potential(&c.v.transpose(), &g);
        assert_eq!(pot.transpose().max_abs_diff(&pot_t), 0.0);
        let l = assemble_l(&c, &g).unwrap();
        let la = assemble_adjoint(&c, &g).unwrap();
        assert_eq!(l.transpose().max_abs_diff(&la), 0.0);
    }

    #[test]
    fn pieces_are_additive() {
        let reg = PresetRegistry::standard();
        let dom = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let c = reg.get("trig-2d").unwrap().build(&dom).unwrap();
        let g = Grid::uniform(dom, 8).unwrap();
        let full = assemble_l(&c, &g).unwrap();
        let doubled_v = c.with_potential(c.v.scaled(2.0));
        let diff = assemble_l(&doubled_v, &g).unwrap().sub(&full);
        assert!(diff.max_abs_diff(&assemble_potential(&c.v, &g)) < 1e-14);
    }

    #[test]
    fn triplet_export_header() {
        let g = Grid::interval(0.0, 1.0, 3).unwrap();
        let op = assemble_diffusion(&DiffusionField::scaled_identity(1, 1.0), &g, 1);
        let text = op.to_triplet_text();
        assert!(text.starts_with("3 7\n"));
        assert_eq!(text.lines().count(), 8);
    }
}
