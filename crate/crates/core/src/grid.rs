//! Truncated tensor grids and discrete vector-valued functions.
//!
//! A [`Grid`] covers an axis-aligned box with `n_k` interior nodes per axis;
//! boundary nodes are excluded and every grid function is implicitly zero
//! there (homogeneous Dirichlet truncation). Nodes are enumerated
//! lexicographically with axis 0 slowest, and a [`GridFunction`] stores its
//! `m` components contiguously per node.

use std::fmt::Write as _;

use thiserror::Error;

/// Cutoff below which a node value counts as zero for sign and modulus
/// computations.
pub const ZERO_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid functions live on different grids or have different component counts")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid function contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid Lebesgue exponent {0}; need p > 1")]
    InvalidExponent(f64),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Axis-aligned box `[a_1,b_1] x ... x [a_d,b_d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
}

impl BoxDomain {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self, GridError> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim {
            return Err(GridError::InvalidGrid(format!(
                "box needs matching bounds in 1 or 2 dimensions, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for k in 0..dim {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(GridError::InvalidGrid(format!(
                    "axis {k}: need finite a < b, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            lo[k] = lower[k];
            hi[k] = upper[k];
        }
        Ok(Self {
            dim,
            lower: lo,
            upper: hi,
        })
    }

    /// The cube `[a, b]^dim`.
    pub fn cube(dim: usize, a: f64, b: f64) -> Result<Self, GridError> {
        Self::new(&vec![a; dim], &vec![b; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (k, ck) in c.iter_mut().enumerate().take(self.dim) {
            *ck = 0.5 * (self.lower[k] + self.upper[k]);
        }
        c
    }

    /// Smallest half-width over all axes.
    pub fn inradius(&self) -> f64 {
        (0..self.dim)
            .map(|k| 0.5 * self.width(k))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tensor grid of interior nodes on a [`BoxDomain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    n: [usize; 2],
}

impl Grid {
    pub fn new(domain: BoxDomain, n: &[usize]) -> Result<Self, GridError> {
        if n.len() != domain.dim() {
            return Err(GridError::InvalidGrid(format!(
                "{} node counts for a {}-dimensional box",
                n.len(),
                domain.dim()
            )));
        }
        let mut counts = [1; 2];
        for (k, &nk) in n.iter().enumerate() {
            if nk < 3 {
                return Err(GridError::InvalidGrid(format!(
                    "axis {k} has {nk} interior nodes; at least 3 required"
                )));
            }
            counts[k] = nk;
        }
        Ok(Self { domain, n: counts })
    }

    pub fn uniform(domain: BoxDomain, n: usize) -> Result<Self, GridError> {
        Self::new(domain, &vec![n; domain.dim()])
    }

    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        Self::new(BoxDomain::new(&[a], &[b])?, &[n])
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.width(axis) / (self.n[axis] + 1) as f64
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    /// Quadrature weight of one node, `prod_k h_k`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn node_count(&self) -> usize {
        self.n[..self.dim()].iter().product()
    }

    pub fn node_index(&self, idx: [usize; 2]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.n[1] + idx[1]
        }
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [node, 0]
        } else {
            [node / self.n[1], node % self.n[1]]
        }
    }

    /// Coordinate of the node with the given (possibly boundary) multi-index,
    /// where index `i` on an axis sits at `a + (i + 1) h`. Boundary nodes are
    /// `-1` and `n`.
    pub fn coord_of(&self, idx: [isize; 2]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (k, xk) in x.iter_mut().enumerate().take(self.dim()) {
            *xk = self.domain.lower(k) + (idx[k] + 1) as f64 * self.spacing(k);
        }
        x
    }

    pub fn coord(&self, node: usize) -> [f64; 2] {
        let idx = self.multi_index(node);
        self.coord_of([idx[0] as isize, idx[1] as isize])
    }

    /// Interior node shifted by `step` along `axis`, or `None` on the boundary.
    pub fn neighbor(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let mut idx = self.multi_index(node);
        let moved = idx[axis] as isize + step;
        if moved < 0 || moved >= self.n[axis] as isize {
            return None;
        }
        idx[axis] = moved as usize;
        Some(self.node_index(idx))
    }

    /// True if the node touches the truncation boundary along some axis.
    pub fn is_boundary_adjacent(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).any(|k| idx[k] == 0 || idx[k] + 1 == self.n[k])
    }

    /// Same box with every node count replaced by `n`.
    pub fn with_nodes(&self, n: usize) -> Result<Self, GridError> {
        Self::uniform(self.domain, n)
    }
}

/// Lebesgue exponent `p` in `(1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Finite(f64),
    Infinity,
}

impl NormKind {
    pub fn finite(p: f64) -> Result<Self, GridError> {
        if p.is_finite() && p > 1.0 {
            Ok(Self::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Err(GridError::InvalidExponent(p))
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Self::Finite(p) => *p,
            Self::Infinity => f64::INFINITY,
        }
    }

    /// Conjugate exponent `p' = p / (p - 1)`, with `p' = 1` for `p = inf`.
    pub fn dual_exponent(&self) -> f64 {
        match self {
            Self::Finite(p) => p / (p - 1.0),
            Self::Infinity => 1.0,
        }
    }
}

/// A real `m`-vector per interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        Self {
            grid,
            m,
            values: vec![0.0; grid.node_count() * m],
        }
    }

    pub fn from_values(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = grid.node_count() * m;
        if values.len() != expected {
            return Err(GridError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, m, values })
    }

    /// Samples `f` at every node; `f` writes the `m` components into its
    /// output slice.
    pub fn from_fn(grid: Grid, m: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, m);
        let d = grid.dim();
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            f(&x[..d], &mut out.values[node * m..(node + 1) * m]);
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.m..(node + 1) * self.m]
    }

    /// Value of component `c` at `node`, or zero outside the grid.
    pub fn value_or_zero(&self, node: Option<usize>, c: usize) -> f64 {
        node.map_or(0.0, |n| self.values[n * self.m + c])
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.m == other.m && self.grid == other.grid
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, GridError> {
        Self::from_values(self.grid, self.m, values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            m: self.m,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        if !self.same_space(other) {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            m: self.m,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Euclidean modulus of the value at `node`.
    pub fn modulus_at(&self, node: usize) -> f64 {
        self.at(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Central difference of component `c` along `axis` at `node`, treating
    /// boundary values as zero.
    pub fn central_difference(&self, node: usize, c: usize, axis: usize) -> f64 {
        let up = self.value_or_zero(self.grid.neighbor(node, axis, 1), c);
        let down = self.value_or_zero(self.grid.neighbor(node, axis, -1), c);
        (up - down) / (2.0 * self.grid.spacing(axis))
    }

    /// Smallest component value over all nodes.
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Writes the function as CSV: `x1[,x2],f1,...,fm`, one row per node.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=d)
            .map(|k| format!("x{k}"))
            .chain((1..=self.m).map(|j| format!("f{j}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for node in 0..self.grid.node_count() {
            let x = self.grid.coord(node);
            let row: Vec<String> = x[..d]
                .iter()
                .chain(self.at(node))
                .map(|v| format!("{v:.15e}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Reads the CSV written by [`GridFunction::to_csv`] back onto `grid`.
    /// Coordinates are checked against the grid node positions.
    pub fn from_csv(grid: Grid, text: &str) -> Result<Self, GridError> {
        let d = grid.dim();
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(GridError::Csv {
            line: 1,
            msg: "missing header".into(),
        })?;
        let columns = header.split(',').count();
        if columns <= d {
            return Err(GridError::Csv {
                line: hline + 1,
                msg: format!("expected more than {d} columns"),
            });
        }
        let m = columns - d;
        let mut values = Vec::with_capacity(grid.node_count() * m);
        let mut node = 0;
        for (lineno, line) in lines {
            let fields: Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let fields = fields.map_err(|e| GridError::Csv {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            if fields.len() != columns {
                return Err(GridError::Csv {
                    line: lineno + 1,
                    msg: format!("expected {columns} fields, got {}", fields.len()),
                });
            }
            if node >= grid.node_count() {
                return Err(GridError::Csv {
                    line: lineno + 1,
                    msg: "more rows than grid nodes".into(),
                });
            }
            let x = grid.coord(node);
            for k in 0..d {
                if (fields[k] - x[k]).abs() > 1e-9 * (1.0 + x[k].abs()) {
                    return Err(GridError::Csv {
                        line: lineno + 1,
                        msg: format!("coordinate {} does not match node {}", fields[k], x[k]),
                    });
                }
            }
            values.extend_from_slice(&fields[d..]);
            node += 1;
        }
        Self::from_values(grid, m, values)
    }
}

/// Discrete `L^p` norm `(prod h_k * sum_x |f(x)|^p)^(1/p)`; for `p = inf` the
/// largest nodal modulus.
pub fn lp_norm(f: &GridFunction, p: NormKind) -> f64 {
    let nodes = f.grid.node_count();
    match p {
        NormKind::Infinity => (0..nodes).map(|n| f.modulus_at(n)).fold(0.0, f64::max),
        NormKind::Finite(p) => {
            let sum: f64 = (0..nodes).map(|n| f.modulus_at(n).powf(p)).sum();
            (f.grid.cell_volume() * sum).powf(1.0 / p)
        }
    }
}

pub fn l2_norm(f: &GridFunction) -> f64 {
    let sum: f64 = f.values.iter().map(|v| v * v).sum();
    (f.grid.cell_volume() * sum).sqrt()
}

/// Duality product `prod h_k * sum_x <f(x), g(x)>`.
pub fn pairing(f: &GridFunction, g: &GridFunction) -> Result<f64, GridError> {
    if !f.same_space(g) {
        return Err(GridError::GridMismatch);
    }
    Ok(f.grid.cell_volume() * dot(&f.values, &g.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nodal modulus `|f|` together with `grad |f| = sum_j f_j grad f_j / |f|`,
/// which is set to zero where `|f| <= ZERO_CUTOFF`.
pub fn modulus_and_gradient(f: &GridFunction) -> (GridFunction, Vec<[f64; 2]>) {
    let grid = f.grid;
    let nodes = grid.node_count();
    let mut modulus = GridFunction::zeros(grid, 1);
    let mut grad = vec![[0.0; 2]; nodes];
    for node in 0..nodes {
        let r = f.modulus_at(node);
        modulus.values[node] = r;
        if r <= ZERO_CUTOFF {
            continue;
        }
        for (k, gk) in grad[node].iter_mut().enumerate().take(grid.dim()) {
            let s: f64 = (0..f.m)
                .map(|j| f.at(node)[j] * f.central_difference(node, j, k))
                .sum();
            *gk = s / r;
        }
    }
    (modulus, grad)
}

/// Projection onto the pointwise unit ball, `(1 ^ |f|) sign(f)`.
pub fn ouhabaz_projection(f: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zeros(f.grid, f.m);
    for node in 0..f.grid.node_count() {
        let r = f.modulus_at(node);
        if r <= ZERO_CUTOFF {
            continue;
        }
        let s = r.min(1.0) / r;
        for (o, v) in out.at_mut(node).iter_mut().zip(f.at(node)) {
            *o = s * v;
        }
    }
    out
}

/// Componentwise `f+ = max(0, f)` and `f- = f - f+`, so `f- <= 0`.
pub fn positive_negative_parts(f: &GridFunction) -> (GridFunction, GridFunction) {
    let plus: Vec<f64> = f.values.iter().map(|&v| v.max(0.0)).collect();
    let minus: Vec<f64> = f.values.iter().zip(&plus).map(|(v, p)| v - p).collect();
    (
        GridFunction {
            grid: f.grid,
            m: f.m,
            values: plus,
        },
        GridFunction {
            grid: f.grid,
            m: f.m,
            values: minus,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid3() -> Grid {
        Grid::interval(0.0, 1.0, 3).unwrap()
    }

    #[test]
    fn grid_rejects_too_few_nodes() {
        assert!(Grid::interval(0.0, 1.0, 2).is_err());
        assert!(BoxDomain::new(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn spacing_and_coordinates() {
        let g = unit_grid3();
        assert_eq!(g.spacing(0), 0.25);
        assert_eq!(g.coord(0)[0], 0.25);
        assert_eq!(g.coord(2)[0], 0.75);
        let g2 = Grid::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), &[3, 4]).unwrap();
        assert_eq!(g2.node_count(), 12);
        let node = g2.node_index([1, 2]);
        assert_eq!(g2.multi_index(node), [1, 2]);
        assert_eq!(g2.neighbor(node, 1, 1), Some(g2.node_index([1, 3])));
        assert_eq!(g2.neighbor(g2.node_index([1, 3]), 1, 1), None);
    }

    #[test]
    fn lp_norm_examples() {
        let g = unit_grid3();
        let zero = GridFunction::zeros(g, 2);
        assert_eq!(lp_norm(&zero, NormKind::finite(2.0).unwrap()), 0.0);
        let ones = GridFunction::from_values(g, 1, vec![1.0; 3]).unwrap();
        let l2 = lp_norm(&ones, NormKind::finite(2.0).unwrap());
        assert!((l2 - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&ones, NormKind::Infinity), 1.0);
        assert!((l2_norm(&ones) - l2).abs() < 1e-15);
    }

    #[test]
    fn exponent_validation() {
        assert!(NormKind::finite(1.0).is_err());
        assert!(NormKind::finite(f64::NAN).is_err());
        let p = NormKind::finite(3.0).unwrap();
        let q = p.dual_exponent();
        assert!((1.0 / 3.0 + 1.0 / q - 1.0).abs() < 1e-15);
        assert_eq!(NormKind::finite(f64::INFINITY).unwrap(), NormKind::Infinity);
    }

    #[test]
    fn pairing_orthogonal_components() {
        let g = unit_grid3();
        let f = GridFunction::from_fn(g, 2, |x, out| {
            out[0] = x[0];
            out[1] = 0.0;
        });
        let h = GridFunction::from_fn(g, 2, |x, out| {
            out[0] = 0.0;
            out[1] = 1.0 + x[0];
        });
        assert_eq!(pairing(&f, &h).unwrap(), 0.0);
        let n = l2_norm(&f);
        assert!((pairing(&f, &f).unwrap() - n * n).abs() < 1e-15);
        let other = GridFunction::zeros(Grid::interval(0.0, 2.0, 3).unwrap(), 2);
        assert_eq!(pairing(&f, &other), Err(GridError::GridMismatch));
    }

    #[test]
    fn projection_examples() {
        let g = unit_grid3();
        let f = GridFunction::from_values(g, 2, vec![3.0, 4.0, 0.1, -0.2, 0.0, 0.0]).unwrap();
        let p = ouhabaz_projection(&f);
        assert!((p.at(0)[0] - 0.6).abs() < 1e-15);
        assert!((p.at(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(p.at(1), f.at(1));
        assert_eq!(p.at(2), &[0.0, 0.0]);
    }

    #[test]
    fn parts_example() {
        let g = unit_grid3();
        let f = GridFunction::from_values(g, 2, vec![1.0, -2.0, 0.0, 0.0, -1.0, 3.0]).unwrap();
        let (p, n) = positive_negative_parts(&f);
        assert_eq!(p.at(0), &[1.0, 0.0]);
        assert_eq!(n.at(0), &[0.0, -2.0]);
        assert_eq!(p.at(2), &[0.0, 3.0]);
        assert_eq!(n.at(2), &[-1.0, 0.0]);
    }

    #[test]
    fn modulus_gradient_constant_and_scalar() {
        let g = Grid::interval(0.0, 1.0, 9).unwrap();
        let f = GridFunction::from_fn(g, 1, |x, out| out[0] = 1.0 + x[0] * x[0]);
        let (r, grad) = modulus_and_gradient(&f);
        for node in 0..g.node_count() {
            assert_eq!(r.at(node)[0], f.at(node)[0]);
            let d = f.central_difference(node, 0, 0);
            assert!((grad[node][0] - d).abs() <= 1e-15 * d.abs().max(1.0));
        }
        let c = GridFunction::from_fn(g, 2, |_, out| {
            out[0] = 0.3;
            out[1] = -0.4;
        });
        let (_, grad) = modulus_and_gradient(&c);
        for node in 0..g.node_count() {
            if !g.is_boundary_adjacent(node) {
                assert_eq!(grad[node][0], 0.0);
            }
        }
    }

    #[test]
    fn csv_roundtrip_2d() {
        let g = Grid::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), &[3, 4]).unwrap();
        let f = GridFunction::from_fn(g, 2, |x, out| {
            out[0] = x[0].sin();
            out[1] = x[0] * x[1];
        });
        let text = f.to_csv();
        assert!(text.starts_with("x1,x2,f1,f2\n"));
        let back = GridFunction::from_csv(g, &text).unwrap();
        assert!(back
            .values()
            .iter()
            .zip(f.values())
            .all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + b.abs())));
    }
}
