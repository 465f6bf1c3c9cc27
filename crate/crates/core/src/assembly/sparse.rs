use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::grid::{GridError, GridFunction};

/// Accumulates `(row, col, value)` entries; duplicates are summed in
/// insertion order and exact zeros are dropped on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nodes: usize,
    m: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nodes: usize, m: usize) -> Self {
        Self {
            nodes,
            m,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn build(mut self, pieces: &str) -> SparseOperator {
        let n = self.nodes * self.m;
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut k = 0;
        while k < self.entries.len() {
            let (r, c, mut v) = self.entries[k];
            k += 1;
            while k < self.entries.len() && self.entries[k].0 == r && self.entries[k].1 == c {
                v += self.entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            nodes: self.nodes,
            m: self.m,
            row_ptr,
            col_idx,
            values,
            pieces: pieces.to_string(),
        }
    }
}

/// Square sparse matrix in compressed-row form acting on blocked grid
/// unknowns (`m` components per node, index `node * m + component`).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nodes: usize,
    m: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    pieces: String,
}

impl SparseOperator {
    pub fn zero(nodes: usize, m: usize, pieces: &str) -> Self {
        TripletBuilder::new(nodes, m).build(pieces)
    }

    pub fn identity(nodes: usize, m: usize) -> Self {
        let mut t = TripletBuilder::new(nodes, m);
        for i in 0..nodes * m {
            t.push(i, i, 1.0);
        }
        t.build("identity")
    }

    pub fn dim(&self) -> usize {
        self.nodes * self.m
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Which pieces the matrix contains, e.g. `"diffusion+drift"`.
    pub fn pieces(&self) -> &str {
        &self.pieces
    }

    pub fn with_pieces(mut self, pieces: &str) -> Self {
        self.pieces = pieces.to_string();
        self
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction, GridError> {
        if f.len() != self.dim() || f.components() != self.m {
            return Err(GridError::GridMismatch);
        }
        f.with_values(self.matvec(f.values()))
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        let mut t = TripletBuilder::new(self.nodes, self.m);
        for (i, j, v) in self.triplets() {
            t.push(i, j, alpha * v);
        }
        for (i, j, v) in other.triplets() {
            t.push(i, j, beta * v);
        }
        t.build(&format!("{}+{}", self.pieces, other.pieces))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        if s == 0.0 {
            return Self::zero(self.nodes, self.m, &self.pieces);
        }
        out
    }

    /// `self + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut t = TripletBuilder::new(self.nodes, self.m);
        for (i, j, v) in self.triplets() {
            t.push(i, j, v);
        }
        for i in 0..self.dim() {
            t.push(i, i, s);
        }
        t.build(&self.pieces)
    }

    pub fn transpose(&self) -> Self {
        let mut t = TripletBuilder::new(self.nodes, self.m);
        for (i, j, v) in self.triplets() {
            t.push(j, i, v);
        }
        t.build(&format!("({})^T", self.pieces))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |self - other|` entrywise.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// True if `self == self^T` bit for bit.
    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// Coordinate-triplet text: header `N nnz`, then `row col value` lines.
    pub fn to_triplet_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim(), self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(out, "{i} {j} {v:.17e}");
        }
        out
    }
}
