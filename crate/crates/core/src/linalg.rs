//! Banded direct solvers, a symmetric lowest-eigenpair routine, dense
//! eigenvalues and the dense matrix exponential used as a reference
//! propagator.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::assembly::SparseOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (zero pivot in column {0})")]
    Singular(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("eigen-solver did not converge")]
    NoConvergence,
}

/// Lower and upper bandwidth of the sparsity pattern.
pub fn bandwidths(op: &SparseOperator) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for i in 0..op.dim() {
        for (j, _) in op.row(i) {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
    }
    (kl, ku)
}

/// LU factorization with partial pivoting of `alpha I + beta A` for banded `A`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor_shifted(op: &SparseOperator, alpha: f64, beta: f64) -> Result<Self, LinalgError> {
        let n = op.dim();
        let (kl, ku) = bandwidths(op);
        // Row interchanges widen the upper band by kl.
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            ab: vec![0.0; n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in op.row(i) {
                *lu.at_mut(i, j) += beta * v;
            }
            *lu.at_mut(i, i) += alpha;
        }
        lu.factor()?;
        Ok(lu)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.ab[k]
    }

    fn factor(&mut self) -> Result<(), LinalgError> {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular(k));
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = self.at(k, j);
                    *self.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        let reach = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.at(k, j) * b[j];
            }
            b[k] = s / self.at(k, k);
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// Symmetric banded matrix stored by its lower band.
#[derive(Debug, Clone)]
pub struct SymmetricBand {
    n: usize,
    k: usize,
    lower: Vec<f64>,
}

impl SymmetricBand {
    /// The symmetric part `(A + A^T) / 2` of a sparse operator.
    pub fn symmetric_part(op: &SparseOperator) -> Self {
        let n = op.dim();
        let (kl, ku) = bandwidths(op);
        let k = kl.max(ku);
        let mut s = Self {
            n,
            k,
            lower: vec![0.0; n * (k + 1)],
        };
        for i in 0..n {
            for (j, v) in op.row(i) {
                let (r, c) = if j <= i { (i, j) } else { (j, i) };
                let idx = s.idx(r, c);
                s.lower[idx] += if r == c { v } else { 0.5 * v };
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.k + 1) + (j + self.k - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if r - c > self.k {
            0.0
        } else {
            self.lower[self.idx(r, c)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.k);
            for j in lo..i {
                let a = self.lower[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.lower[self.idx(i, i)] * x[i];
        }
        y
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut r = 0.0;
            for j in i.saturating_sub(self.k)..(i + self.k + 1).min(self.n) {
                if j != i {
                    r += self.get(i, j).abs();
                }
            }
            let d = self.get(i, i);
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    /// Cholesky factor of `self - sigma I`, or `None` if it is not positive
    /// definite.
    pub fn cholesky_shifted(&self, sigma: f64) -> Option<BandCholesky> {
        let (n, k) = (self.n, self.k);
        let mut l = vec![0.0; n * (k + 1)];
        for i in 0..n {
            let lo = i.saturating_sub(k);
            for j in lo..=i {
                let mut s = self.lower[self.idx(i, j)];
                if i == j {
                    s -= sigma;
                }
                for p in lo.max(j.saturating_sub(k))..j {
                    s -= l[self.idx(i, p)] * l[self.idx(j, p)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[self.idx(i, i)] = s.sqrt();
                } else {
                    l[self.idx(i, j)] = s / l[self.idx(j, j)];
                }
            }
        }
        Some(BandCholesky { n, k, l })
    }

    /// Smallest eigenvalue and a unit eigenvector, by bisection on
    /// definiteness followed by inverse iteration.
    pub fn lowest_eigenpair(&self) -> Result<(f64, Vec<f64>), LinalgError> {
        let n = self.n;
        let (mut lo, g_hi) = self.gershgorin();
        let mut hi = (0..n).map(|i| self.get(i, i)).fold(g_hi, f64::min);
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        // invariant: self - lo I is positive definite, self - hi I is not
        lo -= 1e-12 * scale + f64::MIN_POSITIVE;
        if self.cholesky_shifted(hi).is_some() {
            hi += 1e-12 * scale;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-13 * scale {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cholesky_shifted(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shift = lo - 1e-9 * scale;
        let chol = self
            .cholesky_shifted(shift)
            .ok_or(LinalgError::NoConvergence)?;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        normalize(&mut x);
        let mut lambda = lo;
        for _ in 0..60 {
            let mut y = x.clone();
            chol.solve_in_place(&mut y);
            normalize(&mut y);
            let sy = self.matvec(&y);
            let rq: f64 = sy.iter().zip(&y).map(|(a, b)| a * b).sum();
            let converged = (rq - lambda).abs() <= 1e-15 * scale && iter_close(&x, &y);
            lambda = rq;
            x = y;
            if converged {
                break;
            }
        }
        Ok((lambda, x))
    }
}

fn iter_close(a: &[f64], b: &[f64]) -> bool {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    d.sqrt() < 1e-12
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x {
            *v /= n;
        }
    }
}

/// Lower Cholesky factor in band storage.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    k: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.k + 1) + (j + self.k - i)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        for i in 0..n {
            let mut s = b[i];
            for p in i.saturating_sub(k)..i {
                s -= self.l[self.idx(i, p)] * b[p];
            }
            b[i] = s / self.l[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in i + 1..(i + k + 1).min(n) {
                s -= self.l[self.idx(p, i)] * b[p];
            }
            b[i] = s / self.l[self.idx(i, i)];
        }
    }
}

/// Induced 1-norm (largest absolute column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm1(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(s);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &b / k as f64;
        sum += &term;
        if norm1(&term) <= 1e-18 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// All eigenvalues of a dense matrix: the symmetric solver when `a` is
/// exactly symmetric, otherwise faer's Hessenberg QR.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, LinalgError> {
    if a == &a.transpose() {
        let ev = a.clone().symmetric_eigenvalues();
        return Ok(ev.iter().map(|&v| Complex::new(v, 0.0)).collect());
    }
    let m = faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let ev = m.eigenvalues().map_err(|_| LinalgError::NoConvergence)?;
    Ok(ev.into_iter().map(|z| Complex::new(z.re, z.im)).collect())
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> (SparseOperator, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = TripletBuilder::new(n, 1);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                let v: f64 = rng.random_range(-1.0..1.0);
                t.push(i, j, v);
                dense[(i, j)] = v;
            }
        }
        (t.build("random"), dense)
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        for (kl, ku) in [(1, 1), (3, 1), (0, 4), (5, 5)] {
            let (op, dense) = random_banded(40, kl, ku, (kl * 10 + ku) as u64);
            let lu = BandedLu::factor_shifted(&op, 0.0, 1.0).unwrap();
            let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = nalgebra::DVector::from_vec(lu.solve(&b).unwrap());
            let r = &dense * &x - nalgebra::DVector::from_vec(b);
            // normwise backward error
            let eta = r.amax() / (dense.amax() * x.amax());
            assert!(eta < 1e-13, "backward error {eta}");
        }
    }

    #[test]
    fn banded_lu_detects_singular() {
        let mut t = TripletBuilder::new(3, 1);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        let op = t.build("singular");
        assert!(matches!(
            BandedLu::factor_shifted(&op, 0.0, 1.0),
            Err(LinalgError::Singular(2))
        ));
    }

    #[test]
    fn lowest_eigenpair_matches_dense() {
        let (op, dense) = random_banded(60, 4, 4, 9);
        let sym = (&dense + dense.transpose()) * 0.5;
        let exact = nalgebra::SymmetricEigen::new(sym).eigenvalues.min();
        let band = SymmetricBand::symmetric_part(&op);
        let (lam, v) = band.lowest_eigenpair().unwrap();
        assert!((lam - exact).abs() < 1e-9, "{lam} vs {exact}");
        let sv = band.matvec(&v);
        let res: f64 = sv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-6);
    }

    #[test]
    fn expm_nilpotent_and_rotation() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&(&l * 2.5));
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 2.5, 0.0, 1.0]));
        let t: f64 = 0.8;
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = expm(&(&v * -t));
        let want = DMatrix::from_row_slice(2, 2, &[t.cosh(), -t.sinh(), -t.sinh(), t.cosh()]);
        assert!((e - want).amax() < 1e-14);
    }

    #[test]
    fn expm_agrees_with_nalgebra() {
        let (_, dense) = random_banded(12, 3, 3, 4);
        let a = &dense * 6.0;
        let ours = expm(&a);
        let reference = a.exp();
        let rel = (&ours - &reference).amax() / reference.amax();
        assert!(rel < 1e-11, "rel {rel}");
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        assert!((least_squares_slope(&x, &y) - 2.0).abs() < 1e-14);
    }
}
