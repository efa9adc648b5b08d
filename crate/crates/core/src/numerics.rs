//! Dense linear algebra used by the filters, the Dantzig selector and the
//! incoherence calculators.
//!
//! Everything here is small and dense: measurement matrices are at most a few
//! hundred columns and the reduced-order filter state rarely exceeds a few
//! dozen coefficients, so plain row-major storage with textbook kernels
//! (Householder QR, Cholesky, partial-pivot LU, cyclic Jacobi) is adequate.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::contract("ragged rows"));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    /// Builds a matrix whose j-th column is `cols[j]`.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::contract("ragged columns"));
        }
        let mut m = Mat::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// `self * other'`.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by transpose of {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[(i, j)] = dot(self.row(i), other.row(j));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::contract(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self' * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::contract(format!(
                "vector of length {} does not match {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    /// `self' * self`.
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for (a, &ra) in row.iter().enumerate() {
                if ra == 0.0 {
                    continue;
                }
                let g_row = &mut g.data[a * self.cols..(a + 1) * self.cols];
                for b in a..self.cols {
                    g_row[b] += ra * row[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// Extracts the sub-matrix with the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        let mut out = Mat::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            let src = self.row(i);
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = src[j];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::contract("dimension mismatch in matrix sum"));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_diag(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += v;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows).all(|i| {
            (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale)
        })
    }

    /// Replaces the matrix by `(M + M') / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Sorted, duplicate-free set of coordinate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// Validates a strictly increasing index list with every element below `bound`.
    pub fn new(indices: Vec<usize>, bound: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("index set must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::contract(format!(
                    "index {last} out of range for dimension {bound}"
                )));
            }
        }
        Ok(IndexSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn full(m: usize) -> Self {
        IndexSet((0..m).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of `i` inside the set, if present.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        IndexSet(out)
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&i| !other.contains(i)).collect())
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&i| other.contains(i)).collect())
    }

    /// Complement with respect to `0..m`.
    pub fn complement(&self, m: usize) -> IndexSet {
        IndexSet((0..m).filter(|&i| !self.contains(i)).collect())
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| !other.contains(i))
    }

    pub fn symmetric_difference_len(&self, other: &IndexSet) -> usize {
        self.difference(other).len() + other.difference(self).len()
    }

    /// Gathers `v` at the indices of the set.
    pub fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.iter().map(|i| v[i]).collect()
    }

    /// Scatters `values` into a zero vector of length `m`.
    pub fn scatter(&self, values: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (i, &v) in self.iter().zip(values) {
            out[i] = v;
        }
        out
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        IndexSet::from_unsorted(iter)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Extracts the columns of `a` listed in `set`, in order.
pub fn columns(a: &Mat, set: &IndexSet) -> Result<Mat> {
    if let Some(max) = set.max() {
        if max >= a.cols() {
            return Err(Error::contract(format!(
                "column {max} out of range for {} columns",
                a.cols()
            )));
        }
    }
    let rows: Vec<usize> = (0..a.rows()).collect();
    Ok(a.select(&rows, set.as_slice()))
}

/// Relative threshold on the triangular factor's diagonal below which a
/// column set is declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Householder QR of a tall matrix, used for least squares.
#[derive(Clone, Debug)]
pub struct Qr {
    /// Householder vectors below the diagonal, R on and above it.
    factors: Mat,
    betas: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Qr {
    /// Factors `a` (rows >= cols). Fails when the columns are numerically dependent.
    pub fn factor(a: &Mat) -> Result<Qr> {
        let (n, k) = (a.rows(), a.cols());
        if k > n {
            return Err(Error::Singular {
                context: "least squares (more columns than rows)",
                lambda_min: 0.0,
            });
        }
        let mut f = a.clone();
        let mut betas = vec![0.0; k];
        let mut rdiag = vec![0.0; k];
        for j in 0..k {
            let norm = (j..n).map(|i| f[(i, j)] * f[(i, j)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                rdiag[j] = 0.0;
                continue;
            }
            let alpha = if f[(j, j)] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in place with v_j = x_j - alpha
            f[(j, j)] -= alpha;
            let vnorm_sq: f64 = (j..n).map(|i| f[(i, j)] * f[(i, j)]).sum();
            let beta = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };
            betas[j] = beta;
            for c in (j + 1)..k {
                let s: f64 = (j..n).map(|i| f[(i, j)] * f[(i, c)]).sum();
                let s = s * beta;
                for i in j..n {
                    let v = f[(i, j)];
                    f[(i, c)] -= s * v;
                }
            }
            rdiag[j] = alpha;
        }
        let rmax = rdiag.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let rmin = rdiag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if k > 0 && (rmax == 0.0 || rmin < RANK_TOL * rmax) {
            return Err(Error::Singular {
                context: "least squares (rank deficient column set)",
                lambda_min: if rmin.is_finite() { rmin * rmin } else { 0.0 },
            });
        }
        Ok(Qr {
            factors: f,
            betas,
            rdiag,
        })
    }

    pub fn ncols(&self) -> usize {
        self.rdiag.len()
    }

    /// Minimizer of `||y - A b||` for the factored `A`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (n, k) = (self.factors.rows(), self.ncols());
        if y.len() != n {
            return Err(Error::contract("right-hand side length mismatch"));
        }
        let mut qty = y.to_vec();
        for j in 0..k {
            let s: f64 = (j..n).map(|i| self.factors[(i, j)] * qty[i]).sum();
            let s = s * self.betas[j];
            for i in j..n {
                qty[i] -= s * self.factors[(i, j)];
            }
        }
        qty.truncate(k);
        self.back_substitute(&mut qty);
        Ok(qty)
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.rdiag[i]
        } else {
            self.factors[(i, j)]
        }
    }

    fn back_substitute(&self, x: &mut [f64]) {
        let k = self.ncols();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in (i + 1)..k {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.rdiag[i];
        }
    }

    /// `(A'A)^{-1} = R^{-1} R^{-T}`.
    pub fn gram_inverse(&self) -> Mat {
        let k = self.ncols();
        // columns of R^{-1}
        let mut rinv = Mat::zeros(k, k);
        for c in 0..k {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            self.back_substitute(&mut e);
            for i in 0..k {
                rinv[(i, c)] = e[i];
            }
        }
        let mut out = rinv.matmul_t(&rinv).expect("square");
        out.symmetrize();
        out
    }
}

/// Least-squares coefficients of `y` on the columns of `a_t`.
pub fn least_squares(a_t: &Mat, y: &[f64]) -> Result<Vec<f64>> {
    if a_t.cols() == 0 {
        if y.len() != a_t.rows() {
            return Err(Error::contract("right-hand side length mismatch"));
        }
        return Ok(Vec::new());
    }
    Qr::factor(a_t)?.solve(y)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn factor(m: &Mat) -> Result<Cholesky> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::contract("Cholesky needs a square matrix"));
        }
        let scale = (0..n).fold(0.0f64, |acc, i| acc.max(m[(i, i)].abs()));
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let lj = l.row(j);
            let d = m[(j, j)] - dot(&lj[..j], &lj[..j]);
            if !(d > 1e-14 * scale) || !d.is_finite() {
                return Err(Error::Singular {
                    context: "Cholesky (matrix not positive definite)",
                    lambda_min: d.min(0.0),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = z[i] - dot(&row[..i], &z[..i]);
            z[i] = s / row[i];
        }
        z
    }

    /// Solves `L' x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::contract("right-hand side length mismatch"));
        }
        Ok(self.backward(&self.forward(b)))
    }

    /// `r' M^{-1} r`.
    pub fn quad_form(&self, r: &[f64]) -> f64 {
        norm2_sq(&self.forward(r))
    }

    /// Solves `M X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Result<Mat> {
        if b.rows() != self.dim() {
            return Err(Error::contract("right-hand side rows mismatch"));
        }
        let mut out = Mat::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve(&b.column(c))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, c)] = v;
            }
        }
        Ok(out)
    }
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn spd_solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if !m.is_symmetric(1e-10) {
        return Err(Error::contract("spd_solve needs a symmetric matrix"));
    }
    Cholesky::factor(m)?.solve(b)
}

/// LU factorization with partial pivoting for small square systems.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &Mat) -> Result<Lu> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::contract("LU needs a square matrix"));
        }
        let scale = m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pmax > 1e-13 * scale) {
                return Err(Error::Singular {
                    context: "LU (singular basis)",
                    lambda_min: pmax.max(0.0),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `M' x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        // M = P' L U  =>  M' = U' L' P
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in (i + 1)..n {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    let n = m.rows();
    if !m.is_symmetric(1e-10) {
        return Err(Error::contract("eigenvalues requested for a non-symmetric matrix"));
    }
    let mut a = m.clone();
    a.symmetrize();
    let total: f64 = a.as_slice().iter().map(|v| v * v).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &Mat) -> Result<(f64, f64)> {
    if m.rows() == 0 {
        return Err(Error::contract("eigenvalues of an empty matrix"));
    }
    let ev = sym_eigenvalues(m)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        let data = (0..r * c).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Mat::from_vec(r, c, data).unwrap()
    }

    #[test]
    fn columns_of_identity() {
        let a = Mat::identity(3);
        let t = IndexSet::new(vec![0, 2], 3).unwrap();
        let c = columns(&a, &t).unwrap();
        assert_eq!(c.rows(), 3);
        assert_eq!(c.column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(c.column(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn columns_empty_and_out_of_range() {
        let a = Mat::identity(4);
        let c = columns(&a, &IndexSet::empty()).unwrap();
        assert_eq!((c.rows(), c.cols()), (4, 0));
        let bad = IndexSet::from_unsorted([5]);
        assert!(matches!(columns(&a, &bad), Err(Error::Contract(_))));
    }

    #[test]
    fn columns_pick_in_order() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]).unwrap();
        let c = columns(&a, &IndexSet::from_unsorted([3, 1])).unwrap();
        assert_eq!(c.column(0), vec![2.0, 6.0]);
        assert_eq!(c.column(1), vec![4.0, 8.0]);
    }

    #[test]
    fn least_squares_small_cases() {
        let x = least_squares(&Mat::identity(2), &[3.0, -1.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = Mat::from_columns(&[vec![s, s]]).unwrap();
        let x = least_squares(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-14);

        let empty = Mat::zeros(3, 0);
        assert!(least_squares(&empty, &[1.0, 2.0, 3.0]).unwrap().is_empty());
    }

    #[test]
    fn least_squares_rank_deficient() {
        let a = Mat::from_columns(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        match least_squares(&a, &[1.0, 0.0, 0.0]) {
            Err(Error::Singular { lambda_min, .. }) => assert!(lambda_min < 1e-10),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn gram_inverse_matches_cholesky_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 7, 4);
        let inv = Qr::factor(&a).unwrap().gram_inverse();
        let prod = inv.matmul(&a.gram()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spd_solve_cases() {
        assert_eq!(spd_solve(&Mat::identity(3), &[1.0, -2.0, 5.0]).unwrap(), vec![1.0, -2.0, 5.0]);
        let x = spd_solve(&Mat::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_mat(&mut rng, 5, 5);
        let mut m = b.matmul_t(&b).unwrap();
        m.add_diag(0.5);
        let rhs: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let x = spd_solve(&m, &rhs).unwrap();
        let r = sub(&m.mul_vec(&x).unwrap(), &rhs);
        assert!(norm_inf(&r) <= 1e-9 * (1.0 + norm_inf(&rhs)));
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let m = Mat::from_diag(&[1.0, -1.0]);
        assert!(matches!(spd_solve(&m, &[1.0, 1.0]), Err(Error::Singular { .. })));
        let ns = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(spd_solve(&ns, &[1.0, 1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_extremes_cases() {
        let (lo, hi) = eig_extremes(&Mat::identity(4)).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        let (lo, hi) = eig_extremes(&Mat::from_diag(&[0.5, 3.0])).unwrap();
        assert!((lo - 0.5).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = Mat::from_rows(&[vec![1.0, s], vec![s, 1.0]]).unwrap();
        let (lo, hi) = eig_extremes(&m).unwrap();
        assert!((lo - (1.0 - s)).abs() < 1e-12);
        assert!((hi - (1.0 + s)).abs() < 1e-12);
        let ns = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_extremes(&ns), Err(Error::Contract(_))));
    }

    #[test]
    fn lu_solves_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_mat(&mut rng, 6, 6);
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let lu = Lu::factor(&m).unwrap();
        let x = lu.solve(&b);
        assert!(norm_inf(&sub(&m.mul_vec(&x).unwrap(), &b)) < 1e-10);
        let xt = lu.solve_transpose(&b);
        assert!(norm_inf(&sub(&m.tr_mul_vec(&xt).unwrap(), &b)) < 1e-10);
    }

    #[test]
    fn index_set_algebra() {
        let a = IndexSet::from_unsorted([5, 1, 3, 3]);
        let b = IndexSet::from_unsorted([2, 3]);
        assert_eq!(a.as_slice(), &[1, 3, 5]);
        assert_eq!(a.union(&b).as_slice(), &[1, 2, 3, 5]);
        assert_eq!(a.difference(&b).as_slice(), &[1, 5]);
        assert_eq!(a.complement(6).as_slice(), &[0, 2, 4]);
        assert_eq!(a.symmetric_difference_len(&b), 3);
        assert!(IndexSet::new(vec![2, 1], 5).is_err());
        assert!(IndexSet::new(vec![1, 7], 5).is_err());
    }

    fn orthonormal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        let q = Qr::factor(&random_mat(rng, n, n)).unwrap();
        // columns of Q: apply Q to unit vectors
        let mut cols = Vec::new();
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            for j in (0..n).rev() {
                let s: f64 = (j..n).map(|i| q.factors[(i, j)] * e[i]).sum::<f64>() * q.betas[j];
                for i in j..n {
                    e[i] -= s * q.factors[(i, j)];
                }
            }
            cols.push(e);
        }
        Mat::from_columns(&cols).unwrap()
    }

    proptest! {
        #[test]
        fn least_squares_residual_orthogonal(seed in 0u64..1000, n in 3usize..10, k in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = k.min(n);
            let a = random_mat(&mut rng, n, k);
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let b = least_squares(&a, &y).unwrap();
            let fitted = if k == 0 { vec![0.0; n] } else { a.mul_vec(&b).unwrap() };
            let r = sub(&y, &fitted);
            let corr = a.tr_mul_vec(&r).unwrap();
            prop_assert!(norm_inf(&corr) <= 1e-8 * norm2_sq(&y).sqrt());
        }

        #[test]
        fn eig_extremes_rotation_invariant(seed in 0u64..1000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_mat(&mut rng, n, n);
            let mut m = b.add(&b.transpose()).unwrap();
            m.symmetrize();
            let u = orthonormal(&mut rng, n);
            let mut rot = u.matmul(&m).unwrap().matmul_t(&u).unwrap();
            rot.symmetrize();
            let (a0, a1) = eig_extremes(&m).unwrap();
            let (b0, b1) = eig_extremes(&rot).unwrap();
            prop_assert!((a0 - b0).abs() < 1e-7 && (a1 - b1).abs() < 1e-7);
        }

        #[test]
        fn columns_of_disjoint_union(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_mat(&mut rng, 4, 10);
            let t1: IndexSet = (0..10).filter(|_| rng.random::<bool>()).collect();
            let t2: IndexSet = t1.complement(10).iter().filter(|_| rng.random::<bool>()).collect();
            let u = columns(&a, &t1.union(&t2)).unwrap();
            for (pos, i) in t1.union(&t2).iter().enumerate() {
                let from = if t1.contains(i) {
                    columns(&a, &t1).unwrap().column(t1.position(i).unwrap())
                } else {
                    columns(&a, &t2).unwrap().column(t2.position(i).unwrap())
                };
                prop_assert_eq!(u.column(pos), from);
            }
        }
    }
}
