//! Dense complex linear algebra for Hermitian positive-definite systems.
//!
//! Only what regression needs: a row-major [`ComplexMatrix`], the Cholesky
//! factor `A = L·Lᴴ` stored as packed lower-triangular rows, triangular
//! solves, the log-determinant, and growing a factor by one row/column at a
//! time without refactorizing.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative Hermitian-symmetry tolerance accepted by [`cholesky`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Number of jitter escalations tried by [`cholesky_with_fallback`].
pub const JITTER_RETRIES: usize = 3;

/// Dense complex matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// An `n × 1` matrix.
    pub fn column_vector(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)].re += value;
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Largest `|A[i,j] − conj(A[j,i])|`, diagonal imaginary parts included.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols.min(self.rows) {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.is_square() && self.hermitian_deviation() <= rel_tol * self.max_abs()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// `Σ a_k·b_k` (no conjugation).
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            re[k] += x[k].re * y[k].re - x[k].im * y[k].im;
            im[k] += x[k].re * y[k].im + x[k].im * y[k].re;
        }
    }
    let mut acc = C64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in ra.iter().zip(rb) {
        acc += x * y;
    }
    acc
}

/// `Σ a_k·conj(b_k)`.
#[inline]
pub fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            re[k] += x[k].re * y[k].re + x[k].im * y[k].im;
            im[k] += x[k].im * y[k].re - x[k].re * y[k].im;
        }
    }
    let mut acc = C64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in ra.iter().zip(rb) {
        acc += x * y.conj();
    }
    acc
}

/// Lower-triangular Cholesky factor `L` with `A = L·Lᴴ` and a real,
/// strictly positive diagonal.
///
/// Row `i` of `L` (entries `0..=i`) is stored contiguously, so appending a
/// row never moves existing data.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianFactor {
    n: usize,
    packed: Vec<C64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl HermitianFactor {
    /// Factor of the empty matrix; grow it with [`HermitianFactor::extend`].
    pub fn empty() -> Self {
        Self {
            n: 0,
            packed: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Row `i` of `L`, entries `0..=i`.
    pub fn row(&self, i: usize) -> &[C64] {
        &self.packed[row_start(i)..row_start(i + 1)]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if j > i {
            C64::new(0.0, 0.0)
        } else {
            self.packed[row_start(i) + j]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_start(i) + i].re
    }

    /// `L` as a dense matrix.
    pub fn lower(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `L·Lᴴ`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v = dot_conj(&self.row(i)[..=j], self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    /// Solves `L·x = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [C64]) {
        for i in 0..self.n {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i].re;
        }
    }

    /// Solves `Lᴴ·x = b` in place.
    pub fn backward_solve_in_place(&self, b: &mut [C64]) {
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = b[i] / row[i].re;
            b[i] = xi;
            for (bk, l) in b[..i].iter_mut().zip(&row[..i]) {
                *bk -= l.conj() * xi;
            }
        }
    }

    /// `L⁻¹·b`.
    pub fn whiten(&self, b: &[C64]) -> Result<Vec<C64>> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        self.forward_solve_in_place(&mut x);
        Ok(x)
    }

    /// `(L·Lᴴ)⁻¹·b`.
    pub fn solve_vec(&self, b: &[C64]) -> Result<Vec<C64>> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        self.forward_solve_in_place(&mut x);
        self.backward_solve_in_place(&mut x);
        Ok(x)
    }

    /// Inverse of the factored matrix, `L⁻ᴴ·L⁻¹`.
    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.n;
        // cols[j] holds rows j..n of column j of L⁻¹
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut x = vec![C64::new(0.0, 0.0); n - j];
            x[0] = C64::new(1.0 / self.diag(j), 0.0);
            for i in j + 1..n {
                let row = self.row(i);
                x[i - j] = -dot(&row[j..i], &x[..i - j]) / row[i].re;
            }
            cols.push(x);
        }
        let mut inv = ComplexMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = dot_conj(&cols[b], &cols[a][b - a..]);
                inv[(a, b)] = v;
                inv[(b, a)] = v.conj();
            }
            inv[(a, a)].im = 0.0;
        }
        inv
    }

    /// Appends a row given its already whitened off-diagonal part
    /// `b = L⁻¹·c`, where `c` is the new column of the factored matrix
    /// and `new_diag` its new diagonal entry. Returns the new pivot.
    pub fn extend_whitened(&mut self, whitened: &[C64], new_diag: f64) -> Result<f64> {
        self.check_len(whitened.len())?;
        let schur = new_diag - whitened.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !(schur > 0.0) || !schur.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: self.n,
                pivot: schur,
            });
        }
        let pivot = schur.sqrt();
        self.packed.reserve(self.n + 1);
        self.packed.extend(whitened.iter().map(|z| z.conj()));
        self.packed.push(C64::new(pivot, 0.0));
        self.n += 1;
        Ok(pivot)
    }

    /// In-place version of [`extend_factor`].
    pub fn extend(&mut self, new_row: &[C64], new_diag: f64) -> Result<()> {
        self.check_len(new_row.len())?;
        let mut b: Vec<C64> = new_row.iter().map(|z| z.conj()).collect();
        self.forward_solve_in_place(&mut b);
        self.extend_whitened(&b, new_diag).map(|_| ())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

/// Cholesky factor of `A + jitter·I`.
///
/// `A` must be Hermitian to within `1e-10·max|A|`; only its lower triangle is
/// read after that check.
pub fn cholesky(a: &ComplexMatrix, jitter: f64) -> Result<HermitianFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {jitter}")));
    }
    let tolerance = HERMITIAN_TOL * a.max_abs();
    let deviation = a.hermitian_deviation();
    if deviation > tolerance {
        return Err(Error::NotHermitian { deviation, tolerance });
    }
    let n = a.rows();
    let mut factor = HermitianFactor {
        n,
        packed: vec![C64::new(0.0, 0.0); row_start(n)],
    };
    for i in 0..n {
        let si = row_start(i);
        for j in 0..=i {
            let sj = row_start(j);
            let (head, tail) = factor.packed.split_at_mut(si);
            let row_i = &mut tail[..=i];
            let row_j: &[C64] = if j == i { &row_i[..j] } else { &head[sj..sj + j] };
            let s = a[(i, j)] - dot_conj(&row_i[..j], row_j);
            if j == i {
                let d = s.re + jitter;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: d });
                }
                row_i[i] = C64::new(d.sqrt(), 0.0);
            } else {
                row_i[j] = s / head[sj + j].re;
            }
        }
    }
    Ok(factor)
}

/// Factorizes `A`, escalating a diagonal jitter only if the plain
/// factorization fails: `1e-10·mean(diag)`, then ×10 for each of
/// [`JITTER_RETRIES`] attempts. Returns the factor and the jitter used.
pub fn cholesky_with_fallback(a: &ComplexMatrix) -> Result<(HermitianFactor, f64)> {
    let first = match cholesky(a, 0.0) {
        Ok(f) => return Ok((f, 0.0)),
        Err(e @ Error::NotPositiveDefinite { .. }) => e,
        Err(e) => return Err(e),
    };
    let n = a.rows().max(1);
    let mean_diag = (0..a.rows()).map(|i| a[(i, i)].re.abs()).sum::<f64>() / n as f64;
    let mut jitter = 1e-10 * mean_diag.max(f64::MIN_POSITIVE);
    let mut last = first;
    for _ in 0..JITTER_RETRIES {
        match cholesky(a, jitter) {
            Ok(f) => return Ok((f, jitter)),
            Err(e) => last = e,
        }
        jitter *= 10.0;
    }
    Err(last)
}

/// Solves `(L·Lᴴ)·X = B` column by column.
pub fn solve(factor: &HermitianFactor, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if b.rows() != factor.size() {
        return Err(Error::DimensionMismatch {
            expected: factor.size(),
            found: b.rows(),
        });
    }
    let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
    let mut col = vec![C64::new(0.0, 0.0); b.rows()];
    for j in 0..b.cols() {
        for (i, c) in col.iter_mut().enumerate() {
            *c = b[(i, j)];
        }
        factor.forward_solve_in_place(&mut col);
        factor.backward_solve_in_place(&mut col);
        out.set_column(j, &col);
    }
    Ok(out)
}

/// `log det(L·Lᴴ) = 2·Σ ln L[i,i]`.
pub fn log_det(factor: &HermitianFactor) -> f64 {
    2.0 * (0..factor.size()).map(|i| factor.diag(i).ln()).sum::<f64>()
}

/// Factor of the matrix obtained by bordering `A` with one row and column.
///
/// `new_row` is the last row of the extended matrix without its diagonal,
/// i.e. `A_ext[n, 0..n]`; the matching column is its conjugate.
pub fn extend_factor(factor: &HermitianFactor, new_row: &[C64], new_diag: f64) -> Result<HermitianFactor> {
    let mut out = factor.clone();
    out.extend(new_row, new_diag)?;
    Ok(out)
}
