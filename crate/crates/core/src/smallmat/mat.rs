use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use smallvec::SmallVec;

use super::LinalgError;

/// Inline storage covers every matrix up to 4x4 without touching the heap.
pub(crate) type Storage = SmallVec<[f64; 16]>;

/// Dense row-major matrix for small dimensions.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Storage,
}

impl Mat {
    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "entry count {} does not match shape {rows}x{cols}",
            data.len()
        );
        Self {
            rows,
            cols,
            data: Storage::from_vec(data),
        }
    }

    pub(crate) fn from_storage(rows: usize, cols: usize, data: Storage) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Storage::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: SmallVec::from_elem(0.0, rows * cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Column vector with the given entries.
    pub fn column(entries: &[f64]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: Storage::from_slice(entries),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn ensure_square(&self) -> Result<usize, LinalgError> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub(crate) fn ensure_finite(&self) -> Result<(), LinalgError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(LinalgError::NonFinite)
        }
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

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|x| x * s).collect();
        Mat::from_storage(self.rows, self.cols, data)
    }

    /// `(self + self^T) / 2`.
    pub fn sym_part(&self) -> Mat {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// `(self - self^T) / 2`.
    pub fn antisym_part(&self) -> Mat {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = 0.5 * (self[(i, j)] - self[(j, i)]);
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest entrywise absolute difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm, via the largest eigenvalue of `self^T self`.
    pub fn norm_two(&self) -> f64 {
        let gram = &self.transpose() * self;
        super::sym_eigenvalues(&gram)
            .map(|ev| ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Inverse by Gaussian elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Mat, LinalgError> {
        let n = self.ensure_square()?;
        self.ensure_finite()?;
        if n == 1 {
            let a = self.data[0];
            if a == 0.0 {
                return Err(LinalgError::Singular {
                    column: 0,
                    pivot: a,
                });
            }
            return Ok(Mat::from_storage(1, 1, smallvec::smallvec![1.0 / a]));
        }
        let mut a = self.data.to_vec();
        let mut b = Mat::identity(n).data.to_vec();
        gauss_solve(&mut a, n, &mut b, n)?;
        Ok(Mat::from_vec(n, n, b))
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat, LinalgError> {
        let n = self.ensure_square()?;
        if rhs.rows != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "system is {n}x{n} but right-hand side has {} rows",
                rhs.rows
            )));
        }
        self.ensure_finite()?;
        let mut a = self.data.to_vec();
        let mut b = rhs.data.to_vec();
        gauss_solve(&mut a, n, &mut b, rhs.cols)?;
        Ok(Mat::from_vec(n, rhs.cols, b))
    }

    /// Lower-triangular `L` with `L L^T = self` for a symmetric positive
    /// semidefinite matrix.
    ///
    /// Pivots in `[-tol, 0]` are treated as exact zeros (the column is zeroed),
    /// which admits rank-deficient covariances. A pivot below `-tol` is an error.
    pub fn cholesky_psd(&self, tol: f64) -> Result<Mat, LinalgError> {
        let n = self.ensure_square()?;
        self.ensure_finite()?;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d < -tol {
                return Err(LinalgError::NotPositiveSemidefinite { index: j, pivot: d });
            }
            if d <= tol {
                continue;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(l)
    }

    /// Block matrix `[[a, b], [c, d]]`.
    pub fn block2x2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let rows = a.rows + c.rows;
        let cols = a.cols + b.cols;
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = match (i < a.rows, j < a.cols) {
                    (true, true) => a[(i, j)],
                    (true, false) => b[(i, j - a.cols)],
                    (false, true) => c[(i - a.rows, j)],
                    (false, false) => d[(i - a.rows, j - a.cols)],
                };
            }
        }
        m
    }
}

/// In-place Gaussian elimination with partial pivoting on a row-major `n x n`
/// system with `nrhs` right-hand sides. On success `b` holds the solution.
pub(crate) fn gauss_solve(
    a: &mut [f64],
    n: usize,
    b: &mut [f64],
    nrhs: usize,
) -> Result<(), LinalgError> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = (n as f64) * f64::EPSILON * scale;
    for col in 0..n {
        let (piv_row, piv_abs) =
            (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs <= floor || piv_abs == 0.0 {
            return Err(LinalgError::Singular {
                column: col,
                pivot: piv_abs,
            });
        }
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
            }
            for j in 0..nrhs {
                b.swap(col * nrhs + j, piv_row * nrhs + j);
            }
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for j in col + 1..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            for j in 0..nrhs {
                b[r * nrhs + j] -= f * b[col * nrhs + j];
            }
        }
    }
    for col in (0..n).rev() {
        let p = a[col * n + col];
        for j in 0..nrhs {
            let mut s = b[col * nrhs + j];
            for k in col + 1..n {
                s -= a[col * n + k] * b[k * nrhs + j];
            }
            b[col * nrhs + j] = s / p;
        }
    }
    Ok(())
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Mul<Mat> for Mat {
    type Output = Mat;

    fn mul(self, rhs: Mat) -> Mat {
        &self * &rhs
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Mat::from_storage(self.rows, self.cols, data)
    }
}

impl Add<Mat> for Mat {
    type Output = Mat;

    fn add(self, rhs: Mat) -> Mat {
        &self + &rhs
    }
}

impl AddAssign<&Mat> for Mat {
    fn add_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in subtraction");
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Mat::from_storage(self.rows, self.cols, data)
    }
}

impl Sub<Mat> for Mat {
    type Output = Mat;

    fn sub(self, rhs: Mat) -> Mat {
        &self - &rhs
    }
}

impl Neg for &Mat {
    type Output = Mat;

    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}{:?}", self.rows, self.cols, self.to_rows())
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x:?}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let a = Mat::from_rows(&[[4.0, 1.0, 0.5], [2.0, 5.0, 1.0], [0.0, 1.0, 3.0]]);
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).max_abs_diff(&Mat::identity(3)) < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn cholesky_accepts_rank_deficient() {
        let a = Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let l = a.cholesky_psd(1e-12).unwrap();
        assert!((&l * &l.transpose()).max_abs_diff(&a) < 1e-14);
        let bad = Mat::from_rows(&[[1.0, 0.0], [0.0, -1.0]]);
        assert!(bad.cholesky_psd(1e-12).is_err());
    }

    #[test]
    fn block_assembly() {
        let m = Mat::block2x2(
            &Mat::from_rows(&[[1.0]]),
            &Mat::from_rows(&[[2.0]]),
            &Mat::from_rows(&[[3.0]]),
            &Mat::from_rows(&[[4.0]]),
        );
        assert_eq!(m, Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
    }

    #[test]
    fn display_is_nested_rows() {
        let m = Mat::from_rows(&[[0.5, 0.5], [0.5, 1.0]]);
        assert_eq!(m.to_string(), "[[0.5, 0.5], [0.5, 1.0]]");
    }
}
