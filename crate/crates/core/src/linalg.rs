//! Small row-major matrix type plus SPD solves and inverses backed by
//! nalgebra's factorizations.

use std::ops::{Index, IndexMut};

use nalgebra::{self as na, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::param::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Sub-matrix made of the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (k, &c) in cols.iter().enumerate() {
                out[(r, k)] = self[(r, c)];
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `Aᵀ x`
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * xr;
            }
        }
        Ok(out)
    }

    /// `A Aᵀ`
    pub fn gram_rows(&self) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Pivots below this fraction of the matching diagonal entry are treated as
/// lost to cancellation.
const PIVOT_RTOL: f64 = 1e-12;

fn to_na(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows, a.cols, &a.data)
}

fn from_na(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[(r, c)] = m[(r, c)];
        }
    }
    out
}

fn check_square(a: &Matrix) -> Result<()> {
    if a.rows != a.cols {
        return Err(Error::Dimension {
            expected: a.rows,
            got: a.cols,
        });
    }
    Ok(())
}

/// Cholesky factorization `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    inner: na::Cholesky<f64, Dyn>,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        check_square(a)?;
        let inner = na::Cholesky::new(to_na(a)).ok_or_else(|| {
            let row = (0..a.rows).find(|&j| !(a[(j, j)] > 0.0)).unwrap_or(0);
            Error::NotSpd {
                row,
                pivot: f64::NAN,
            }
        })?;
        let l = inner.l_dirty();
        for j in 0..a.rows {
            let pivot = l[(j, j)] * l[(j, j)];
            if !(pivot > PIVOT_RTOL * a[(j, j)].abs()) {
                return Err(Error::NotSpd { row: j, pivot });
            }
        }
        Ok(Cholesky { inner })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.inner.l_dirty().nrows();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rhs.len(),
            });
        }
        Ok(self
            .inner
            .solve(&DVector::from_column_slice(rhs))
            .as_slice()
            .to_vec())
    }
}

/// Solves `A x = rhs` for symmetric positive definite `A`.
pub fn spd_solve(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Cholesky::factor(a)?.solve(rhs)
}

/// Inverse via LU with partial pivoting.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    check_square(a)?;
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Singular);
    }
    let lu = to_na(a).lu();
    let u = lu.u();
    if (0..a.rows).any(|i| !(u[(i, i)].abs() > scale * 1e-14)) {
        return Err(Error::Singular);
    }
    lu.try_inverse().map(|m| from_na(&m)).ok_or(Error::Singular)
}

/// Frobenius-norm condition estimate `‖A‖_F ‖A⁻¹‖_F`; an upper bound on the
/// spectral condition number.
pub fn condition_estimate(a: &Matrix) -> Result<f64> {
    let inv = inverse(a)?;
    Ok(a.frobenius_norm() * inv.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn spd_solve_identity() {
        let x = spd_solve(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert!(close(&x, &[1.0, 2.0, 3.0], 1e-15));
    }

    #[test]
    fn spd_solve_diagonal() {
        let a = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let x = spd_solve(&a, &[8.0, 27.0]).unwrap();
        assert!(close(&x, &[2.0, 3.0], 1e-15));
    }

    #[test]
    fn spd_solve_coupled() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = spd_solve(&a, &[3.0, 3.0]).unwrap();
        assert!(close(&x, &[1.0, 1.0], 1e-14));
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            spd_solve(&a, &[1.0, 1.0]),
            Err(Error::NotSpd { .. })
        ));
        let z = Matrix::zeros(2, 2);
        assert!(matches!(
            spd_solve(&z, &[1.0, 1.0]),
            Err(Error::NotSpd { .. })
        ));
    }

    #[test]
    fn spd_solve_residual_bound_on_random_gram() {
        let mut rng = crate::Rng::new(5);
        for n in [1usize, 4, 16, 64] {
            let g = Matrix::from_vec(n, n + 3, rng.normal_vec(n * (n + 3))).unwrap();
            let a = g.gram_rows();
            let rhs = rng.normal_vec(n);
            let x = spd_solve(&a, &rhs).unwrap();
            let ax = a.matvec(&x).unwrap();
            let res = ax
                .iter()
                .zip(&rhs)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(res <= 1e-10 * scale, "n={n} residual {res}");
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = crate::Rng::new(9);
        let n = 6;
        let a = Matrix::from_vec(n, n, rng.normal_vec(n * n)).unwrap();
        let inv = inverse(&a).unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(n)) < 1e-10);
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(inverse(&a), Err(Error::Singular));
    }

    #[test]
    fn transpose_matvec_agree() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let x = [1.0, -1.0];
        assert_eq!(a.tr_matvec(&x).unwrap(), a.transpose().matvec(&x).unwrap());
    }
}
