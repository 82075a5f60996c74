use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::param::{dot, norm};

/// Minimum ℓ₂-norm interpolant `Xᵀ(XXᵀ)⁻¹y` of an underdetermined system.
pub fn min_norm_ls_oracle(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() > x.cols() {
        return Err(Error::RankDeficient);
    }
    let chol = Cholesky::factor(&x.gram_rows()).map_err(|_| Error::RankDeficient)?;
    let alpha = chol.solve(y)?;
    let theta = x.tr_matvec(&alpha)?;
    let resid = x
        .matvec(&theta)?
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(resid <= 1e-6 * scale) {
        return Err(Error::RankDeficient);
    }
    Ok(theta)
}

/// Orthogonal projector onto the row space of a full-row-rank `A`.
#[derive(Debug, Clone)]
pub struct RowSpaceProjector {
    a: Matrix,
    gram: Cholesky,
}

impl RowSpaceProjector {
    pub fn new(a: Matrix) -> Result<Self> {
        let gram = Cholesky::factor(&a.gram_rows()).map_err(|_| Error::RankDeficient)?;
        Ok(RowSpaceProjector { a, gram })
    }

    /// `Aᵀ(AAᵀ)⁻¹A v`
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let av = self.a.matvec(v)?;
        self.a.tr_matvec(&self.gram.solve(&av)?)
    }

    /// `‖v − Pv‖ / ‖v‖`, or 0 for `v = 0`.
    pub fn relative_residual(&self, v: &[f64]) -> Result<f64> {
        let nv = norm(v);
        if nv == 0.0 {
            return Ok(0.0);
        }
        let p = self.project(v)?;
        let r: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        Ok(dot(&r, &r).sqrt() / nv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(min_norm_ls_oracle(&x, &[2.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn diagonal_direction() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let t = min_norm_ls_oracle(&x, &[2.0]).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15 && (t[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]).unwrap();
        assert_eq!(
            min_norm_ls_oracle(&x, &[1.0, 2.0]),
            Err(Error::RankDeficient)
        );
    }

    #[test]
    fn projector_fixes_row_space() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let p = RowSpaceProjector::new(a).unwrap();
        assert!(p.relative_residual(&[3.0, 2.0, 2.0]).unwrap() < 1e-15);
        assert!((p.relative_residual(&[0.0, 1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
