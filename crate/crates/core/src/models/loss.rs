//! Losses for linear models.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::param::dot;

/// `max(0, 1 − y⟨θ, x⟩)` and a subgradient. At margin exactly 1 the zero
/// subgradient is returned.
pub fn hinge_loss_grad(theta: &[f64], x: &[f64], y: f64) -> (f64, Vec<f64>) {
    let margin = y * dot(theta, x);
    if margin < 1.0 {
        (1.0 - margin, x.iter().map(|xi| -y * xi).collect())
    } else {
        (0.0, vec![0.0; x.len()])
    }
}

/// Smoothed hinge loss as a function of the margin `m = y⟨θ, x⟩`.
pub fn smoothed_hinge(margin: f64) -> f64 {
    if margin <= 0.0 {
        0.5 - margin
    } else if margin < 1.0 {
        0.5 * (1.0 - margin) * (1.0 - margin)
    } else {
        0.0
    }
}

/// Derivative of [`smoothed_hinge`] with respect to the margin.
pub fn smoothed_hinge_slope(margin: f64) -> f64 {
    if margin <= 0.0 {
        -1.0
    } else if margin < 1.0 {
        -(1.0 - margin)
    } else {
        0.0
    }
}

pub fn smoothed_hinge_loss_grad(theta: &[f64], x: &[f64], y: f64) -> (f64, Vec<f64>) {
    let margin = y * dot(theta, x);
    let s = smoothed_hinge_slope(margin) * y;
    (smoothed_hinge(margin), x.iter().map(|xi| s * xi).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    Sample(usize),
    Full,
}

/// Squared loss `(xᵢᵀθ − yᵢ)²` for one sample or `‖Xθ − y‖²` for the full
/// batch, with gradient `2(xᵢᵀθ − yᵢ)xᵢ` resp. `2Xᵀ(Xθ − y)`.
pub fn least_squares_grad(
    theta: &[f64],
    x: &Matrix,
    y: &[f64],
    batch: Batch,
) -> Result<(f64, Vec<f64>)> {
    if theta.len() != x.cols() {
        return Err(Error::Dimension {
            expected: x.cols(),
            got: theta.len(),
        });
    }
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    match batch {
        Batch::Sample(i) => {
            if i >= x.rows() {
                return Err(Error::Dimension {
                    expected: x.rows(),
                    got: i,
                });
            }
            let row = x.row(i);
            let r = dot(row, theta) - y[i];
            Ok((r * r, row.iter().map(|v| 2.0 * r * v).collect()))
        }
        Batch::Full => {
            let resid: Vec<f64> = x.matvec(theta)?.iter().zip(y).map(|(p, t)| p - t).collect();
            let loss = dot(&resid, &resid);
            let mut g = x.tr_matvec(&resid)?;
            g.iter_mut().for_each(|v| *v *= 2.0);
            Ok((loss, g))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Hinge,
    SmoothedHinge,
    LeastSquares,
}

/// A linear model `⟨θ, x⟩` paired with a per-sample loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta: Vec<f64>,
    pub loss: LossKind,
}

impl LinearModel {
    pub fn zeros(dim: usize, loss: LossKind) -> Self {
        LinearModel {
            theta: vec![0.0; dim],
            loss,
        }
    }

    /// Loss and gradient on one sample `(x, y)`; `y` is a ±1 label for the
    /// hinge losses and a regression target for least squares.
    pub fn loss_grad(&self, x: &[f64], y: f64) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.theta.len() {
            return Err(Error::Dimension {
                expected: self.theta.len(),
                got: x.len(),
            });
        }
        Ok(match self.loss {
            LossKind::Hinge => hinge_loss_grad(&self.theta, x, y),
            LossKind::SmoothedHinge => smoothed_hinge_loss_grad(&self.theta, x, y),
            LossKind::LeastSquares => {
                let r = dot(&self.theta, x) - y;
                (r * r, x.iter().map(|v| 2.0 * r * v).collect())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_examples() {
        let (l, g) = hinge_loss_grad(&[0.0, 0.0], &[0.5, 3.0], -1.0);
        assert_eq!(l, 1.0);
        assert_eq!(g, vec![0.5, 3.0]);

        let (l, g) = hinge_loss_grad(&[2.0, 0.0], &[1.0, 7.0], 1.0);
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));

        let (l, g) = hinge_loss_grad(&[1.0, 0.0], &[0.5, 3.0], 1.0);
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![-0.5, -3.0]);

        // margin exactly 1 takes the zero subgradient
        let (l, g) = hinge_loss_grad(&[1.0], &[1.0], 1.0);
        assert_eq!((l, g), (0.0, vec![0.0]));
    }

    #[test]
    fn smoothed_hinge_examples() {
        // margin 0.5
        let (l, g) = smoothed_hinge_loss_grad(&[0.5], &[1.0], 1.0);
        assert_eq!(l, 0.125);
        assert_eq!(g, vec![-0.5]);
        let (l, g) = smoothed_hinge_loss_grad(&[1.7], &[1.0], 1.0);
        assert_eq!((l, g), (0.0, vec![0.0]));
        let (l, g) = smoothed_hinge_loss_grad(&[0.0, 0.0], &[2.0, -1.0], -1.0);
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![2.0, -1.0]);
    }

    #[test]
    fn smoothed_hinge_knots_are_c1() {
        // evaluate neighbouring pieces at the knots
        let lin = |m: f64| 0.5 - m;
        let quad = |m: f64| 0.5 * (1.0 - m) * (1.0 - m);
        assert!((lin(0.0) - quad(0.0)).abs() < 1e-12);
        assert!((-1.0f64 - (-(1.0 - 0.0))).abs() < 1e-12);
        assert!(quad(1.0).abs() < 1e-12);
        assert!((-(1.0 - 1.0f64)).abs() < 1e-12);
        assert_eq!(smoothed_hinge(0.0), 0.5);
        assert_eq!(smoothed_hinge_slope(0.0), -1.0);
        assert_eq!(smoothed_hinge(1.0), 0.0);
        assert_eq!(smoothed_hinge_slope(1.0), 0.0);
    }

    #[test]
    fn least_squares_examples() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let (l, g) = least_squares_grad(&[0.0, 0.0], &x, &[2.0], Batch::Full).unwrap();
        assert_eq!(l, 4.0);
        assert_eq!(g, vec![-4.0, 0.0]);
        let (_, g1) = least_squares_grad(&[0.0, 0.0], &x, &[2.0], Batch::Sample(0)).unwrap();
        assert_eq!(g1, g);

        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let (l, g) = least_squares_grad(&[1.0, 1.0], &x, &[3.0, 1.0], Batch::Full).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        assert!(least_squares_grad(&[1.0, 1.0], &x, &[3.0, 1.0], Batch::Sample(2)).is_err());
    }

    #[test]
    fn linear_model_dispatch() {
        let m = LinearModel::zeros(2, LossKind::SmoothedHinge);
        assert_eq!(m.loss_grad(&[1.0, 1.0], 1.0).unwrap().0, 0.5);
        assert!(m.loss_grad(&[1.0], 1.0).is_err());
    }
}
