//! Square multilayer perceptron `φ(⋯φ(φ(X W_1) W_2)⋯ W_{L−1}) W_L` with one
//! trainable layer and manual backpropagation.
//!
//! All layers are `d × d`. The activation is applied after every layer but
//! the last and must be bijective so the map above the trainable layer can be
//! inverted.

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, inverse, Matrix};
use crate::rng::Rng;

/// Largest accepted condition estimate for a fixed upper layer.
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    LeakyRelu { slope: f64 },
    Tanh,
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::config(
                "slope",
                format!("must be positive, got {slope}"),
            ));
        }
        Ok(Activation::LeakyRelu { slope })
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => z,
            Activation::LeakyRelu { slope } => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu { slope } => {
                if z >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }

    /// Inverse; `NaN` outside the range (only possible for tanh).
    pub fn inverse(&self, a: f64) -> f64 {
        match *self {
            Activation::Identity => a,
            Activation::LeakyRelu { slope } => {
                if a >= 0.0 {
                    a
                } else {
                    a / slope
                }
            }
            Activation::Tanh => {
                if a.abs() < 1.0 {
                    a.atanh()
                } else {
                    f64::NAN
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Matrix>,
    activation: Activation,
    trainable: usize,
}

impl MlpModel {
    pub fn new(layers: Vec<Matrix>, activation: Activation, trainable: usize) -> Result<Self> {
        let d = match layers.first() {
            Some(w) => w.rows(),
            None => return Err(Error::config("layers", "model needs at least one layer")),
        };
        if trainable >= layers.len() {
            return Err(Error::config(
                "trainable",
                format!("layer {trainable} out of range ({} layers)", layers.len()),
            ));
        }
        if let Activation::LeakyRelu { slope } = activation {
            Activation::leaky_relu(slope)?;
        }
        for (i, w) in layers.iter().enumerate() {
            if w.rows() != d || w.cols() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: if w.rows() != d { w.rows() } else { w.cols() },
                });
            }
            if i > trainable {
                let cond = condition_estimate(w)?;
                if cond > MAX_CONDITION {
                    return Err(Error::IllConditioned(cond));
                }
            }
        }
        Ok(MlpModel {
            layers,
            activation,
            trainable,
        })
    }

    /// `num_layers` layers of width `d`; fixed layers are `I + 0.1 G`
    /// (resampled until well conditioned) and the trainable layer is zero.
    pub fn random(
        num_layers: usize,
        d: usize,
        activation: Activation,
        trainable: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(num_layers);
        for i in 0..num_layers {
            if i == trainable {
                layers.push(Matrix::zeros(d, d));
                continue;
            }
            let w = loop {
                let mut w = Matrix::identity(d);
                for v in w.as_mut_slice() {
                    *v += 0.1 * rng.normal();
                }
                match condition_estimate(&w) {
                    Ok(c) if c <= MAX_CONDITION => break w,
                    _ => continue,
                }
            };
            layers.push(w);
        }
        MlpModel::new(layers, activation, trainable)
    }

    pub fn dim(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn trainable_index(&self) -> usize {
        self.trainable
    }

    pub fn layer(&self, i: usize) -> &Matrix {
        &self.layers[i]
    }

    pub fn trainable_layer(&self) -> &Matrix {
        &self.layers[self.trainable]
    }

    pub fn set_trainable(&mut self, w: Matrix) -> Result<()> {
        let d = self.dim();
        if w.rows() != d || w.cols() != d {
            return Err(Error::Dimension {
                expected: d * d,
                got: w.rows() * w.cols(),
            });
        }
        self.layers[self.trainable] = w;
        Ok(())
    }

    /// Trainable weights from a flat row-major vector.
    pub fn set_trainable_flat(&mut self, w: &[f64]) -> Result<()> {
        let d = self.dim();
        self.set_trainable(Matrix::from_vec(d, d, w.to_vec())?)
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len()
    }

    /// `H_{l−1}`: the input representation of the trainable layer.
    pub fn hidden_input(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for j in 0..self.trainable {
            h = h.matmul(&self.layers[j])?;
            if self.activated(j) {
                h = h.map(|v| self.activation.apply(v));
            }
        }
        Ok(h)
    }

    /// `Φ_l(Z)`: everything above the trainable layer's linear map.
    pub fn upper_map(&self, z: &Matrix) -> Result<Matrix> {
        let mut a = z.clone();
        for j in self.trainable..self.layers.len() {
            if j > self.trainable {
                a = a.matmul(&self.layers[j])?;
            }
            if self.activated(j) {
                a = a.map(|v| self.activation.apply(v));
            }
        }
        Ok(a)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let h = self.hidden_input(x)?;
        self.upper_map(&h.matmul(self.trainable_layer())?)
    }

    /// `Φ_l⁻¹(Y)`
    pub fn phi_inverse(&self, y: &Matrix) -> Result<Matrix> {
        let mut a = y.clone();
        for j in (self.trainable..self.layers.len()).rev() {
            if self.activated(j) {
                a = a.map(|v| self.activation.inverse(v));
                if a.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("targets", "outside the activation's range"));
                }
            }
            if j > self.trainable {
                a = a.matmul(&inverse(&self.layers[j])?)?;
            }
        }
        Ok(a)
    }
}

/// Squared loss `‖Φ_l(H_{l−1} W_l) − Y‖²` and its gradient with respect to
/// the trainable layer.
pub fn mlp_forward_grad(model: &MlpModel, x: &Matrix, y: &Matrix) -> Result<(f64, Matrix)> {
    let d = model.dim();
    if x.cols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.cols(),
        });
    }
    if y.rows() != x.rows() || y.cols() != d {
        return Err(Error::Dimension {
            expected: x.rows() * d,
            got: y.rows() * y.cols(),
        });
    }
    let h = model.hidden_input(x)?;
    let act = model.activation;
    let k = model.trainable;

    // forward, keeping pre-activations
    let mut pre = Vec::with_capacity(model.layers.len() - k);
    let mut a = h.clone();
    for j in k..model.layers.len() {
        let z = a.matmul(&model.layers[j])?;
        a = if model.activated(j) {
            z.map(|v| act.apply(v))
        } else {
            z.clone()
        };
        pre.push(z);
    }
    let resid = a.sub(y);
    let loss = resid.as_slice().iter().map(|r| r * r).sum();

    // backward
    let mut delta = resid.map(|r| 2.0 * r);
    for j in (k..model.layers.len()).rev() {
        let z = &pre[j - k];
        if model.activated(j) {
            for (dv, zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *dv *= act.derivative(*zv);
            }
        }
        if j > k {
            delta = delta.matmul(&model.layers[j].transpose())?;
        }
    }
    let grad = h.transpose().matmul(&delta)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::loss::{least_squares_grad, Batch};

    #[test]
    fn leaky_relu_round_trip() {
        let a = Activation::leaky_relu(0.1).unwrap();
        for z in [-3.0, 0.0, 5.0] {
            assert!((a.inverse(a.apply(z)) - z).abs() < 1e-15);
        }
        assert!(Activation::leaky_relu(0.0).is_err());
    }

    #[test]
    fn identity_model_inverse_is_identity() {
        let d = 3;
        let model = MlpModel::new(
            vec![
                Matrix::zeros(d, d),
                Matrix::identity(d),
                Matrix::identity(d),
            ],
            Activation::Identity,
            0,
        )
        .unwrap();
        let y = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        assert_eq!(model.phi_inverse(&y).unwrap(), y);
    }

    #[test]
    fn single_layer_reduces_to_least_squares() {
        let mut rng = Rng::new(2);
        let (n, d) = (3, 4);
        let x = Matrix::from_vec(n, d, rng.normal_vec(n * d)).unwrap();
        let y = Matrix::from_vec(n, d, rng.normal_vec(n * d)).unwrap();
        let w = Matrix::from_vec(d, d, rng.normal_vec(d * d)).unwrap();
        let model = MlpModel::new(vec![w.clone()], Activation::Identity, 0).unwrap();
        let (loss, g) = mlp_forward_grad(&model, &x, &y).unwrap();
        let mut total = 0.0;
        for j in 0..d {
            let (l, gj) = least_squares_grad(&w.column(j), &x, &y.column(j), Batch::Full).unwrap();
            total += l;
            for i in 0..d {
                assert!((g[(i, j)] - gj[i]).abs() < 1e-12);
            }
        }
        assert!((loss - total).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_interpolating_weights() {
        let mut rng = Rng::new(8);
        let (n, d) = (3, 5);
        let act = Activation::leaky_relu(0.1).unwrap();
        let mut model = MlpModel::random(2, d, act, 0, &mut rng).unwrap();
        let x = Matrix::from_vec(n, d, rng.normal_vec(n * d)).unwrap();
        let w = Matrix::from_vec(d, d, rng.normal_vec(d * d)).unwrap();
        model.set_trainable(w).unwrap();
        let y = model.forward(&x).unwrap();
        let (loss, g) = mlp_forward_grad(&model, &x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn phi_inverse_round_trip_random() {
        let mut rng = Rng::new(13);
        let d = 6;
        for act in [Activation::leaky_relu(0.1).unwrap(), Activation::Tanh] {
            let model = MlpModel::random(3, d, act, 0, &mut rng).unwrap();
            let z = Matrix::from_vec(4, d, rng.normal_vec(4 * d)).unwrap();
            let y = model.upper_map(&z).unwrap();
            let back = model.phi_inverse(&y).unwrap();
            assert!(model.upper_map(&back).unwrap().max_abs_diff(&y) < 1e-8);
            assert!(back.max_abs_diff(&z) < 1e-8);
        }
    }

    #[test]
    fn rejects_singular_upper_layer() {
        let mut w = Matrix::identity(2);
        w[(1, 1)] = 0.0;
        assert!(MlpModel::new(vec![Matrix::zeros(2, 2), w], Activation::Identity, 0).is_err());
        let mut w = Matrix::identity(2);
        w[(1, 1)] = 1e-9;
        assert!(matches!(
            MlpModel::new(vec![Matrix::zeros(2, 2), w], Activation::Identity, 0),
            Err(Error::IllConditioned(_))
        ));
    }
}
