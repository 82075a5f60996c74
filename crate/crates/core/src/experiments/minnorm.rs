//! BAG on underdetermined least squares and on one layer of a square MLP.

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::linalg::Matrix;
use crate::models::{
    least_squares_grad, min_norm_ls_oracle, mlp_forward_grad, Activation, Batch, Dataset, MlpModel,
    RowSpaceProjector,
};
use crate::optim::BagState;
use crate::param::{distance, norm};
use crate::rng::Rng;

use super::PartitionSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormConfig {
    pub n: usize,
    pub d: usize,
    pub partition: PartitionSpec,
    pub iterations: usize,
    /// Stop early once `‖Xθ − y‖ ≤ tolerance · ‖y‖`.
    pub tolerance: f64,
    pub eta: f64,
    pub eps: f64,
    pub seed: u64,
    /// Starting point; zero when `None`.
    pub initial: Option<Vec<f64>>,
    /// Use this data instead of a Gaussian instance.
    pub data: Option<Dataset>,
}

impl MinNormConfig {
    pub fn new(n: usize, d: usize, partition: PartitionSpec, seed: u64) -> Self {
        MinNormConfig {
            n,
            d,
            partition,
            iterations: 100_000,
            tolerance: 1e-12,
            eta: 0.1,
            eps: 1e-8,
            seed,
            initial: None,
            data: None,
        }
    }

    fn dataset(&self, rng: &mut Rng) -> Result<Dataset> {
        match &self.data {
            Some(ds) => Ok(ds.clone()),
            None => {
                if self.n == 0 || self.d == 0 {
                    return Err(Error::config("n", "n and d must be positive"));
                }
                let x = Matrix::from_vec(self.n, self.d, rng.normal_vec(self.n * self.d))?;
                Dataset::new(x, rng.normal_vec(self.n))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinNormResult {
    pub theta: Vec<f64>,
    pub oracle: Vec<f64>,
    /// `‖θ − θ_mn‖ / ‖θ_mn‖`
    pub relative_distance: f64,
    /// Largest relative distance of any iterate's block `b` from the row space
    /// of `X_{:,G_b}`.
    pub max_rowspace_residual: f64,
    /// `u_b = X_{:,G_b} θ_{G_b}`; these sum to `Xθ`.
    pub block_targets: Vec<Vec<f64>>,
    pub relative_residual: f64,
    pub iterations: usize,
    pub optimizer: BagState,
    pub data: Dataset,
}

fn block_columns(x: &Matrix, p: &BlockPartition) -> Vec<(Vec<usize>, Matrix)> {
    p.blocks()
        .iter()
        .map(|b| {
            let idx: Vec<usize> = b.indices().collect();
            let sub = x.select_columns(&idx);
            (idx, sub)
        })
        .collect()
}

fn rowspace_residual(theta: &[f64], blocks: &[(Vec<usize>, RowSpaceProjector)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (idx, proj) in blocks {
        let tb: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
        worst = worst.max(proj.relative_residual(&tb)?);
    }
    Ok(worst)
}

pub fn run_minnorm_ls(cfg: &MinNormConfig) -> Result<MinNormResult> {
    let mut rng = Rng::new(cfg.seed);
    let data = cfg.dataset(&mut rng)?;
    let (n, d) = (data.len(), data.dim());
    let p = cfg.partition.build(d)?;
    let oracle = min_norm_ls_oracle(&data.x, &data.y)?;
    let projectors = block_columns(&data.x, &p)
        .into_iter()
        .map(|(idx, sub)| Ok((idx, RowSpaceProjector::new(sub)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut theta = match &cfg.initial {
        Some(t) if t.len() != d => {
            return Err(Error::Dimension {
                expected: d,
                got: t.len(),
            })
        }
        Some(t) => t.clone(),
        None => vec![0.0; d],
    };
    let mut opt = BagState::for_partition(&p, cfg.eta, cfg.eps)?;
    let y_norm = norm(&data.y).max(f64::MIN_POSITIVE);
    let full_residual = |theta: &[f64]| -> Result<f64> {
        let (loss, _) = least_squares_grad(theta, &data.x, &data.y, Batch::Full)?;
        Ok(loss.sqrt() / y_norm)
    };

    let mut max_res = rowspace_residual(&theta, &projectors)?;
    let mut iterations = 0;
    let mut rel = full_residual(&theta)?;
    while iterations < cfg.iterations && rel > cfg.tolerance {
        let i = rng.index(n);
        let (_, g) = least_squares_grad(&theta, &data.x, &data.y, Batch::Sample(i))?;
        opt.step(&mut theta, &g, &p)?;
        iterations += 1;
        max_res = max_res.max(rowspace_residual(&theta, &projectors)?);
        if iterations % n == 0 {
            rel = full_residual(&theta)?;
        }
    }
    rel = full_residual(&theta)?;

    let block_targets = block_columns(&data.x, &p)
        .into_iter()
        .map(|(idx, sub)| {
            let tb: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
            sub.matvec(&tb)
        })
        .collect::<Result<Vec<_>>>()?;
    let relative_distance = distance(&theta, &oracle) / norm(&oracle).max(f64::MIN_POSITIVE);
    Ok(MinNormResult {
        theta,
        oracle,
        relative_distance,
        max_rowspace_residual: max_res,
        block_targets,
        relative_residual: rel,
        iterations,
        optimizer: opt,
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerwiseConfig {
    pub layers: usize,
    pub d: usize,
    pub n: usize,
    pub activation: Activation,
    pub iterations: usize,
    /// Stop early once the training loss falls below this.
    pub tolerance: f64,
    pub eta: f64,
    pub eps: f64,
    pub seed: u64,
}

impl LayerwiseConfig {
    pub fn new(layers: usize, d: usize, n: usize, slope: f64, seed: u64) -> Result<Self> {
        Ok(LayerwiseConfig {
            layers,
            d,
            n,
            activation: Activation::leaky_relu(slope)?,
            iterations: 200_000,
            tolerance: 1e-20,
            eta: 0.1,
            eps: 1e-8,
            seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LayerwiseResult {
    pub weights: Matrix,
    /// `H_{l−1}ᵀ(H_{l−1}H_{l−1}ᵀ)⁻¹Φ_l⁻¹(Y)`
    pub target: Matrix,
    pub relative_distance: f64,
    pub final_loss: f64,
    pub target_loss: f64,
    pub iterations: usize,
    pub optimizer: BagState,
}

/// Trains the bottom layer of a random square model from zero with per-row
/// stochastic gradients and a single-block BAG stepsize.
pub fn run_layerwise_minnorm(cfg: &LayerwiseConfig) -> Result<LayerwiseResult> {
    if cfg.layers == 0 {
        return Err(Error::config("layers", "must be at least 1"));
    }
    if !(cfg.n >= 1 && cfg.n < cfg.d) {
        return Err(Error::config(
            "n",
            format!("need 1 ≤ n < d, got n = {}, d = {}", cfg.n, cfg.d),
        ));
    }
    let mut rng = Rng::new(cfg.seed);
    let (n, d) = (cfg.n, cfg.d);
    let mut model = MlpModel::random(cfg.layers, d, cfg.activation, 0, &mut rng)?;
    let x = Matrix::from_vec(n, d, rng.normal_vec(n * d))?;
    let z = Matrix::from_vec(n, d, rng.normal_vec(n * d))?;
    let y = model.upper_map(&z)?;

    let h = model.hidden_input(&x)?;
    let pre = model.phi_inverse(&y)?;
    let mut target = Matrix::zeros(d, d);
    for j in 0..d {
        let col = min_norm_ls_oracle(&h, &pre.column(j))?;
        for (i, v) in col.into_iter().enumerate() {
            target[(i, j)] = v;
        }
    }
    let mut probe = model.clone();
    probe.set_trainable(target.clone())?;
    let target_loss = mlp_forward_grad(&probe, &x, &y)?.0;

    let p = BlockPartition::single(d * d)?;
    let mut opt = BagState::for_partition(&p, cfg.eta, cfg.eps)?;
    let mut w = vec![0.0; d * d];
    let rows: Vec<(Matrix, Matrix)> = (0..n)
        .map(|i| {
            Ok((
                Matrix::from_vec(1, d, x.row(i).to_vec())?,
                Matrix::from_vec(1, d, y.row(i).to_vec())?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut iterations = 0;
    let mut loss = mlp_forward_grad(&model, &x, &y)?.0;
    while iterations < cfg.iterations && loss > cfg.tolerance {
        let (xi, yi) = &rows[rng.index(n)];
        let (_, g) = mlp_forward_grad(&model, xi, yi)?;
        opt.step(&mut w, g.as_slice(), &p)?;
        model.set_trainable_flat(&w)?;
        iterations += 1;
        if iterations % 100 == 0 {
            loss = mlp_forward_grad(&model, &x, &y)?.0;
        }
    }
    let final_loss = mlp_forward_grad(&model, &x, &y)?.0;
    let weights = model.trainable_layer().clone();
    let relative_distance =
        weights.sub(&target).frobenius_norm() / target.frobenius_norm().max(f64::MIN_POSITIVE);
    Ok(LayerwiseResult {
        weights,
        target,
        relative_distance,
        final_loss,
        target_loss,
        iterations,
        optimizer: opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starting_at_interpolant_stays_put() {
        let mut cfg = MinNormConfig::new(3, 8, PartitionSpec::Single, 4);
        let mut rng = Rng::new(11);
        let x = Matrix::from_vec(3, 8, rng.normal_vec(24)).unwrap();
        let start = rng.normal_vec(8);
        let y = x.matvec(&start).unwrap();
        cfg.data = Some(Dataset::new(x, y).unwrap());
        cfg.initial = Some(start.clone());
        cfg.tolerance = -1.0;
        cfg.iterations = 50;
        let r = run_minnorm_ls(&cfg).unwrap();
        assert_eq!(r.iterations, 50);
        assert_eq!(r.theta, start);
    }

    #[test]
    fn block_targets_sum_to_prediction() {
        let mut cfg = MinNormConfig::new(4, 12, PartitionSpec::Sizes(vec![6, 6]), 9);
        cfg.iterations = 2000;
        let r = run_minnorm_ls(&cfg).unwrap();
        let pred = r.data.x.matvec(&r.theta).unwrap();
        for (i, p) in pred.iter().enumerate() {
            let s: f64 = r.block_targets.iter().map(|u| u[i]).sum();
            assert!((s - p).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_wide_sample_count() {
        let cfg = LayerwiseConfig::new(2, 4, 4, 0.1, 0).unwrap();
        assert!(run_layerwise_minnorm(&cfg).is_err());
    }
}
