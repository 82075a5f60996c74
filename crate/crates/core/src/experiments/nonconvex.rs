//! BAGM on the smoothed hinge loss: decay of the full-gradient norm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::models::{smoothed_hinge_slope, Dataset, StreamSpec, SyntheticStream};
use crate::optim::{BagmConfig, BagmState};
use crate::param::dot;
use crate::rng::Rng;
use crate::schedules::{MomentumSchedule, StepsizeSchedule, WeightSequence};

use super::{mean_std, CsvTable, PartitionSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexConfig {
    pub steps: usize,
    pub repetitions: usize,
    pub partitions: Vec<PartitionSpec>,
    pub weights: WeightSequence,
    pub momentum: MomentumSchedule,
    pub stepsize: StepsizeSchedule,
    pub eps: f64,
    pub pool_size: usize,
    /// Estimate the gradient norm every `stride` steps (and at the end).
    pub stride: usize,
    pub stream: StreamSpec,
    pub seed: u64,
}

impl NonconvexConfig {
    pub fn paper(seed: u64) -> Self {
        NonconvexConfig {
            steps: 1000,
            repetitions: 10,
            partitions: PartitionSpec::paper_set(),
            weights: WeightSequence::Constant { a: 1.0 },
            momentum: MomentumSchedule::Constant { beta: 0.9 },
            stepsize: StepsizeSchedule::InvSqrt { eta: 1.0 },
            eps: 1e-8,
            pool_size: 10_000,
            stride: 10,
            stream: StreamSpec::paper(),
            seed,
        }
    }

    fn bagm(&self) -> BagmConfig {
        BagmConfig::new(self.weights, self.stepsize, self.momentum, self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.pool_size == 0 {
            return Err(Error::config("pool_size", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.partitions.is_empty() {
            return Err(Error::config("partitions", "must not be empty"));
        }
        self.stream.validate()?;
        for p in &self.partitions {
            p.build(self.stream.dim())?;
        }
        self.bagm().validate()
    }

    /// Step indices (number of updates taken) at which the estimate is made.
    pub fn record_steps(&self) -> Vec<u64> {
        let mut s: Vec<u64> = (0..=self.steps)
            .step_by(self.stride)
            .map(|k| k as u64)
            .collect();
        if *s.last().expect("non-empty") != self.steps as u64 {
            s.push(self.steps as u64);
        }
        s
    }
}

/// `‖(1/N) Σ_i ∇f_i(θ)‖²` over the pool, for the smoothed hinge loss.
pub fn pool_gradient_norm_sq(theta: &[f64], pool: &Dataset) -> f64 {
    let mut g = vec![0.0; pool.dim()];
    for i in 0..pool.len() {
        let x = pool.row(i);
        let y = pool.y[i];
        let s = smoothed_hinge_slope(y * dot(theta, x)) * y;
        if s != 0.0 {
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += s * xj;
            }
        }
    }
    let n = pool.len() as f64;
    g.iter().map(|v| (v / n) * (v / n)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub partition: PartitionSpec,
    pub steps: Vec<u64>,
    /// Estimate of `E‖∇F(θ_t)‖²` averaged over repetitions.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ConvergenceTrace {
    pub fn final_value(&self) -> f64 {
        *self.mean.last().expect("at least one record")
    }
}

pub fn convergence_csv(traces: &[ConvergenceTrace]) -> CsvTable {
    let cols: Vec<(String, &[f64])> = traces
        .iter()
        .map(|t| {
            (
                format!("grad_norm_sq_B{}", t.partition.label()),
                &t.mean[..],
            )
        })
        .collect();
    super::write_columns("t", &traces[0].steps, &cols)
}

fn run_repetition(
    cfg: &NonconvexConfig,
    partitions: &[BlockPartition],
    rep: usize,
) -> Result<Vec<Vec<f64>>> {
    let rng = Rng::new(cfg.seed).child(rep as u64);
    let pool = SyntheticStream::new(cfg.stream.clone(), rng.child(0))?.dataset(cfg.pool_size)?;
    let train = SyntheticStream::new(cfg.stream.clone(), rng.child(1))?.dataset(cfg.steps)?;
    let record = cfg.record_steps();
    let d = cfg.stream.dim();

    partitions
        .iter()
        .map(|p| {
            let mut opt = BagmState::new(cfg.bagm(), p)?;
            let mut theta = vec![0.0; d];
            let mut out = Vec::with_capacity(record.len());
            let mut next = record.iter().peekable();
            for k in 0..=cfg.steps {
                if next.peek() == Some(&&(k as u64)) {
                    out.push(pool_gradient_norm_sq(&theta, &pool));
                    next.next();
                }
                if k == cfg.steps {
                    break;
                }
                let x = train.row(k);
                let y = train.y[k];
                let s = smoothed_hinge_slope(y * dot(&theta, x)) * y;
                let g: Vec<f64> = x.iter().map(|v| s * v).collect();
                opt.step(&mut theta, &g, p)?;
            }
            Ok(out)
        })
        .collect()
}

pub fn run_nonconvex_experiment(cfg: &NonconvexConfig) -> Result<Vec<ConvergenceTrace>> {
    cfg.validate()?;
    let d = cfg.stream.dim();
    let partitions = cfg
        .partitions
        .iter()
        .map(|p| p.build(d))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, &partitions, rep))
        .collect::<Result<Vec<_>>>()?;
    let steps = cfg.record_steps();
    Ok(cfg
        .partitions
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let runs: Vec<Vec<f64>> = outcomes.iter().map(|o| o[k].clone()).collect();
            let (mean, std) = mean_std(&runs);
            ConvergenceTrace {
                partition: spec.clone(),
                steps: steps.clone(),
                mean,
                std,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn estimate_at_zero_is_mean_of_minus_yx() {
        let mut s = SyntheticStream::new(StreamSpec::paper(), Rng::new(3)).unwrap();
        let pool = s.dataset(200).unwrap();
        let mut g = vec![0.0; pool.dim()];
        for i in 0..pool.len() {
            for (gj, xj) in g.iter_mut().zip(pool.row(i)) {
                *gj -= pool.y[i] * xj / pool.len() as f64;
            }
        }
        let expected: f64 = g.iter().map(|v| v * v).sum();
        let got = pool_gradient_norm_sq(&vec![0.0; pool.dim()], &pool);
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn separated_pool_has_zero_estimate() {
        let pool = Dataset::new(
            Matrix::from_rows(&[vec![2.0], vec![-3.0]]).unwrap(),
            vec![1.0, -1.0],
        )
        .unwrap();
        assert_eq!(pool_gradient_norm_sq(&[1.0], &pool), 0.0);
    }

    #[test]
    fn record_steps_include_end() {
        let mut cfg = NonconvexConfig::paper(0);
        cfg.steps = 25;
        assert_eq!(cfg.record_steps(), vec![0, 10, 20, 25]);
    }
}
