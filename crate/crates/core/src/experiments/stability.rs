//! Parameter divergence between runs on datasets differing in one example.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::models::{
    smoothed_hinge, smoothed_hinge_loss_grad, Dataset, StreamSpec, SyntheticStream,
};
use crate::optim::{BagmConfig, BagmState};
use crate::param::{distance, dot};
use crate::rng::Rng;
use crate::schedules::{MomentumSchedule, StepsizeSchedule, WeightSequence};

use super::{CsvTable, PartitionSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    /// Training set size.
    pub n: usize,
    pub partitions: Vec<PartitionSpec>,
    pub steps: usize,
    pub repetitions: usize,
    pub probes: usize,
    pub eta: f64,
    pub eps: f64,
    /// Momentum; zero matches the analysed setting, anything else is
    /// exploratory.
    pub beta: f64,
    /// Replace one example of `S` to build `S′`; `false` runs both on `S`.
    pub perturb: bool,
    pub stream: StreamSpec,
    pub seed: u64,
}

impl StabilityConfig {
    /// `B ∈ {1, 2, d}` on the 100-feature stream.
    pub fn paper(seed: u64) -> Self {
        StabilityConfig {
            n: 100,
            partitions: vec![
                PartitionSpec::Single,
                PartitionSpec::Sizes(vec![50, 50]),
                PartitionSpec::Coordinatewise,
            ],
            steps: 1000,
            repetitions: 50,
            probes: 100,
            eta: 0.01,
            eps: 1e-8,
            beta: 0.0,
            perturb: true,
            stream: StreamSpec::paper(),
            seed,
        }
    }

    fn bagm(&self) -> Result<BagmConfig> {
        Ok(BagmConfig::new(
            WeightSequence::Constant { a: 1.0 },
            StepsizeSchedule::inv_sqrt(self.eta)?,
            MomentumSchedule::constant(self.beta)?,
            self.eps,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.steps == 0 || self.repetitions == 0 || self.probes == 0 {
            return Err(Error::config(
                "n",
                "n, steps, repetitions and probes must all be at least 1",
            ));
        }
        if self.partitions.is_empty() {
            return Err(Error::config("partitions", "must not be empty"));
        }
        if self.beta != 0.0 {
            log::warn!(
                "stability probe with beta = {} is outside the analysed setting",
                self.beta
            );
        }
        self.stream.validate()?;
        for p in &self.partitions {
            p.build(self.stream.dim())?;
        }
        self.bagm()?.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrace {
    pub partition: PartitionSpec,
    /// Mean `Δ_t = ‖θ_t − θ′_t‖` for `t = 1..=steps+1`.
    pub delta: Vec<f64>,
    /// Mean over probes and repetitions of `|f(θ_t; z) − f(θ′_t; z)|`.
    pub loss_gap: Vec<f64>,
}

impl StabilityTrace {
    pub fn final_delta(&self) -> f64 {
        *self.delta.last().expect("non-empty")
    }
}

pub fn stability_csv(traces: &[StabilityTrace]) -> CsvTable {
    let len = traces[0].delta.len();
    let steps: Vec<u64> = (1..=len as u64).collect();
    let mut cols: Vec<(String, &[f64])> = Vec::new();
    for t in traces {
        cols.push((format!("delta_B{}", t.partition.label()), &t.delta[..]));
    }
    for t in traces {
        cols.push((format!("ftilde_B{}", t.partition.label()), &t.loss_gap[..]));
    }
    super::write_columns("t", &steps, &cols)
}

fn loss_gap(a: &[f64], b: &[f64], probes: &Dataset) -> f64 {
    let mut s = 0.0;
    for i in 0..probes.len() {
        let z = probes.row(i);
        let y = probes.y[i];
        s += (smoothed_hinge(y * dot(a, z)) - smoothed_hinge(y * dot(b, z))).abs();
    }
    s / probes.len() as f64
}

fn run_repetition(
    cfg: &StabilityConfig,
    partitions: &[BlockPartition],
    rep: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let rng = Rng::new(cfg.seed).child(rep as u64);
    let mut stream = SyntheticStream::new(cfg.stream.clone(), rng.child(0))?;
    let s = stream.dataset(cfg.n)?;
    let probes = stream.dataset(cfg.probes)?;
    let mut s_prime = s.clone();
    let mut idx_rng = rng.child(1);
    if cfg.perturb {
        let j = idx_rng.index(cfg.n);
        let (x, y) = stream.next_sample();
        s_prime.x.as_mut_slice()[j * s.dim()..(j + 1) * s.dim()].copy_from_slice(&x);
        s_prime.y[j] = y;
    }
    let indices: Vec<usize> = (0..cfg.steps).map(|_| idx_rng.index(cfg.n)).collect();
    let d = s.dim();

    partitions
        .iter()
        .map(|p| {
            let mut a = BagmState::new(cfg.bagm()?, p)?;
            let mut b = BagmState::new(cfg.bagm()?, p)?;
            let mut ta = vec![0.0; d];
            let mut tb = vec![0.0; d];
            let mut delta = Vec::with_capacity(cfg.steps + 1);
            let mut gap = Vec::with_capacity(cfg.steps + 1);
            delta.push(distance(&ta, &tb));
            gap.push(loss_gap(&ta, &tb, &probes));
            for &i in &indices {
                let (_, ga) = smoothed_hinge_loss_grad(&ta, s.row(i), s.y[i]);
                let (_, gb) = smoothed_hinge_loss_grad(&tb, s_prime.row(i), s_prime.y[i]);
                a.step(&mut ta, &ga, p)?;
                b.step(&mut tb, &gb, p)?;
                delta.push(distance(&ta, &tb));
                gap.push(loss_gap(&ta, &tb, &probes));
            }
            Ok((delta, gap))
        })
        .collect()
}

pub fn run_stability_probe(cfg: &StabilityConfig) -> Result<Vec<StabilityTrace>> {
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
    let reps = cfg.repetitions as f64;
    Ok(cfg
        .partitions
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut delta = vec![0.0; cfg.steps + 1];
            let mut loss_gap = vec![0.0; cfg.steps + 1];
            for o in &outcomes {
                for (m, v) in delta.iter_mut().zip(&o[k].0) {
                    *m += v / reps;
                }
                for (m, v) in loss_gap.iter_mut().zip(&o[k].1) {
                    *m += v / reps;
                }
            }
            StabilityTrace {
                partition: spec.clone(),
                delta,
                loss_gap,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> StabilityConfig {
        let mut cfg = StabilityConfig::paper(seed);
        cfg.steps = 50;
        cfg.repetitions = 3;
        cfg.probes = 10;
        cfg.n = 20;
        cfg
    }

    #[test]
    fn identical_data_never_diverges() {
        let mut cfg = small(1);
        cfg.perturb = false;
        for tr in run_stability_probe(&cfg).unwrap() {
            assert!(tr.delta.iter().all(|&v| v == 0.0));
            assert!(tr.loss_gap.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn starts_equal() {
        for tr in run_stability_probe(&small(2)).unwrap() {
            assert_eq!(tr.delta[0], 0.0);
        }
    }
}
