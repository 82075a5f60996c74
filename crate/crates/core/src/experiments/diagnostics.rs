//! Second-moment statistics that predict when a block partition beats the
//! coordinatewise one.

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::models::{smoothed_hinge_loss_grad, StreamSpec, SyntheticStream};
use crate::optim::{BagmConfig, BagmState};
use crate::rng::Rng;
use crate::schedules::{MomentumSchedule, StepsizeSchedule, WeightSequence};

use super::{fmt_float, CsvTable, PartitionSpec};

fn check_epochs(epochs: &[Vec<Vec<f64>>], dim: usize) -> Result<()> {
    if epochs.is_empty() || epochs.iter().any(Vec::is_empty) {
        return Err(Error::config(
            "epochs",
            "need at least one epoch with one gradient",
        ));
    }
    for g in epochs.iter().flatten() {
        if g.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: g.len(),
            });
        }
    }
    Ok(())
}

fn epoch_means(epoch: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; epoch[0].len()];
    for g in epoch {
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi += gi * gi;
        }
    }
    let n = epoch.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// `σ_i²`: the largest per-epoch mean of `g_i²`.
pub fn coordinate_sigma_sq(epochs: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let dim = epochs.first().and_then(|e| e.first()).map_or(0, Vec::len);
    check_epochs(epochs, dim)?;
    let mut out = vec![0.0f64; dim];
    for e in epochs {
        for (o, m) in out.iter_mut().zip(epoch_means(e)) {
            *o = o.max(m);
        }
    }
    Ok(out)
}

/// `σ_b²`: the largest per-epoch mean of `‖g_{G_b}‖² / d_b`.
pub fn block_sigma_sq(epochs: &[Vec<Vec<f64>>], p: &BlockPartition) -> Result<Vec<f64>> {
    check_epochs(epochs, p.dim())?;
    let mut out = vec![0.0f64; p.num_blocks()];
    for e in epochs {
        let m = epoch_means(e);
        for (b, block) in p.blocks().iter().enumerate() {
            let s: f64 = block.indices().map(|i| m[i]).sum();
            out[b] = out[b].max(s / block.size() as f64);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r_min: f64,
}

/// The three coordinatewise-to-blockwise ratios built from `σ_i²` and `σ_b²`.
pub fn corollary_ratios(
    sigma_i_sq: &[f64],
    sigma_b_sq: &[f64],
    p: &BlockPartition,
    eps: f64,
) -> Result<Ratios> {
    if sigma_i_sq.len() != p.dim() || sigma_b_sq.len() != p.num_blocks() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: sigma_i_sq.len(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::config("epsilon", "must be positive"));
    }
    let e2 = eps * eps;
    let lg = |s2: f64| (s2 / e2).ln_1p();
    let (mut n1, mut n2, mut n3) = (0.0, 0.0, 0.0);
    for &s2 in sigma_i_sq {
        n1 += lg(s2);
        n2 += s2.sqrt();
        n3 += s2.sqrt() * lg(s2);
    }
    let (mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0);
    for (block, &s2) in p.blocks().iter().zip(sigma_b_sq) {
        let db = block.size() as f64;
        d1 += db * lg(s2);
        d2 += db * s2.sqrt();
        d3 += db * s2.sqrt() * lg(s2);
    }
    let (r1, r2, r3) = (n1 / d1, n2 / d2, n3 / d3);
    Ok(Ratios {
        r1,
        r2,
        r3,
        r_min: r1.min(r2).min(r3),
    })
}

/// `max_t max_b v̂_{t,b}` over a recorded trace.
pub fn vbar(trace: &[Vec<f64>]) -> f64 {
    trace.iter().flatten().fold(0.0, |m, &v| m.max(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostics {
    pub size: usize,
    pub sigma_b_sq: f64,
    /// Coefficient of variation of `{σ_i²}` in the block; `None` when the
    /// block's mean is zero.
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub sigma_i_sq: Vec<f64>,
    pub blocks: Vec<BlockDiagnostics>,
    pub ratios: Ratios,
    pub eps: f64,
    pub vbar_d: Option<f64>,
    pub vbar_tilde: Option<f64>,
}

impl DiagnosticsReport {
    pub fn with_vbar(mut self, vbar_d: f64, vbar_tilde: f64) -> Self {
        self.vbar_d = Some(vbar_d);
        self.vbar_tilde = Some(vbar_tilde);
        self
    }

    /// `√((v̄_d + ε²)/(v̄_B̃ + ε²))`
    pub fn vbar_ratio(&self) -> Option<f64> {
        let e2 = self.eps * self.eps;
        Some(((self.vbar_d? + e2) / (self.vbar_tilde? + e2)).sqrt())
    }

    pub fn to_csv(&self) -> CsvTable {
        let header = [
            "block",
            "d_b",
            "sigma_b_sq",
            "cv",
            "r1",
            "r2",
            "r3",
            "r_min",
            "vbar_ratio",
        ]
        .map(String::from)
        .to_vec();
        let mut rows: Vec<Vec<String>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(b, bd)| {
                let mut r = vec![
                    b.to_string(),
                    bd.size.to_string(),
                    fmt_float(bd.sigma_b_sq),
                    bd.cv.map_or_else(|| "NaN".to_string(), fmt_float),
                ];
                r.extend(std::iter::repeat_n(String::new(), 5));
                r
            })
            .collect();
        let mut summary = vec![
            "summary".to_string(),
            String::new(),
            String::new(),
            String::new(),
        ];
        summary.extend(
            [
                self.ratios.r1,
                self.ratios.r2,
                self.ratios.r3,
                self.ratios.r_min,
            ]
            .into_iter()
            .map(fmt_float),
        );
        summary.push(
            self.vbar_ratio()
                .map_or_else(|| "NaN".to_string(), fmt_float),
        );
        rows.push(summary);
        CsvTable { header, rows }
    }
}

fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// Statistics from per-sample gradients grouped by epoch.
pub fn compute_diagnostics(
    epochs: &[Vec<Vec<f64>>],
    p: &BlockPartition,
    eps: f64,
) -> Result<DiagnosticsReport> {
    let sigma_i_sq = coordinate_sigma_sq(epochs)?;
    let sigma_b_sq = block_sigma_sq(epochs, p)?;
    let ratios = corollary_ratios(&sigma_i_sq, &sigma_b_sq, p, eps)?;
    let blocks = p
        .blocks()
        .iter()
        .zip(&sigma_b_sq)
        .enumerate()
        .map(|(b, (block, &s))| {
            let vals: Vec<f64> = block.indices().map(|i| sigma_i_sq[i]).collect();
            let cv = coefficient_of_variation(&vals);
            if cv.is_none() {
                log::warn!(
                    "block {b}: zero mean second moment, coefficient of variation undefined"
                );
            }
            BlockDiagnostics {
                size: block.size(),
                sigma_b_sq: s,
                cv,
            }
        })
        .collect();
    Ok(DiagnosticsReport {
        sigma_i_sq,
        blocks,
        ratios,
        eps,
        vbar_d: None,
        vbar_tilde: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub n: usize,
    pub epochs: usize,
    pub partition: PartitionSpec,
    pub eta: f64,
    pub beta: f64,
    pub eps: f64,
    pub stream: StreamSpec,
    pub seed: u64,
}

impl DiagnosticsConfig {
    pub fn paper(seed: u64) -> Self {
        DiagnosticsConfig {
            n: 1000,
            epochs: 5,
            partition: PartitionSpec::Sizes(vec![50, 50]),
            eta: 1.0,
            beta: 0.9,
            eps: 1e-8,
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
}

/// Trains BAGM with `B̃` and with `B = d` on a fixed sample, shuffling each
/// epoch. Moments come from the `B̃` run's stochastic gradients; `v̄` from both.
pub fn run_diagnostics(cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    if cfg.n == 0 || cfg.epochs == 0 {
        return Err(Error::config("epochs", "n and epochs must be at least 1"));
    }
    let rng = Rng::new(cfg.seed);
    let data = SyntheticStream::new(cfg.stream.clone(), rng.child(0))?.dataset(cfg.n)?;
    let d = data.dim();
    let tilde = cfg.partition.build(d)?;
    let coord = BlockPartition::coordinatewise(d)?;

    let mut order_rng = rng.child(1);
    let orders: Vec<Vec<usize>> = (0..cfg.epochs)
        .map(|_| {
            let mut idx: Vec<usize> = (0..cfg.n).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, order_rng.index(i + 1));
            }
            idx
        })
        .collect();

    let run = |p: &BlockPartition, collect: bool| -> Result<(f64, Vec<Vec<Vec<f64>>>)> {
        let mut opt = BagmState::new(cfg.bagm()?, p)?;
        let mut theta = vec![0.0; d];
        let mut top = 0.0f64;
        let mut epochs = Vec::new();
        for order in &orders {
            let mut grads = Vec::new();
            for &i in order {
                let (_, g) = smoothed_hinge_loss_grad(&theta, data.row(i), data.y[i]);
                opt.step(&mut theta, &g, p)?;
                top = top.max(vbar(&[opt.v_hat().to_vec()]));
                if collect {
                    grads.push(g);
                }
            }
            epochs.push(grads);
        }
        Ok((top, epochs))
    };
    let (vbar_tilde, epochs) = run(&tilde, true)?;
    let (vbar_d, _) = run(&coord, false)?;
    Ok(compute_diagnostics(&epochs, &tilde, cfg.eps)?.with_vbar(vbar_d, vbar_tilde))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_two_blocks() {
        let p = BlockPartition::from_sizes(&[2, 2]).unwrap();
        let r = corollary_ratios(&[1.0, 1.0, 4.0, 4.0], &[1.0, 4.0], &p, 1.0).unwrap();
        assert!((r.r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_block_has_zero_cv() {
        let p = BlockPartition::from_sizes(&[3]).unwrap();
        let epochs = vec![vec![vec![2.0, -2.0, 2.0]]];
        let rep = compute_diagnostics(&epochs, &p, 1e-3).unwrap();
        assert_eq!(rep.blocks[0].cv, Some(0.0));
    }

    #[test]
    fn zero_block_cv_is_undefined() {
        let p = BlockPartition::from_sizes(&[1, 2]).unwrap();
        let epochs = vec![vec![vec![1.0, 0.0, 0.0]]];
        let rep = compute_diagnostics(&epochs, &p, 1e-3).unwrap();
        assert_eq!(rep.blocks[1].cv, None);
        assert!(rep.to_csv().to_string().contains("NaN"));
    }

    #[test]
    fn run_reports_vbar_ratio() {
        let mut cfg = DiagnosticsConfig::paper(1);
        cfg.n = 50;
        cfg.epochs = 2;
        let rep = run_diagnostics(&cfg).unwrap();
        assert!(rep.vbar_ratio().unwrap() > 0.0);
        assert!(rep.ratios.r_min > 0.0);
    }
}
