//! Online hinge-loss regret of BAG on the synthetic stream.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::linalg::Matrix;
use crate::models::{hinge_loss_grad, StreamSpec, SyntheticStream};
use crate::optim::BagState;
use crate::param::dot;
use crate::rng::Rng;

use super::{mean_std, PartitionSpec};

/// Full-batch Adagrad on the summed hinge loss of a realized sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorConfig {
    pub max_iters: usize,
    /// Stop once the best objective improved by less than `tol` over this
    /// many iterations.
    pub window: usize,
    pub tol: f64,
    pub eta: f64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        ComparatorConfig {
            max_iters: 100_000,
            window: 1000,
            tol: 1e-10,
            eta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    pub theta: Vec<f64>,
    /// `Σ_t f_t(θ*)`
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn summed_hinge(theta: &[f64], x: &Matrix, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let mut loss = 0.0;
    match grad {
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (i, &yi) in y.iter().enumerate() {
                let xi = x.row(i);
                let m = yi * dot(theta, xi);
                if m < 1.0 {
                    loss += 1.0 - m;
                    for (gj, xj) in g.iter_mut().zip(xi) {
                        *gj -= yi * xj;
                    }
                }
            }
        }
        None => {
            for (i, &yi) in y.iter().enumerate() {
                loss += (1.0 - yi * dot(theta, x.row(i))).max(0.0);
            }
        }
    }
    loss
}

/// Approximate minimizer of `Σ_t max(0, 1 − y_t⟨θ, x_t⟩)`; returns the best
/// iterate seen.
pub fn fit_comparator(x: &Matrix, y: &[f64], cfg: &ComparatorConfig) -> Result<Comparator> {
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if !(cfg.eta > 0.0) || cfg.window == 0 {
        return Err(Error::config(
            "comparator",
            "eta must be positive and window nonzero",
        ));
    }
    let d = x.cols();
    let mut theta = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut acc = vec![0.0; d];
    let mut best = theta.clone();
    let mut best_obj = summed_hinge(&theta, x, y, None);
    let mut history = vec![best_obj];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if best_obj == 0.0 {
            converged = true;
            break;
        }
        summed_hinge(&theta, x, y, Some(&mut g));
        for ((th, gj), a) in theta.iter_mut().zip(&g).zip(acc.iter_mut()) {
            *a += gj * gj;
            if *a > 0.0 {
                *th -= cfg.eta * gj / a.sqrt();
            }
        }
        iterations += 1;
        let obj = summed_hinge(&theta, x, y, None);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&theta);
        }
        history.push(best_obj);
        if iterations >= cfg.window && history[iterations - cfg.window] - best_obj < cfg.tol {
            converged = true;
            break;
        }
    }
    if best_obj == 0.0 {
        converged = true;
    }
    Ok(Comparator {
        theta: best,
        objective: best_obj,
        iterations,
        converged,
    })
}

/// Streams `D_b = max_t ‖θ_{t,G_b} − θ*_{G_b}‖` and `‖g_{1:T,G_b}‖²` for the
/// block regret bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundAccumulator {
    dist_sq: Vec<f64>,
    grad_sq: Vec<f64>,
}

impl BoundAccumulator {
    pub fn new(num_blocks: usize) -> Self {
        BoundAccumulator {
            dist_sq: vec![0.0; num_blocks],
            grad_sq: vec![0.0; num_blocks],
        }
    }

    /// Records iterate `θ_t` and the gradient taken there.
    pub fn observe(&mut self, theta: &[f64], g: &[f64], theta_star: &[f64], p: &BlockPartition) {
        for (b, block) in p.blocks().iter().enumerate() {
            let mut dist = 0.0;
            let mut gsq = 0.0;
            for i in block.indices() {
                let diff = theta[i] - theta_star[i];
                dist += diff * diff;
                gsq += g[i] * g[i];
            }
            self.dist_sq[b] = self.dist_sq[b].max(dist);
            self.grad_sq[b] += gsq;
        }
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.dist_sq.iter().map(|v| v.sqrt()).collect()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.grad_sq.iter().map(|v| v.sqrt()).collect()
    }

    /// `Σ_b [D_b² / (2η√d_b) + η√d_b] ‖g_{1:T,G_b}‖`
    pub fn bound(&self, p: &BlockPartition, eta: f64) -> f64 {
        p.blocks()
            .iter()
            .zip(self.dist_sq.iter().zip(&self.grad_sq))
            .map(|(block, (dsq, gsq))| {
                let sd = (block.size() as f64).sqrt();
                (dsq / (2.0 * eta * sd) + eta * sd) * gsq.sqrt()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub regret: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Slack allowed for an inexact comparator.
pub const COMPARATOR_SLACK: f64 = 1e-6;

/// Compares the realized regret with the block bound, with `D_b` taken from
/// `trajectory` (iterates `θ_1..θ_T`) and `gradients` (taken at those
/// iterates).
pub fn regret_bound_check(
    regret: f64,
    trajectory: &[Vec<f64>],
    gradients: &[Vec<f64>],
    theta_star: &[f64],
    p: &BlockPartition,
    eta: f64,
) -> Result<BoundCheck> {
    if trajectory.len() != gradients.len() {
        return Err(Error::Dimension {
            expected: trajectory.len(),
            got: gradients.len(),
        });
    }
    let mut acc = BoundAccumulator::new(p.num_blocks());
    for (theta, g) in trajectory.iter().zip(gradients) {
        if theta.len() != p.dim() || g.len() != p.dim() {
            return Err(Error::Dimension {
                expected: p.dim(),
                got: theta.len().min(g.len()),
            });
        }
        acc.observe(theta, g, theta_star, p);
    }
    let bound = acc.bound(p, eta);
    Ok(BoundCheck {
        regret,
        bound,
        holds: regret <= bound + COMPARATOR_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretConfig {
    pub horizon: usize,
    pub repetitions: usize,
    pub partitions: Vec<PartitionSpec>,
    pub eta: f64,
    pub eps: f64,
    pub stream: StreamSpec,
    pub seed: u64,
    pub comparator: ComparatorConfig,
}

impl RegretConfig {
    pub fn paper(seed: u64) -> Self {
        RegretConfig {
            horizon: 1000,
            repetitions: 100,
            partitions: PartitionSpec::paper_set(),
            eta: 0.01,
            eps: 1e-8,
            stream: StreamSpec::paper(),
            seed,
            comparator: ComparatorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.partitions.is_empty() {
            return Err(Error::config("partitions", "must not be empty"));
        }
        self.stream.validate()?;
        for p in &self.partitions {
            p.build(self.stream.dim())?;
        }
        BagState::new(1, self.eta, self.eps)?;
        Ok(())
    }
}

/// Regret curves for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub partition: PartitionSpec,
    /// `R(t)` averaged over repetitions, `t = 1..=T`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean cumulative online loss `Σ_{i≤t} f_i(θ_i)`.
    pub mean_cumulative: Vec<f64>,
    /// Mean comparator loss `Σ_{i≤t} f_i(θ*)`.
    pub mean_comparator: Vec<f64>,
    /// One bound check per repetition.
    pub bounds: Vec<BoundCheck>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        *self.mean.last().expect("horizon is at least 1")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub traces: Vec<RegretTrace>,
    /// Repetitions whose comparator hit the iteration cap.
    pub unconverged_comparators: Vec<usize>,
}

impl RegretReport {
    pub fn trace(&self, label: &str) -> Option<&RegretTrace> {
        self.traces.iter().find(|t| t.partition.label() == label)
    }

    pub fn bounds_hold(&self) -> bool {
        self.traces.iter().all(|t| t.bounds.iter().all(|b| b.holds))
    }

    pub fn to_csv(&self) -> super::CsvTable {
        let horizon = self.traces[0].mean.len();
        let steps: Vec<u64> = (1..=horizon as u64).collect();
        let mut cols = Vec::new();
        for tr in &self.traces {
            let k = tr.partition.label();
            cols.push((format!("mean_regret_B{k}"), &tr.mean[..]));
            cols.push((format!("std_regret_B{k}"), &tr.std[..]));
        }
        super::write_columns("t", &steps, &cols)
    }
}

struct RepOutcome {
    regret: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    comparator: Vec<f64>,
    bounds: Vec<BoundCheck>,
    converged: bool,
}

fn run_repetition(
    cfg: &RegretConfig,
    partitions: &[BlockPartition],
    rep: usize,
) -> Result<RepOutcome> {
    let rng = Rng::new(cfg.seed).child(rep as u64);
    let mut stream = SyntheticStream::new(cfg.stream.clone(), rng)?;
    let data = stream.dataset(cfg.horizon)?;
    let comp = fit_comparator(&data.x, &data.y, &cfg.comparator)?;

    let mut comp_cum = Vec::with_capacity(cfg.horizon);
    let mut acc = 0.0;
    for t in 0..cfg.horizon {
        acc += hinge_loss_grad(&comp.theta, data.row(t), data.y[t]).0;
        comp_cum.push(acc);
    }

    let d = data.dim();
    let mut regret = Vec::with_capacity(partitions.len());
    let mut cumulative = Vec::with_capacity(partitions.len());
    let mut bounds = Vec::with_capacity(partitions.len());
    for p in partitions {
        let mut opt = BagState::for_partition(p, cfg.eta, cfg.eps)?;
        let mut theta = vec![0.0; d];
        let mut bound = BoundAccumulator::new(p.num_blocks());
        let mut cum = Vec::with_capacity(cfg.horizon);
        let mut total = 0.0;
        for t in 0..cfg.horizon {
            let (loss, g) = hinge_loss_grad(&theta, data.row(t), data.y[t]);
            total += loss;
            cum.push(total);
            bound.observe(&theta, &g, &comp.theta, p);
            opt.step(&mut theta, &g, p)?;
        }
        let r: Vec<f64> = cum.iter().zip(&comp_cum).map(|(c, s)| c - s).collect();
        let final_r = *r.last().expect("horizon is at least 1");
        let b = bound.bound(p, cfg.eta);
        bounds.push(BoundCheck {
            regret: final_r,
            bound: b,
            holds: final_r <= b + COMPARATOR_SLACK,
        });
        regret.push(r);
        cumulative.push(cum);
    }
    Ok(RepOutcome {
        regret,
        cumulative,
        comparator: comp_cum,
        bounds,
        converged: comp.converged,
    })
}

pub fn run_regret_experiment(cfg: &RegretConfig) -> Result<RegretReport> {
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

    let unconverged_comparators = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.converged)
        .map(|(i, _)| i)
        .collect::<Vec<_>>();
    if !unconverged_comparators.is_empty() {
        log::warn!(
            "comparator did not converge in {} of {} repetitions",
            unconverged_comparators.len(),
            cfg.repetitions
        );
    }
    let comps: Vec<Vec<f64>> = outcomes.iter().map(|o| o.comparator.clone()).collect();
    let (mean_comparator, _) = mean_std(&comps);

    let traces = cfg
        .partitions
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let r: Vec<Vec<f64>> = outcomes.iter().map(|o| o.regret[k].clone()).collect();
            let c: Vec<Vec<f64>> = outcomes.iter().map(|o| o.cumulative[k].clone()).collect();
            let (mean, std) = mean_std(&r);
            let (mean_cumulative, _) = mean_std(&c);
            RegretTrace {
                partition: spec.clone(),
                mean,
                std,
                mean_cumulative,
                mean_comparator: mean_comparator.clone(),
                bounds: outcomes.iter().map(|o| o.bounds[k].clone()).collect(),
            }
        })
        .collect();
    Ok(RegretReport {
        traces,
        unconverged_comparators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_stream_gives_zero_bound() {
        let p = BlockPartition::equal(4, 2).unwrap();
        let traj = vec![vec![1.0; 4]; 3];
        let grads = vec![vec![0.0; 4]; 3];
        let c = regret_bound_check(0.0, &traj, &grads, &[0.0; 4], &p, 0.1).unwrap();
        assert_eq!(c.bound, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn comparator_separable_reaches_zero() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.5]]).unwrap();
        let c = fit_comparator(&x, &[1.0, -1.0], &ComparatorConfig::default()).unwrap();
        assert_eq!(c.objective, 0.0);
        assert!(c.converged);
    }

    #[test]
    fn single_round_regret_nonnegative() {
        let mut cfg = RegretConfig::paper(5);
        cfg.horizon = 1;
        cfg.repetitions = 4;
        let rep = run_regret_experiment(&cfg).unwrap();
        for tr in &rep.traces {
            assert!(tr.mean[0] >= -COMPARATOR_SLACK);
        }
    }
}
