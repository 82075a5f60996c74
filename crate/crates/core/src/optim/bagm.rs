use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::schedules::{EmaSchedule, MomentumSchedule, StepsizeSchedule, WeightSequence};

use super::transform::{add_weight_decay, clip_global_norm};
use super::{check_dims, check_finite};

/// How the weighted second-moment average is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulation {
    /// `v̂_t = α_t v̂_{t−1} + (1 − α_t) ‖g_{t,G_b}‖² / d_b`
    Ema,
    /// `v_t = v_{t−1} + a_t ‖g_{t,G_b}‖² / d_b`, `v̂_t = v_t / A_t`. Overflows
    /// for fast-growing weight sequences; prefer [`Accumulation::Ema`].
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BagmConfig {
    pub weights: EmaSchedule,
    pub accumulation: Accumulation,
    pub stepsize: StepsizeSchedule,
    pub momentum: MomentumSchedule,
    pub eps: f64,
    /// Permit `ε = 0`. Only meant for checking closed-form examples.
    pub allow_zero_eps: bool,
    /// Optional global-norm gradient clipping threshold.
    pub clip_norm: Option<f64>,
    /// `λ` in `g ← g + λθ`, applied before clipping.
    pub weight_decay: f64,
}

impl BagmConfig {
    pub fn new(
        weights: WeightSequence,
        stepsize: StepsizeSchedule,
        momentum: MomentumSchedule,
        eps: f64,
    ) -> Self {
        BagmConfig {
            weights: EmaSchedule::Weights(weights),
            accumulation: Accumulation::Ema,
            stepsize,
            momentum,
            eps,
            allow_zero_eps: false,
            clip_norm: None,
            weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps < 0.0 || (self.eps == 0.0 && !self.allow_zero_eps) {
            return Err(Error::config(
                "epsilon",
                format!("must be positive, got {}", self.eps),
            ));
        }
        if self.accumulation == Accumulation::Direct
            && !matches!(self.weights, EmaSchedule::Weights(_))
        {
            return Err(Error::config(
                "accumulation",
                "direct accumulation needs a weight sequence",
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config(
                    "clip_norm",
                    format!("must be positive, got {c}"),
                ));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            ));
        }
        Ok(())
    }
}

/// Blockwise adaptive gradient with momentum (BAGM).
#[derive(Debug, Clone, PartialEq)]
pub struct BagmState {
    pub(crate) config: BagmConfig,
    /// Raw weighted sums (direct accumulation only).
    pub(crate) v: Vec<f64>,
    pub(crate) v_hat: Vec<f64>,
    pub(crate) m: Vec<f64>,
    pub(crate) a_total: f64,
    pub(crate) t: u64,
}

impl BagmState {
    pub fn new(config: BagmConfig, p: &BlockPartition) -> Result<Self> {
        config.validate()?;
        Ok(BagmState {
            config,
            v: vec![0.0; p.num_blocks()],
            v_hat: vec![0.0; p.num_blocks()],
            m: vec![0.0; p.dim()],
            a_total: 0.0,
            t: 0,
        })
    }

    pub fn config(&self) -> &BagmConfig {
        &self.config
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `v̂_{t,b}` for every block.
    pub fn v_hat(&self) -> &[f64] {
        &self.v_hat
    }

    pub fn momentum(&self) -> &[f64] {
        &self.m
    }

    /// `A_t` (may be `+inf` in EMA mode for the exponential sequence).
    pub fn weight_total(&self) -> f64 {
        self.a_total
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64], p: &BlockPartition) -> Result<()> {
        check_dims(theta, g, p)?;
        if self.v_hat.len() != p.num_blocks() || self.m.len() != p.dim() {
            return Err(Error::Dimension {
                expected: self.v_hat.len(),
                got: p.num_blocks(),
            });
        }
        check_finite(g)?;

        let transformed;
        let g = if self.config.weight_decay > 0.0 || self.config.clip_norm.is_some() {
            let mut buf = g.to_vec();
            if self.config.weight_decay > 0.0 {
                add_weight_decay(&mut buf, theta, self.config.weight_decay);
            }
            if let Some(c) = self.config.clip_norm {
                clip_global_norm(&mut buf, c);
            }
            check_finite(&buf)?;
            transformed = buf;
            &transformed[..]
        } else {
            g
        };

        let t = self.t + 1;
        let beta = self.config.momentum.beta_at(t)?;
        let eta = self.config.stepsize.stepsize_at(t)?;

        match self.config.accumulation {
            Accumulation::Direct => {
                let EmaSchedule::Weights(seq) = self.config.weights else {
                    unreachable!("validated in BagmConfig::validate")
                };
                let a = seq.weight(t)?;
                let total = self.a_total + a;
                if !a.is_finite() || !total.is_finite() {
                    return Err(Error::WeightOverflow(t));
                }
                self.a_total = total;
                for (b, block) in p.blocks().iter().enumerate() {
                    let sq = block_sq(g, block.ranges());
                    self.v[b] += a * sq / block.size() as f64;
                    self.v_hat[b] = self.v[b] / total;
                }
            }
            Accumulation::Ema => {
                let alpha = self.config.weights.ema_coeff(t)?;
                if let EmaSchedule::Weights(seq) = self.config.weights {
                    self.a_total += seq.weight(t)?;
                }
                for (b, block) in p.blocks().iter().enumerate() {
                    let sq = block_sq(g, block.ranges());
                    self.v_hat[b] =
                        alpha * self.v_hat[b] + (1.0 - alpha) * sq / block.size() as f64;
                }
            }
        }

        let eps = self.config.eps;
        for (block, &vh) in p.blocks().iter().zip(&self.v_hat) {
            let denom = vh.sqrt() + eps;
            for r in block.ranges() {
                for i in r.clone() {
                    self.m[i] = beta * self.m[i] + (1.0 - beta) * g[i];
                }
                // ε = 0 with an all-zero block history: m is zero there too
                if denom == 0.0 {
                    continue;
                }
                let scale = eta / denom;
                for i in r.clone() {
                    theta[i] -= scale * self.m[i];
                }
            }
        }
        self.t = t;
        Ok(())
    }
}

fn block_sq(g: &[f64], ranges: &[std::ops::Range<usize>]) -> f64 {
    ranges
        .iter()
        .map(|r| g[r.clone()].iter().map(|x| x * x).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::BagState;

    fn cfg(eps: f64) -> BagmConfig {
        let mut c = BagmConfig::new(
            WeightSequence::constant(1.0).unwrap(),
            StepsizeSchedule::constant(1.0).unwrap(),
            MomentumSchedule::constant(0.0).unwrap(),
            eps,
        );
        c.allow_zero_eps = eps == 0.0;
        c
    }

    #[test]
    fn first_step_closed_form() {
        let p = BlockPartition::single(2).unwrap();
        for acc in [Accumulation::Ema, Accumulation::Direct] {
            let mut c = cfg(0.0);
            c.accumulation = acc;
            let mut s = BagmState::new(c, &p).unwrap();
            let mut theta = vec![0.0, 0.0];
            s.step(&mut theta, &[3.0, 4.0], &p).unwrap();
            assert!((s.v_hat()[0] - 12.5).abs() < 1e-14);
            assert!((theta[0] + 0.84853).abs() < 1e-5);
            assert!((theta[1] + 1.13137).abs() < 1e-5);
        }
    }

    #[test]
    fn matches_bag_on_first_step_only() {
        let p = BlockPartition::from_sizes(&[2, 1]).unwrap();
        let mut bagm = BagmState::new(cfg(0.0), &p).unwrap();
        let mut bag = BagState::for_partition(&p, 1.0, 0.0).unwrap();
        let mut a = vec![0.0; 3];
        let mut b = vec![0.0; 3];
        let g1 = [1.0, -2.0, 0.5];
        bagm.step(&mut a, &g1, &p).unwrap();
        bag.step(&mut b, &g1, &p).unwrap();
        assert_eq!(a, b);
        let g2 = [0.3, 0.1, -1.0];
        bagm.step(&mut a, &g2, &p).unwrap();
        bag.step(&mut b, &g2, &p).unwrap();
        // √(v/t) vs √v normalisation
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-3));
    }

    #[test]
    fn epsilon_must_be_positive() {
        let p = BlockPartition::single(2).unwrap();
        let mut c = cfg(0.0);
        c.allow_zero_eps = false;
        assert!(matches!(BagmState::new(c, &p), Err(Error::Config { .. })));
        let c = cfg(-1.0);
        assert!(BagmState::new(c, &p).is_err());
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let p = BlockPartition::single(2).unwrap();
        let mut s = BagmState::new(cfg(1e-8), &p).unwrap();
        let mut theta = vec![0.0, 0.0];
        assert!(matches!(
            s.step(&mut theta, &[1.0, f64::INFINITY], &p),
            Err(Error::NonFiniteGradient(1))
        ));
        assert_eq!(s.t(), 0);
        assert_eq!(theta, vec![0.0, 0.0]);
    }

    #[test]
    fn direct_mode_reports_overflow() {
        let p = BlockPartition::single(1).unwrap();
        let mut c = cfg(1e-8);
        c.weights = EmaSchedule::Weights(WeightSequence::exponential(0.5).unwrap());
        c.accumulation = Accumulation::Direct;
        let mut s = BagmState::new(c, &p).unwrap();
        let mut theta = vec![0.0];
        let err = (0..2000)
            .map(|_| s.step(&mut theta, &[1.0], &p))
            .find_map(|r| r.err());
        assert!(matches!(err, Some(Error::WeightOverflow(_))));
    }

    #[test]
    fn clipping_and_decay() {
        let p = BlockPartition::single(2).unwrap();
        let mut c = cfg(0.0);
        c.clip_norm = Some(1.0);
        let mut s = BagmState::new(c.clone(), &p).unwrap();
        let mut theta = vec![0.0, 0.0];
        s.step(&mut theta, &[30.0, 40.0], &p).unwrap();
        assert!((s.v_hat()[0] - 0.5).abs() < 1e-15);

        c.clip_norm = None;
        c.weight_decay = 0.5;
        let mut s = BagmState::new(c, &p).unwrap();
        let mut theta = vec![2.0, 0.0];
        s.step(&mut theta, &[0.0, 0.0], &p).unwrap();
        // effective gradient (1, 0): v̂ = 0.5, step 1/√0.5
        assert!((theta[0] - (2.0 - 1.0 / 0.5f64.sqrt())).abs() < 1e-14);
        assert_eq!(theta[1], 0.0);
    }
}
