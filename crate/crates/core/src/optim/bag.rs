use crate::error::{Error, Result};
use crate::layout::BlockPartition;

use super::{check_dims, check_finite};

/// Blockwise adaptive gradient (BAG) for online convex learning.
///
/// Each block `b` keeps `v_b = Σ_i ‖g_{i,G_b}‖² / d_b` and moves by
/// `−η g_{G_b} / (√v_b + ε)`. With one coordinate per block this is Adagrad.
#[derive(Debug, Clone, PartialEq)]
pub struct BagState {
    pub(crate) v: Vec<f64>,
    pub(crate) t: u64,
    pub eta: f64,
    pub eps: f64,
}

impl BagState {
    pub fn new(num_blocks: usize, eta: f64, eps: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("eta", format!("must be positive, got {eta}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::config(
                "epsilon",
                format!("must be non-negative, got {eps}"),
            ));
        }
        Ok(BagState {
            v: vec![0.0; num_blocks],
            t: 0,
            eta,
            eps,
        })
    }

    pub fn for_partition(p: &BlockPartition, eta: f64, eps: f64) -> Result<Self> {
        BagState::new(p.num_blocks(), eta, eps)
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64], p: &BlockPartition) -> Result<()> {
        check_dims(theta, g, p)?;
        if self.v.len() != p.num_blocks() {
            return Err(Error::Dimension {
                expected: self.v.len(),
                got: p.num_blocks(),
            });
        }
        check_finite(g)?;
        for (block, v) in p.blocks().iter().zip(self.v.iter_mut()) {
            let ranges = block.ranges();
            let sq: f64 = ranges
                .iter()
                .map(|r| g[r.clone()].iter().map(|x| x * x).sum::<f64>())
                .sum();
            *v += sq / block.size() as f64;
            let denom = v.sqrt() + self.eps;
            // only reachable with ε = 0 and an all-zero history for the block
            if denom == 0.0 {
                continue;
            }
            let scale = self.eta / denom;
            for r in ranges {
                for (th, gi) in theta[r.clone()].iter_mut().zip(&g[r.clone()]) {
                    *th -= scale * gi;
                }
            }
        }
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let p = BlockPartition::from_sizes(&[2, 3]).unwrap();
        let mut s = BagState::for_partition(&p, 0.1, 0.0).unwrap();
        let mut theta = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let before = theta.clone();
        s.step(&mut theta, &[0.0; 5], &p).unwrap();
        assert_eq!(theta, before);
        assert_eq!(s.v(), &[0.0, 0.0]);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn single_block_first_step() {
        let p = BlockPartition::single(2).unwrap();
        let mut s = BagState::for_partition(&p, 1.0, 0.0).unwrap();
        let mut theta = vec![0.0, 0.0];
        s.step(&mut theta, &[3.0, 4.0], &p).unwrap();
        assert!((s.v()[0] - 12.5).abs() < 1e-15);
        let r = 12.5f64.sqrt();
        assert!((theta[0] + 3.0 / r).abs() < 1e-15);
        assert!((theta[1] + 4.0 / r).abs() < 1e-15);
        assert!((theta[0] + 0.84853).abs() < 1e-5 && (theta[1] + 1.13137).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let p = BlockPartition::single(2).unwrap();
        let mut s = BagState::for_partition(&p, 1.0, 1e-8).unwrap();
        let mut theta = vec![0.0, 0.0];
        assert!(matches!(
            s.step(&mut theta, &[f64::NAN, 0.0], &p),
            Err(Error::NonFiniteGradient(0))
        ));
        assert!(matches!(
            s.step(&mut theta, &[1.0], &p),
            Err(Error::Dimension { .. })
        ));
        assert!(BagState::new(1, 0.0, 0.0).is_err());
        assert!(BagState::new(1, 1.0, -1.0).is_err());
    }
}
