//! Best blockwise diagonal scaling in hindsight.
//!
//! For `s = [q_1 1_{d_1}, …, q_B 1_{d_B}]` with `s ≥ 0` and `⟨s, 1⟩ ≤ c`, the
//! objective `Σ_t ‖g_t‖²_{Diag(s)⁻¹} = Σ_b ‖g_{1:T,G_b}‖² / q_b` is minimised by
//! `q_b = c ‖g_{1:T,G_b}‖ / (√d_b Σ_i √d_i ‖g_{1:T,G_i}‖)`.

use crate::error::{Error, Result};
use crate::layout::BlockPartition;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockScaling {
    pub q: Vec<f64>,
    pub c: f64,
}

impl BlockScaling {
    /// Per-coordinate scaling vector `s`.
    pub fn coordinate_scaling(&self, p: &BlockPartition) -> Vec<f64> {
        let mut s = vec![0.0; p.dim()];
        for (block, &q) in p.blocks().iter().zip(&self.q) {
            for i in block.indices() {
                s[i] = q;
            }
        }
        s
    }

    /// `⟨s, 1⟩ = Σ_b q_b d_b`
    pub fn budget_used(&self, sizes: &[usize]) -> f64 {
        self.q.iter().zip(sizes).map(|(q, &d)| q * d as f64).sum()
    }
}

/// `Σ_b ‖g_{1:T,G_b}‖² / q_b`, with a zero-history block contributing 0.
pub fn scaling_objective(block_norms_sq: &[f64], q: &[f64]) -> f64 {
    block_norms_sq
        .iter()
        .zip(q)
        .map(|(&n, &qb)| if n == 0.0 { 0.0 } else { n / qb })
        .sum()
}

/// Closed-form optimum from the per-block history norms `‖g_{1:T,G_b}‖₂`.
///
/// Blocks whose whole history is zero get `q_b = 0`. If every block is zero,
/// the budget is spread uniformly (`q_b = c / d`).
pub fn optimal_block_scaling_from_norms(
    norms: &[f64],
    sizes: &[usize],
    c: f64,
) -> Result<BlockScaling> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::config(
            "c",
            format!("budget must be positive, got {c}"),
        ));
    }
    if norms.len() != sizes.len() {
        return Err(Error::Dimension {
            expected: sizes.len(),
            got: norms.len(),
        });
    }
    let z: f64 = norms
        .iter()
        .zip(sizes)
        .map(|(n, &d)| (d as f64).sqrt() * n)
        .sum();
    let q = if z == 0.0 {
        let d: usize = sizes.iter().sum();
        vec![c / d as f64; sizes.len()]
    } else {
        norms
            .iter()
            .zip(sizes)
            .map(|(n, &d)| c * n / ((d as f64).sqrt() * z))
            .collect()
    };
    Ok(BlockScaling { q, c })
}

/// Closed-form optimum for a `T × d` gradient history.
pub fn optimal_block_scaling(
    history: &[Vec<f64>],
    p: &BlockPartition,
    c: f64,
) -> Result<BlockScaling> {
    let mut sq = vec![0.0; p.num_blocks()];
    for g in history {
        if g.len() != p.dim() {
            return Err(Error::Dimension {
                expected: p.dim(),
                got: g.len(),
            });
        }
        for (acc, n) in sq.iter_mut().zip(p.block_norms_sq(g)) {
            *acc += n;
        }
    }
    let norms: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    optimal_block_scaling_from_norms(&norms, &p.sizes(), c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_block_example() {
        let s = optimal_block_scaling_from_norms(&[3.0, 4.0], &[1, 4], 1.0).unwrap();
        assert!((s.q[0] - 3.0 / 11.0).abs() < 1e-15);
        assert!((s.q[1] - 2.0 / 11.0).abs() < 1e-15);
        assert!((s.budget_used(&[1, 4]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_block_spreads_budget() {
        let p = BlockPartition::single(5).unwrap();
        for hist in [vec![vec![1.0, 2.0, 0.0, -1.0, 3.0]], vec![vec![0.0; 5]]] {
            let s = optimal_block_scaling(&hist, &p, 2.0).unwrap();
            assert!((s.q[0] - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_block_gets_zero() {
        let s = optimal_block_scaling_from_norms(&[0.0, 2.0], &[3, 2], 1.0).unwrap();
        assert_eq!(s.q[0], 0.0);
        assert!((s.budget_used(&[3, 2]) - 1.0).abs() < 1e-15);
        assert!(scaling_objective(&[0.0, 4.0], &s.q).is_finite());
    }

    #[test]
    fn rejects_bad_budget() {
        assert!(optimal_block_scaling_from_norms(&[1.0], &[1], 0.0).is_err());
    }
}
