//! Blockwise optimizers, reference optimizers and the closed-form optimal
//! blockwise scaling.

mod bag;
mod bagm;
pub mod checkpoint;
pub mod reference;
mod scaling;
pub mod transform;

pub use bag::BagState;
pub use bagm::{Accumulation, BagmConfig, BagmState};
pub use checkpoint::{state_deserialize, state_serialize, OptimizerState};
pub use scaling::{
    optimal_block_scaling, optimal_block_scaling_from_norms, scaling_objective, BlockScaling,
};

use crate::error::{Error, Result};
use crate::layout::BlockPartition;

/// Default ε for deep-learning style runs.
pub const DEFAULT_EPSILON: f64 = 1e-3;

pub(crate) fn check_dims(theta: &[f64], g: &[f64], p: &BlockPartition) -> Result<()> {
    if theta.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: theta.len(),
        });
    }
    if g.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: g.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(g: &[f64]) -> Result<()> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFiniteGradient(i)),
        None => Ok(()),
    }
}
