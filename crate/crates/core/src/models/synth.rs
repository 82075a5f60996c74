//! Synthetic binary classification stream with block-structured features.
//!
//! Each sample draws a label `y ∈ {−1, +1}` uniformly. Every feature `i` of
//! block `b` is, independently, `N(c_b y, γ_b²)` with probability `p_b` and
//! zero otherwise.

use crate::error::{Error, Result};
use crate::layout::BlockPartition;
use crate::linalg::Matrix;
use crate::rng::Rng;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureBlock {
    pub width: usize,
    pub prob: f64,
    pub mean_scale: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub blocks: Vec<FeatureBlock>,
}

impl StreamSpec {
    /// 100 features: 50 from `N(10y, 100)` active w.p. 0.5, then 50 from
    /// `N(−5y, 25)` active w.p. 0.4.
    pub fn paper() -> Self {
        StreamSpec {
            blocks: vec![
                FeatureBlock {
                    width: 50,
                    prob: 0.5,
                    mean_scale: 10.0,
                    std: 10.0,
                },
                FeatureBlock {
                    width: 50,
                    prob: 0.4,
                    mean_scale: -5.0,
                    std: 5.0,
                },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    /// Partition matching the feature blocks.
    pub fn partition(&self) -> Result<BlockPartition> {
        BlockPartition::from_sizes(&self.blocks.iter().map(|b| b.width).collect::<Vec<_>>())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::config("stream", "no feature blocks"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.width == 0 {
                return Err(Error::config("stream", format!("block {i} has zero width")));
            }
            if !(0.0..=1.0).contains(&b.prob) {
                return Err(Error::config(
                    "stream",
                    format!("block {i}: probability {} not in [0, 1]", b.prob),
                ));
            }
            if !(b.std.is_finite() && b.std >= 0.0 && b.mean_scale.is_finite()) {
                return Err(Error::config("stream", format!("block {i}: bad mean/std")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: StreamSpec,
    rng: Rng,
}

impl SyntheticStream {
    pub fn new(spec: StreamSpec, rng: Rng) -> Result<Self> {
        spec.validate()?;
        Ok(SyntheticStream { spec, rng })
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Writes the next sample's features into `x` and returns its label.
    pub fn next_into(&mut self, x: &mut [f64]) -> f64 {
        let y = self.rng.sign();
        let mut i = 0;
        for b in &self.spec.blocks {
            for _ in 0..b.width {
                x[i] = if self.rng.uniform() < b.prob {
                    b.mean_scale * y + b.std * self.rng.normal()
                } else {
                    0.0
                };
                i += 1;
            }
        }
        y
    }

    pub fn next_sample(&mut self) -> (Vec<f64>, f64) {
        let mut x = vec![0.0; self.dim()];
        let y = self.next_into(&mut x);
        (x, y)
    }

    pub fn dataset(&mut self, n: usize) -> Result<Dataset> {
        let d = self.dim();
        let mut data = vec![0.0; n * d];
        let mut y = Vec::with_capacity(n);
        for row in data.chunks_mut(d) {
            y.push(self.next_into(row));
        }
        Dataset::new(Matrix::from_vec(n, d, data)?, y)
    }
}
