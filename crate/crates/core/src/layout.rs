//! Tensor layouts and block partitions of a flat parameter vector.
//!
//! Every tensor is flattened row-major. A dense weight `DenseWeight { d_in,
//! d_out }` is stored input-major (`index = i * d_out + j`), so a row (one
//! input dimension) is contiguous and a column (one output dimension) is a
//! strided set of single-element intervals. Convolution kernels are stored as
//! `[c_out][c_in][h][w]`.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    ConvKernel {
        c_out: usize,
        c_in: usize,
        h: usize,
        w: usize,
    },
    DenseWeight {
        d_in: usize,
        d_out: usize,
    },
    BiasVector {
        n: usize,
    },
}

impl TensorKind {
    pub fn count(&self) -> usize {
        match *self {
            TensorKind::ConvKernel { c_out, c_in, h, w } => c_out * c_in * h * w,
            TensorKind::DenseWeight { d_in, d_out } => d_in * d_out,
            TensorKind::BiasVector { n } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpec {
    pub kind: TensorKind,
    pub offset: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelLayout {
    specs: Vec<TensorSpec>,
    total_dim: usize,
}

impl ModelLayout {
    /// Lays the tensors out back to back in the given order.
    pub fn new(kinds: &[TensorKind]) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Layout("layout has no tensors".into()));
        }
        let mut specs = Vec::with_capacity(kinds.len());
        let mut offset = 0;
        for (i, &kind) in kinds.iter().enumerate() {
            let count = kind.count();
            if count == 0 {
                return Err(Error::Layout(format!(
                    "tensor {i} has zero size ({kind:?})"
                )));
            }
            specs.push(TensorSpec {
                kind,
                offset,
                count,
            });
            offset += count;
        }
        Ok(ModelLayout {
            specs,
            total_dim: offset,
        })
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }
}

/// Block construction strategy for a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// One block per tensor.
    B1,
    /// One block per output column / output channel; biases per element.
    B2,
    /// One block per output column / per (out, in) kernel; biases per element.
    B3,
    /// One block per input row / input position; bias as a whole.
    B4,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "B1" | "B.1" => Ok(Strategy::B1),
            "B2" | "B.2" => Ok(Strategy::B2),
            "B3" | "B.3" => Ok(Strategy::B3),
            "B4" | "B.4" => Ok(Strategy::B4),
            _ => Err(Error::config(
                "strategy",
                format!("unknown block strategy `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    ranges: Vec<Range<usize>>,
    size: usize,
}

impl Block {
    fn new(ranges: Vec<Range<usize>>) -> Self {
        let size = ranges.iter().map(|r| r.len()).sum();
        Block { ranges, size }
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Number of coordinates `d_b`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().flat_map(|r| r.clone())
    }
}

/// A disjoint cover of `[0, d)` by blocks of coordinate intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockPartition {
    /// Validates that the blocks are non-empty, pairwise disjoint and cover
    /// `[0, dim)`. Adjacent intervals inside a block are merged.
    pub fn new(blocks: Vec<Vec<Range<usize>>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Partition("dimension must be positive".into()));
        }
        let mut seen = vec![false; dim];
        let mut out = Vec::with_capacity(blocks.len());
        for (b, mut ranges) in blocks.into_iter().enumerate() {
            ranges.retain(|r| !r.is_empty());
            if ranges.is_empty() {
                return Err(Error::Partition(format!("block {b} is empty")));
            }
            for r in &ranges {
                if r.end > dim {
                    return Err(Error::Partition(format!(
                        "block {b} interval {r:?} exceeds dimension {dim}"
                    )));
                }
                for i in r.clone() {
                    if seen[i] {
                        return Err(Error::Partition(format!("coordinate {i} assigned twice")));
                    }
                    seen[i] = true;
                }
            }
            ranges.sort_by_key(|r| r.start);
            out.push(Block::new(merge_adjacent(ranges)));
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("coordinate {i} not covered")));
        }
        Ok(BlockPartition { blocks: out, dim })
    }

    /// Consecutive blocks with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut blocks = Vec::with_capacity(sizes.len());
        for &s in sizes {
            blocks.push(vec![start..start + s]);
            start += s;
        }
        BlockPartition::new(blocks, start)
    }

    /// `B = 1`.
    pub fn single(dim: usize) -> Result<Self> {
        BlockPartition::new(vec![vec![0..dim]], dim)
    }

    /// `B = d`: every coordinate is its own block.
    pub fn coordinatewise(dim: usize) -> Result<Self> {
        BlockPartition::new((0..dim).map(|i| vec![i..i + 1]).collect(), dim)
    }

    /// `count` consecutive blocks of near-equal size (the first `dim % count`
    /// blocks get one extra coordinate).
    pub fn equal(dim: usize, count: usize) -> Result<Self> {
        if count == 0 || count > dim {
            return Err(Error::Partition(format!(
                "cannot split {dim} coordinates into {count} blocks"
            )));
        }
        let base = dim / count;
        let extra = dim % count;
        let sizes: Vec<usize> = (0..count).map(|b| base + usize::from(b < extra)).collect();
        BlockPartition::from_sizes(&sizes)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> Result<&Block> {
        self.blocks.get(b).ok_or(Error::BlockIndex {
            index: b,
            blocks: self.blocks.len(),
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::size).collect()
    }

    /// Block id of every coordinate.
    pub fn assignment(&self) -> Vec<usize> {
        let mut a = vec![0; self.dim];
        for (b, block) in self.blocks.iter().enumerate() {
            for i in block.indices() {
                a[i] = b;
            }
        }
        a
    }

    /// `‖g_{G_b}‖₂²` for every block.
    pub fn block_norms_sq(&self, g: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|block| {
                block
                    .ranges
                    .iter()
                    .map(|r| g[r.clone()].iter().map(|v| v * v).sum::<f64>())
                    .sum()
            })
            .collect()
    }
}

fn merge_adjacent(ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    let mut merged: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match merged.last_mut() {
            Some(last) if last.end == r.start => last.end = r.end,
            _ => merged.push(r),
        }
    }
    merged
}

/// `Σ_{i∈G_b} g_i²`
pub fn block_norm_sq(g: &[f64], partition: &BlockPartition, b: usize) -> Result<f64> {
    if g.len() != partition.dim() {
        return Err(Error::Dimension {
            expected: partition.dim(),
            got: g.len(),
        });
    }
    let block = partition.block(b)?;
    Ok(block.indices().map(|i| g[i] * g[i]).sum())
}

/// Builds the block partition of `layout` under `strategy`.
pub fn partition_build(layout: &ModelLayout, strategy: Strategy) -> Result<BlockPartition> {
    let mut blocks: Vec<Vec<Range<usize>>> = Vec::new();
    for spec in layout.specs() {
        let o = spec.offset;
        match (spec.kind, strategy) {
            (_, Strategy::B1) => blocks.push(vec![o..o + spec.count]),

            (TensorKind::DenseWeight { d_in, d_out }, Strategy::B2 | Strategy::B3) => {
                for j in 0..d_out {
                    blocks.push(
                        (0..d_in)
                            .map(|i| o + i * d_out + j)
                            .map(|k| k..k + 1)
                            .collect(),
                    );
                }
            }
            (TensorKind::DenseWeight { d_in, d_out }, Strategy::B4) => {
                for i in 0..d_in {
                    blocks.push(vec![o + i * d_out..o + (i + 1) * d_out]);
                }
            }

            (TensorKind::ConvKernel { c_out, c_in, h, w }, Strategy::B2) => {
                let per_out = c_in * h * w;
                for k in 0..c_out {
                    blocks.push(vec![o + k * per_out..o + (k + 1) * per_out]);
                }
            }
            (TensorKind::ConvKernel { c_out, c_in, h, w }, Strategy::B3) => {
                let hw = h * w;
                for k in 0..c_out * c_in {
                    blocks.push(vec![o + k * hw..o + (k + 1) * hw]);
                }
            }
            (TensorKind::ConvKernel { c_out, c_in, h, w }, Strategy::B4) => {
                let per_out = c_in * h * w;
                for p in 0..per_out {
                    blocks.push(
                        (0..c_out)
                            .map(|k| o + k * per_out + p)
                            .map(|k| k..k + 1)
                            .collect(),
                    );
                }
            }

            (TensorKind::BiasVector { n }, Strategy::B2 | Strategy::B3) => {
                for i in 0..n {
                    blocks.push(vec![o + i..o + i + 1]);
                }
            }
            (TensorKind::BiasVector { n }, Strategy::B4) => blocks.push(vec![o..o + n]),
        }
    }
    BlockPartition::new(blocks, layout.total_dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(c_out: usize, c_in: usize, h: usize, w: usize) -> TensorKind {
        TensorKind::ConvKernel { c_out, c_in, h, w }
    }

    #[test]
    fn conv_b3_one_block_per_kernel() {
        let layout = ModelLayout::new(&[conv(16, 3, 3, 3)]).unwrap();
        let p = partition_build(&layout, Strategy::B3).unwrap();
        assert_eq!(p.num_blocks(), 48);
        assert!(p.sizes().iter().all(|&s| s == 9));
    }

    #[test]
    fn conv_b4_one_block_per_input_position() {
        let layout = ModelLayout::new(&[conv(16, 3, 3, 3)]).unwrap();
        let p = partition_build(&layout, Strategy::B4).unwrap();
        assert_eq!(p.num_blocks(), 27);
        assert!(p.sizes().iter().all(|&s| s == 16));
    }

    #[test]
    fn conv_b2_one_block_per_output_channel() {
        let layout = ModelLayout::new(&[conv(16, 3, 3, 3)]).unwrap();
        let p = partition_build(&layout, Strategy::B2).unwrap();
        assert_eq!(p.num_blocks(), 16);
        assert!(p.sizes().iter().all(|&s| s == 27));
    }

    #[test]
    fn dense_and_bias_b1() {
        let layout = ModelLayout::new(&[
            TensorKind::DenseWeight {
                d_in: 100,
                d_out: 10,
            },
            TensorKind::BiasVector { n: 10 },
        ])
        .unwrap();
        let p = partition_build(&layout, Strategy::B1).unwrap();
        assert_eq!(p.sizes(), vec![1000, 10]);
    }

    #[test]
    fn dense_columns_are_strided() {
        let layout = ModelLayout::new(&[TensorKind::DenseWeight { d_in: 3, d_out: 2 }]).unwrap();
        let p = partition_build(&layout, Strategy::B2).unwrap();
        let cols: Vec<Vec<usize>> = p.blocks().iter().map(|b| b.indices().collect()).collect();
        assert_eq!(cols, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        let p4 = partition_build(&layout, Strategy::B4).unwrap();
        assert_eq!(p4.blocks()[1].ranges(), &[2..4]);
    }

    #[test]
    fn bias_handling_per_strategy() {
        let layout = ModelLayout::new(&[TensorKind::BiasVector { n: 5 }]).unwrap();
        assert_eq!(
            partition_build(&layout, Strategy::B2).unwrap().num_blocks(),
            5
        );
        assert_eq!(
            partition_build(&layout, Strategy::B3).unwrap().num_blocks(),
            5
        );
        assert_eq!(
            partition_build(&layout, Strategy::B4).unwrap().num_blocks(),
            1
        );
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(ModelLayout::new(&[]), Err(Error::Layout(_))));
        assert!(matches!(
            ModelLayout::new(&[TensorKind::BiasVector { n: 0 }]),
            Err(Error::Layout(_))
        ));
        assert!(matches!(
            ModelLayout::new(&[conv(2, 0, 3, 3)]),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(BlockPartition::new(vec![vec![0..2], vec![1..3]], 3).is_err());
        assert!(BlockPartition::new(vec![vec![0..2]], 3).is_err());
        assert!(BlockPartition::new(vec![vec![0..2], vec![]], 2).is_err());
        assert!(BlockPartition::new(vec![vec![0..1, 2..3], vec![1..2]], 3).is_ok());
    }

    #[test]
    fn block_norm_examples() {
        let p = BlockPartition::single(2).unwrap();
        assert_eq!(block_norm_sq(&[3.0, 4.0], &p, 0).unwrap(), 25.0);
        assert_eq!(block_norm_sq(&[0.0, 0.0], &p, 0).unwrap(), 0.0);
        let p = BlockPartition::from_sizes(&[2, 1]).unwrap();
        let g = [1.0, 2.0, 3.0];
        assert_eq!(block_norm_sq(&g, &p, 0).unwrap(), 5.0);
        assert_eq!(block_norm_sq(&g, &p, 1).unwrap(), 9.0);
        assert_eq!(
            block_norm_sq(&g, &p, 2),
            Err(Error::BlockIndex {
                index: 2,
                blocks: 2
            })
        );
    }

    #[test]
    fn equal_split_sizes() {
        assert_eq!(BlockPartition::equal(10, 3).unwrap().sizes(), vec![4, 3, 3]);
        assert!(BlockPartition::equal(2, 3).is_err());
    }
}
