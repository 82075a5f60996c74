use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layout::BlockPartition;

/// A partition of a flat parameter vector described independently of its
/// dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PartitionSpec {
    /// One block (`B = 1`).
    Single,
    /// One block per coordinate (`B = d`).
    Coordinatewise,
    /// Contiguous blocks of the given sizes, in order.
    Sizes(Vec<usize>),
}

impl PartitionSpec {
    /// `B ∈ {1, 2, 3, 4, d}` with the layouts used on the 100-feature stream.
    pub fn paper_set() -> Vec<PartitionSpec> {
        vec![
            PartitionSpec::Single,
            PartitionSpec::Sizes(vec![50, 50]),
            PartitionSpec::Sizes(vec![35, 30, 35]),
            PartitionSpec::Sizes(vec![25; 4]),
            PartitionSpec::Coordinatewise,
        ]
    }

    pub fn build(&self, dim: usize) -> Result<BlockPartition> {
        match self {
            PartitionSpec::Single => BlockPartition::single(dim),
            PartitionSpec::Coordinatewise => BlockPartition::coordinatewise(dim),
            PartitionSpec::Sizes(sizes) => {
                let total: usize = sizes.iter().sum();
                if total != dim {
                    return Err(Error::Partition(format!(
                        "block sizes {self} sum to {total}, expected {dim}"
                    )));
                }
                BlockPartition::from_sizes(sizes)
            }
        }
    }

    /// Short label used in CSV column names: the block count, or `d`.
    pub fn label(&self) -> String {
        match self {
            PartitionSpec::Single => "1".into(),
            PartitionSpec::Coordinatewise => "d".into(),
            PartitionSpec::Sizes(s) => s.len().to_string(),
        }
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionSpec::Single => f.write_str("1"),
            PartitionSpec::Coordinatewise => f.write_str("d"),
            PartitionSpec::Sizes(s) => {
                let parts: Vec<String> = s.iter().map(usize::to_string).collect();
                f.write_str(&parts.join("/"))
            }
        }
    }
}

impl FromStr for PartitionSpec {
    type Err = Error;

    /// `1`, `d`, or slash-separated block sizes such as `35/30/35`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "1" => return Ok(PartitionSpec::Single),
            "d" => return Ok(PartitionSpec::Coordinatewise),
            _ => {}
        }
        let sizes = s
            .split('/')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::config("partitions", format!("cannot parse {s:?}")))?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config("partitions", format!("cannot parse {s:?}")));
        }
        Ok(PartitionSpec::Sizes(sizes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["1", "d", "50/50", "35/30/35"] {
            assert_eq!(s.parse::<PartitionSpec>().unwrap().to_string(), s);
        }
        assert!("0/5".parse::<PartitionSpec>().is_err());
        assert!("x".parse::<PartitionSpec>().is_err());
        assert!("7".parse::<PartitionSpec>().is_err());
    }

    #[test]
    fn paper_layouts() {
        let labels: Vec<String> = PartitionSpec::paper_set()
            .iter()
            .map(|p| p.label())
            .collect();
        assert_eq!(labels, ["1", "2", "3", "4", "d"]);
        let p = PartitionSpec::Sizes(vec![35, 30, 35]).build(100).unwrap();
        assert_eq!(p.sizes(), vec![35, 30, 35]);
        assert!(PartitionSpec::Sizes(vec![35, 30]).build(100).is_err());
    }
}
