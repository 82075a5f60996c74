use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `n × d` design matrix with labels or regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::Dataset("empty dataset".into()));
        }
        if y.len() != x.rows() {
            return Err(Error::Dataset(format!(
                "{} rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite entry".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    /// Parses comma-separated rows; the last column is the target. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut data = Vec::new();
        let mut y = Vec::new();
        let mut width = None;
        for record in reader.records() {
            let record = record.map_err(|e| Error::Dataset(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let vals = record
                .iter()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Dataset(format!("line {line}: {e}")))?;
            if vals.len() < 2 {
                return Err(Error::Dataset(format!(
                    "line {line}: need at least one feature and a target"
                )));
            }
            match width {
                None => width = Some(vals.len()),
                Some(w) if w != vals.len() => {
                    return Err(Error::Dataset(format!(
                        "line {line}: expected {w} columns, found {}",
                        vals.len()
                    )))
                }
                _ => {}
            }
            let (target, features) = vals.split_last().expect("at least two values");
            data.extend_from_slice(features);
            y.push(*target);
        }
        let d = width.ok_or_else(|| Error::Dataset("no rows".into()))? - 1;
        Dataset::new(Matrix::from_vec(y.len(), d, data)?, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header() {
        let ds = Dataset::from_csv("# x1,x2,y\n1,2,3\n4, 5 ,6\n\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(1), &[4.0, 5.0]);
        assert_eq!(ds.y, vec![3.0, 6.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::from_csv("").is_err());
        assert!(Dataset::from_csv("1,2\n1,2,3\n").is_err());
        assert!(Dataset::from_csv("1,abc\n").is_err());
        assert!(Dataset::from_csv("1,inf\n").is_err());
    }
}
