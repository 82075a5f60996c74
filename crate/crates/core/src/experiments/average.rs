use crate::error::{Error, Result};
use crate::param::ParamVector;

/// `(1/T) Σ_t θ_t`
pub fn iterate_average(trajectory: &[Vec<f64>]) -> Result<ParamVector> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::config("trajectory", "must not be empty"))?;
    let mut avg = vec![0.0; first.len()];
    for theta in trajectory {
        if theta.len() != avg.len() {
            return Err(Error::Dimension {
                expected: avg.len(),
                got: theta.len(),
            });
        }
        for (a, v) in avg.iter_mut().zip(theta) {
            *a += v;
        }
    }
    let n = trajectory.len() as f64;
    Ok(avg.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear() {
        let c = vec![vec![1.5, -2.0]; 4];
        assert_eq!(&*iterate_average(&c).unwrap(), &[1.5, -2.0]);
        let lin: Vec<Vec<f64>> = (1..=3).map(|t| vec![t as f64, 0.0]).collect();
        assert_eq!(&*iterate_average(&lin).unwrap(), &[2.0, 0.0]);
        assert!(iterate_average(&[]).is_err());
    }
}
