use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Sample mean and 95% Student-t confidence half-width.
pub fn summarize(rows: &[f64]) -> Result<(f64, f64)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "confidence interval needs at least 2 rows, got {n}"
        )));
    }
    let mean = rows.iter().sum::<f64>() / n as f64;
    let var = rows.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((mean, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom ≥ 1")
        .inverse_cdf(0.975);
    Ok((mean, t * var.sqrt() / (n as f64).sqrt()))
}
