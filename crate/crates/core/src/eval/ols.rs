//! Ordinary least squares with a t-based mean-response confidence band.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x values have zero variance")]
    ConstantX,
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// sqrt(SSE / (n - 2)).
    pub residual_se: f64,
    pub n: usize,
    pub x_mean: f64,
    /// Sum of squared x deviations.
    pub sxx: f64,
    /// Two-sided critical value of Student's t with n - 2 degrees of freedom.
    pub t_crit: f64,
    pub confidence: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn half_width(&self, x: f64) -> f64 {
        let d = x - self.x_mean;
        self.t_crit * self.residual_se * (1.0 / self.n as f64 + d * d / self.sxx).sqrt()
    }

    /// (low, high) of the mean-response band at `x`.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let y = self.predict(x);
        let h = self.half_width(x);
        (y - h, y + h)
    }
}

pub fn fit_linear_with_ci(points: &[(f64, f64)]) -> Result<RegressionFit, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(FitError::ConstantX);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = nf - 2.0;
    let residual_se = (sse / df).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let t_crit = t.inverse_cdf(1.0 - (1.0 - CONFIDENCE) / 2.0);
    Ok(RegressionFit {
        slope,
        intercept,
        residual_se,
        n,
        x_mean,
        sxx,
        t_crit,
        confidence: CONFIDENCE,
    })
}
