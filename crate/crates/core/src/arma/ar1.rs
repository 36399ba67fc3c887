use tracing::warn;

use crate::error::{Error, Result};

/// Zero-mean AR(1) fitted by OLS without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Fit {
    pub phi: f64,
    /// Innovation standard deviation, divisor `n - 2`.
    pub sigma: f64,
    /// Standardized residuals for t = 2..n.
    pub residuals: Vec<f64>,
    /// Observations used in the regression.
    pub n_fit: usize,
}

impl Ar1Fit {
    /// `|phi| < 1`. A fit outside the stationary region is still returned;
    /// callers decide what to do with the flag.
    pub fn is_stationary(&self) -> bool {
        self.phi.abs() < 1.0
    }

    pub fn standardized_residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Standardized one-step error of `current` given `previous`.
    pub fn innovation(&self, previous: f64, current: f64) -> f64 {
        (current - self.phi * previous) / self.sigma
    }
}

/// `(y_t - phi * y_{t-1}) / sigma` for t = 2..n.
pub fn standardized_residuals(y: &[f64], phi: f64, sigma: f64) -> Vec<f64> {
    y.windows(2).map(|w| (w[1] - phi * w[0]) / sigma).collect()
}

pub fn fit_ar1(y: &[f64]) -> Result<Ar1Fit> {
    let n = y.len();
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    let (num, den) = y
        .windows(2)
        .fold((0.0, 0.0), |(num, den), w| (num + w[1] * w[0], den + w[0] * w[0]));
    if den <= 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let phi = num / den;
    let rss: f64 = y.windows(2).map(|w| (w[1] - phi * w[0]).powi(2)).sum();
    let sigma = (rss / (n - 2) as f64).sqrt();
    let scale = (y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if !(sigma > f64::EPSILON * scale) {
        return Err(Error::DegenerateFit);
    }
    if phi.abs() >= 1.0 {
        warn!(phi, "AR(1) estimate outside the stationary region");
    }
    Ok(Ar1Fit {
        phi,
        sigma,
        residuals: standardized_residuals(y, phi, sigma),
        n_fit: n,
    })
}
