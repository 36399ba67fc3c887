//! ARMA(p, q) by conditional sum of squares with zero pre-sample values.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::simplex::{self, Options};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaFit {
    pub p: usize,
    pub q: usize,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Innovation std, `sqrt(CSS / n)`.
    pub sigma: f64,
    /// Gaussian conditional log-likelihood at the fitted sigma.
    pub loglik: f64,
    /// `k ln n - 2 loglik`, `k = p + q + 1`.
    pub bic: f64,
    /// Optimizer iterations; zero when the fit is closed-form (q = 0).
    pub iterations: usize,
}

impl ArmaFit {
    /// One-step prediction errors of `y` under this model.
    pub fn innovations(&self, y: &[f64]) -> Vec<f64> {
        css_residuals(y, &self.phi, &self.psi)
    }
}

/// `e_t = y_t - sum phi_i y_{t-i} - sum psi_j e_{t-j}`, with every
/// pre-sample `y` and `e` set to zero.
pub fn css_residuals(y: &[f64], phi: &[f64], psi: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(y.len());
    for t in 0..y.len() {
        let mut v = y[t];
        for (i, c) in phi.iter().enumerate() {
            if t > i {
                v -= c * y[t - i - 1];
            }
        }
        for (j, c) in psi.iter().enumerate() {
            if t > j {
                v -= c * e[t - j - 1];
            }
        }
        e.push(v);
    }
    e
}

fn sum_sq(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum()
}

/// Least squares of `target` on `columns`; `None` if the normal equations
/// are singular.
fn least_squares(columns: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    if columns.is_empty() {
        return Some(Vec::new());
    }
    let n = target.len();
    let k = columns.len();
    let x = DMatrix::from_fn(n, k, |r, c| columns[c][r]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_column_slice(target);
    let chol = xtx.cholesky()?;
    let beta = chol.solve(&xty);
    if beta.iter().all(|b| b.is_finite()) {
        Some(beta.iter().copied().collect())
    } else {
        None
    }
}

/// Zero-padded lag `lag` of `x`.
fn lagged(x: &[f64], lag: usize) -> Vec<f64> {
    (0..x.len())
        .map(|t| if t >= lag { x[t - lag] } else { 0.0 })
        .collect()
}

fn ar_least_squares(y: &[f64], p: usize) -> Option<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (1..=p).map(|l| lagged(y, l)).collect();
    least_squares(&cols, y)
}

/// Hannan-Rissanen style start: long AR residuals stand in for the
/// unobserved innovations, then one joint regression.
fn starting_values(y: &[f64], p: usize, q: usize) -> Vec<f64> {
    let n = y.len();
    let long = (p + q).max((n / 4).min(10)).max(1);
    let proxy = match ar_least_squares(y, long) {
        Some(beta) => css_residuals(y, &beta, &[]),
        None => y.to_vec(),
    };
    let mut cols: Vec<Vec<f64>> = (1..=p).map(|l| lagged(y, l)).collect();
    cols.extend((1..=q).map(|l| lagged(&proxy, l)));
    let mut start = least_squares(&cols, y).unwrap_or_else(|| vec![0.0; p + q]);
    for ma in &mut start[p..] {
        *ma = ma.clamp(-0.9, 0.9);
    }
    start
}

fn finish(p: usize, q: usize, phi: Vec<f64>, psi: Vec<f64>, css: f64, n: usize, iterations: usize) -> Result<ArmaFit> {
    let nf = n as f64;
    let sigma2 = css / nf;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::DegenerateFit);
    }
    let loglik = -0.5 * nf * ((2.0 * PI).ln() + sigma2.ln() + 1.0);
    let k = (p + q + 1) as f64;
    Ok(ArmaFit {
        p,
        q,
        phi,
        psi,
        sigma: sigma2.sqrt(),
        loglik,
        bic: k * nf.ln() - 2.0 * loglik,
        iterations,
    })
}

pub fn fit_arma(y: &[f64], p: usize, q: usize) -> Result<ArmaFit> {
    let n = y.len();
    let needed = p + q + 3;
    if n < needed {
        return Err(Error::TooFewObservations { needed, got: n });
    }
    if q == 0 {
        let phi = ar_least_squares(y, p).ok_or(Error::DegenerateRegressor)?;
        let css = sum_sq(&css_residuals(y, &phi, &[]));
        return finish(p, 0, phi, Vec::new(), css, n, 0);
    }

    let objective = |theta: &[f64]| sum_sq(&css_residuals(y, &theta[..p], &theta[p..]));
    let start = starting_values(y, p, q);
    let mut best = simplex::minimize(objective, &start, Options::default());
    // A restart from the first optimum shakes off a collapsed simplex.
    if best.converged {
        let again = simplex::minimize(objective, &best.point, Options::default());
        if again.value <= best.value {
            best = simplex::Minimum {
                iterations: best.iterations + again.iterations,
                ..again
            };
        }
    }
    if !best.converged || !best.value.is_finite() {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            objective: best.value,
        });
    }
    let (phi, psi) = best.point.split_at(p);
    finish(p, q, phi.to_vec(), psi.to_vec(), best.value, n, best.iterations)
}
