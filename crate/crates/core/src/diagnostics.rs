//! Descriptive statistics and the Gaussianity / autocorrelation battery
//! applied to budget-imbalance series and to standardized AR(1) residuals.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc;
use tracing::warn;

use crate::error::{Error, Result};

/// Smallest probability fed to a logarithm in the Anderson-Darling sum.
const PROB_FLOOR: f64 = 1e-300;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Sample moments. `std` uses the n-1 divisor; `skew` and `kurt` are the
/// biased moment estimators (a Gaussian has kurt = 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptive {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub kurt: f64,
}

fn require_len(x: &[f64], needed: usize) -> Result<()> {
    if x.len() < needed {
        return Err(Error::TooFewObservations {
            needed,
            got: x.len(),
        });
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean and n-1 standard deviation.
pub fn mean_std(x: &[f64]) -> Result<(f64, f64)> {
    require_len(x, 2)?;
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    Ok((m, (ss / (x.len() - 1) as f64).sqrt()))
}

pub fn descriptive_stats(x: &[f64]) -> Result<Descriptive> {
    let (mean, std) = mean_std(x)?;
    let n = x.len() as f64;
    let (m2, m3, m4) = x.iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let d = v - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 <= 0.0 || std <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance"));
    }
    Ok(Descriptive {
        mean,
        std,
        skew: m3 / m2.powf(1.5),
        kurt: m4 / (m2 * m2),
    })
}

/// Jarque-Bera statistic `n/6 * (S^2 + (K-3)^2/4)`.
pub fn jarque_bera(x: &[f64]) -> Result<f64> {
    let d = descriptive_stats(x)?;
    let n = x.len() as f64;
    Ok(n / 6.0 * (d.skew * d.skew + (d.kurt - 3.0).powi(2) / 4.0))
}

/// Reference distribution for the Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KsReference {
    /// Compare the data as given against N(0, 1).
    #[default]
    StandardNormal,
    /// Standardize by sample mean and std first.
    Standardized,
}

fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let (m, s) = mean_std(x)?;
    if s <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance"));
    }
    Ok(x.iter().map(|v| (v - m) / s).collect())
}

fn sorted(mut z: Vec<f64>) -> Vec<f64> {
    z.sort_by(f64::total_cmp);
    z
}

/// Kolmogorov-Smirnov distance to the standard normal CDF.
pub fn ks_gaussian(x: &[f64], reference: KsReference) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::DegenerateSeries("need at least two points"));
    }
    let z = match reference {
        KsReference::StandardNormal => {
            // Still refuse a constant series.
            let (_, s) = mean_std(x)?;
            if s <= 0.0 {
                return Err(Error::DegenerateSeries("zero variance"));
            }
            x.to_vec()
        }
        KsReference::Standardized => standardize(x)?,
    };
    let z = sorted(z);
    let n = z.len() as f64;
    Ok(z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = norm_cdf(v);
            let upper = (i + 1) as f64 / n - f;
            let lower = f - i as f64 / n;
            upper.abs().max(lower.abs())
        })
        .fold(0.0, f64::max))
}

/// Anderson-Darling A^2 against the normal with estimated mean and std.
///
/// Tail probabilities are taken from the symmetric side so that
/// `ln(1 - Phi(z))` does not cancel; values below `1e-300` are clamped.
pub fn anderson_darling(x: &[f64]) -> Result<f64> {
    let z = sorted(standardize(x)?);
    let n = z.len();
    let mut clamped = false;
    let mut ln_prob = |p: f64| {
        if p < PROB_FLOOR {
            clamped = true;
            PROB_FLOOR.ln()
        } else {
            p.ln()
        }
    };
    let mut sum = 0.0;
    for i in 0..n {
        let lower = ln_prob(norm_cdf(z[i]));
        let upper = ln_prob(norm_cdf(-z[n - 1 - i]));
        sum += (2 * i + 1) as f64 * (lower + upper);
    }
    if clamped {
        warn!("anderson_darling: tail probability clamped at {PROB_FLOOR:e}");
    }
    Ok(-(n as f64) - sum / n as f64)
}

/// Durbin-Watson statistic on the series as given (no demeaning).
pub fn durbin_watson(x: &[f64]) -> Result<f64> {
    require_len(x, 2)?;
    let denom: f64 = x.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateSeries("zero sum of squares"));
    }
    let num: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / denom)
}

/// Sample autocorrelations about the mean for lags `1..=max_lag`.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::LagTooLarge { lag: max_lag, n });
    }
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance"));
    }
    Ok((1..=max_lag)
        .map(|k| d[k..].iter().zip(&d[..n - k]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

/// Ljung-Box `Q(m) = n(n+2) * sum_k rho_k^2 / (n-k)`.
pub fn ljung_box(x: &[f64], max_lag: usize) -> Result<f64> {
    let rho = autocorrelations(x, max_lag)?;
    let n = x.len() as f64;
    Ok(n * (n + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (n - (i + 1) as f64))
            .sum::<f64>())
}

/// 5% critical values; the defaults are the ones quoted for n = 58.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValues {
    pub jarque_bera: f64,
    pub ks: f64,
    pub anderson_darling: f64,
    /// Ljung-Box critical value per lag.
    pub ljung_box: BTreeMap<usize, f64>,
}

impl Default for CriticalValues {
    fn default() -> Self {
        Self {
            jarque_bera: 5.99,
            ks: 0.18,
            anderson_darling: 0.74,
            ljung_box: BTreeMap::from([(1, 3.84), (5, 11.07)]),
        }
    }
}

/// Per-test rejection flags: `true` means the null (Gaussianity, or no
/// autocorrelation) is rejected at the configured level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    pub jarque_bera: bool,
    pub ks: bool,
    pub anderson_darling: bool,
    pub ljung_box: BTreeMap<usize, bool>,
}

impl Decisions {
    /// No Gaussianity test rejected.
    pub fn gaussian(&self) -> bool {
        !(self.jarque_bera || self.ks || self.anderson_darling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub kurt: f64,
    pub jb: f64,
    pub ks: f64,
    pub ad: f64,
    pub dw: f64,
    pub q: BTreeMap<usize, f64>,
    pub decisions: Decisions,
}

impl DiagnosticsReport {
    /// Runs the full battery with Ljung-Box at every lag in `critical`.
    pub fn compute(x: &[f64], critical: &CriticalValues) -> Result<Self> {
        Self::compute_with(x, critical, KsReference::default())
    }

    pub fn compute_with(x: &[f64], critical: &CriticalValues, reference: KsReference) -> Result<Self> {
        let d = descriptive_stats(x)?;
        let jb = jarque_bera(x)?;
        let ks = ks_gaussian(x, reference)?;
        let ad = anderson_darling(x)?;
        let dw = durbin_watson(x)?;
        let mut q = BTreeMap::new();
        for &lag in critical.ljung_box.keys() {
            q.insert(lag, ljung_box(x, lag)?);
        }
        let decisions = Decisions {
            jarque_bera: jb > critical.jarque_bera,
            ks: ks > critical.ks,
            anderson_darling: ad > critical.anderson_darling,
            ljung_box: q
                .iter()
                .map(|(lag, v)| (*lag, *v > critical.ljung_box[lag]))
                .collect(),
        };
        Ok(Self {
            n: x.len(),
            mean: d.mean,
            std: d.std,
            skew: d.skew,
            kurt: d.kurt,
            jb,
            ks,
            ad,
            dw,
            q,
            decisions,
        })
    }
}

/// Runs only the three Gaussianity tests; `Ok(true)` when none rejects.
pub fn gaussianity_passes(x: &[f64], critical: &CriticalValues) -> Result<bool> {
    Ok(jarque_bera(x)? <= critical.jarque_bera
        && ks_gaussian(x, KsReference::default())? <= critical.ks
        && anderson_darling(x)? <= critical.anderson_darling)
}
