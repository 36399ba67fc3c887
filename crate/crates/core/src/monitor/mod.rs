//! The sequential test.
//!
//! Every year a new vintage arrives. The null model is refitted on that
//! vintage's first `K` observations, the newest observation is turned into
//! a standardized innovation, and the innovation is added to the running
//! CUSUM `Z`. Innovations are frozen at the value computed in their own
//! year; later revisions of history never change past terms of `Z`. The
//! test rejects, terminally, the first time `Z <= -c * f(n - K)`.

mod state_file;

use std::fmt::Write as _;

use tracing::warn;

use crate::arma::{fit_ar1, fit_arma};
use crate::calibration::BoundarySpec;
use crate::diagnostics::{self, CriticalValues};
use crate::error::{Error, Result};
use crate::flux::{budget_imbalance, Vintage, FIRST_YEAR};

pub use state_file::{read_state, write_state, STATE_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    /// Length of the initial, break-free window.
    pub k: usize,
    /// Calibrated boundary.
    pub boundary: BoundarySpec,
    /// `(p, q)` of the null model; `(1, 0)` uses the OLS AR(1) fit.
    pub orders: (usize, usize),
    /// Run the Gaussianity tests on the window residuals.
    pub gaussianity_check: bool,
}

impl MonitorConfig {
    pub fn new(k: usize, boundary: BoundarySpec) -> Result<Self> {
        let config = Self {
            k,
            boundary,
            orders: (1, 0),
            gaussianity_check: true,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!("K = {} must be at least 3", self.k)));
        }
        let (p, q) = self.orders;
        if self.k < p + q + 3 {
            return Err(Error::TooFewObservations {
                needed: p + q + 3,
                got: self.k,
            });
        }
        self.boundary.constant()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Reject,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Continue => "continue",
            Decision::Reject => "reject",
        }
    }
}

/// Outcome of the Gaussianity battery on the window residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussFlag {
    Pass,
    Warn,
    /// Check disabled.
    Skip,
}

impl GaussFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            GaussFlag::Pass => "pass",
            GaussFlag::Warn => "warn",
            GaussFlag::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorStatus {
    Running,
    /// Rejected in the given calendar year.
    Rejected(i32),
    HorizonExhausted,
}

impl MonitorStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, MonitorStatus::Running)
    }
}

impl std::fmt::Display for MonitorStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MonitorStatus::Running => f.write_str("running"),
            MonitorStatus::Rejected(year) => write!(f, "rejected:{year}"),
            MonitorStatus::HorizonExhausted => f.write_str("horizon_exhausted"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub year: i32,
    /// Vintage length.
    pub n: usize,
    /// Refit on the vintage's first K observations. For ARMA null models
    /// this is the first AR coefficient (0 when p = 0).
    pub phi_hat: f64,
    pub sigma_hat: f64,
    pub innovation: f64,
    pub z: f64,
    pub boundary: f64,
    pub decision: Decision,
    pub gauss_flag: GaussFlag,
}

/// Refit of the null model on one vintage's window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub phi_hat: f64,
    pub sigma_hat: f64,
    pub stationary: bool,
    pub gauss_flag: GaussFlag,
    /// Standardized innovation of the newest observation, if the series is
    /// longer than the window.
    pub innovation: Option<f64>,
}

/// Fits the null model on `y[..k]` and standardizes the last point of `y`.
pub fn fit_window(y: &[f64], config: &MonitorConfig) -> Result<WindowFit> {
    let k = config.k;
    if y.len() < k {
        return Err(Error::WindowMismatch {
            expected: k,
            got: y.len(),
        });
    }
    let window = &y[..k];
    let critical = CriticalValues::default();
    let (phi_hat, sigma_hat, stationary, residuals, innovation) = match config.orders {
        (1, 0) => {
            let fit = fit_ar1(window)?;
            let innovation = (y.len() > k).then(|| fit.innovation(y[y.len() - 2], y[y.len() - 1]));
            (fit.phi, fit.sigma, fit.is_stationary(), fit.residuals, innovation)
        }
        (p, q) => {
            let fit = fit_arma(window, p, q)?;
            let residuals: Vec<f64> = fit.innovations(window).iter().map(|e| e / fit.sigma).collect();
            let innovation = (y.len() > k).then(|| fit.innovations(y)[y.len() - 1] / fit.sigma);
            let phi1 = fit.phi.first().copied().unwrap_or(0.0);
            let stationary = fit.phi.iter().map(|c| c.abs()).sum::<f64>() < 1.0 || p == 0;
            (phi1, fit.sigma, stationary, residuals, innovation)
        }
    };
    let gauss_flag = if config.gaussianity_check {
        match diagnostics::gaussianity_passes(&residuals, &critical) {
            Ok(true) => GaussFlag::Pass,
            Ok(false) => GaussFlag::Warn,
            Err(e) => {
                warn!(error = %e, "gaussianity check could not run");
                GaussFlag::Warn
            }
        }
    } else {
        GaussFlag::Skip
    };
    Ok(WindowFit {
        phi_hat,
        sigma_hat,
        stationary,
        gauss_flag,
        innovation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    pub config: MonitorConfig,
    steps: Vec<StepRecord>,
    status: MonitorStatus,
    /// Fit of the initial vintage, when it was supplied in this session.
    initial: Option<WindowFit>,
}

impl MonitorState {
    /// Empty running state without an initial fit (e.g. for simulations).
    pub fn new(config: MonitorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            steps: Vec::new(),
            status: MonitorStatus::Running,
            initial: None,
        })
    }

    /// Rebuilds a state from stored records, checking its invariants.
    pub fn from_parts(config: MonitorConfig, steps: Vec<StepRecord>, status: MonitorStatus) -> Result<Self> {
        let mut state = Self::new(config)?;
        let mut z = 0.0;
        for (i, s) in steps.iter().enumerate() {
            z += s.innovation;
            if z.to_bits() != s.z.to_bits() {
                return Err(Error::StateFormat {
                    line: i + 1,
                    detail: format!("z {} is not the running sum of innovations ({z})", s.z),
                });
            }
            if s.n != state.config.k + i + 1 {
                return Err(Error::StateFormat {
                    line: i + 1,
                    detail: format!("step {} has vintage length {}", i + 1, s.n),
                });
            }
        }
        if let Some(limit) = state.config.boundary.horizon.limit() {
            if steps.len() > limit as usize {
                return Err(Error::StateFormat {
                    line: steps.len(),
                    detail: format!("{} steps exceed horizon {limit}", steps.len()),
                });
            }
        }
        state.steps = steps;
        state.status = status;
        Ok(state)
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn status(&self) -> MonitorStatus {
        self.status
    }

    pub fn initial_fit(&self) -> Option<&WindowFit> {
        self.initial.as_ref()
    }

    /// Current CUSUM, zero before the first step.
    pub fn z(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.z)
    }

    /// Vintage length the next step must have.
    pub fn expected_length(&self) -> usize {
        self.config.k + self.steps.len() + 1
    }

    /// Advances the test with the budget imbalance of the next vintage.
    /// `last_year` is the calendar year of the final observation.
    pub fn step_series(&mut self, y: &[f64], last_year: i32) -> Result<Decision> {
        if self.status.is_terminal() {
            return Err(Error::AlreadyTerminal(self.status.to_string()));
        }
        let expected = self.expected_length();
        if y.len() != expected {
            return Err(Error::WindowMismatch {
                expected,
                got: y.len(),
            });
        }
        let fit = fit_window(y, &self.config)?;
        if !fit.stationary {
            warn!(year = last_year, phi = fit.phi_hat, "refit is outside the stationary region");
        }
        let innovation = fit.innovation.expect("series longer than window");
        let t = (self.steps.len() + 1) as u32;
        let boundary = self.config.boundary.boundary_value(t)?;
        let z = self.z() + innovation;
        let decision = if z <= -boundary {
            Decision::Reject
        } else {
            Decision::Continue
        };
        self.steps.push(StepRecord {
            year: last_year,
            n: y.len(),
            phi_hat: fit.phi_hat,
            sigma_hat: fit.sigma_hat,
            innovation,
            z,
            boundary,
            decision,
            gauss_flag: fit.gauss_flag,
        });
        self.status = match decision {
            Decision::Reject => MonitorStatus::Rejected(last_year),
            Decision::Continue if self.config.boundary.horizon.limit() == Some(t) => {
                MonitorStatus::HorizonExhausted
            }
            Decision::Continue => MonitorStatus::Running,
        };
        Ok(decision)
    }

    /// Advances the test with a new vintage.
    pub fn step(&mut self, vintage: &Vintage) -> Result<Decision> {
        if self.status.is_terminal() {
            return Err(Error::AlreadyTerminal(self.status.to_string()));
        }
        let series = budget_imbalance(vintage);
        self.step_series(&series.values, vintage.last_year())
    }

    /// Per-year table plus a summary line.
    pub fn status_report(&self) -> String {
        let mut out = format!(
            "{:>6} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>6}\n",
            "year", "n", "phi_hat", "sigma", "innov", "Z", "C", "decision", "gauss"
        );
        for s in &self.steps {
            writeln!(
                out,
                "{:>6} {:>4} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>9} {:>6}",
                s.year,
                s.n,
                s.phi_hat,
                s.sigma_hat,
                s.innovation,
                s.z,
                s.boundary,
                s.decision.as_str(),
                s.gauss_flag.as_str()
            )
            .unwrap();
        }
        let b = &self.config.boundary;
        write!(
            out,
            "status: {} (alpha={}, T={}, K={}, steps={})",
            self.status,
            b.alpha,
            b.horizon,
            self.config.k,
            self.steps.len()
        )
        .unwrap();
        if let MonitorStatus::Rejected(year) = self.status {
            write!(out, ", under-reporting signalled in {year}").unwrap();
        }
        out.push('\n');
        out
    }
}

/// Starts a monitor from the initial vintage, which must hold exactly `K`
/// observations.
pub fn init_monitor(config: MonitorConfig, initial: &Vintage) -> Result<MonitorState> {
    if initial.len() != config.k {
        return Err(Error::WindowMismatch {
            expected: config.k,
            got: initial.len(),
        });
    }
    let series = budget_imbalance(initial);
    let fit = fit_window(&series.values, &config)?;
    if fit.gauss_flag == GaussFlag::Warn {
        warn!("initial window residuals fail a Gaussianity test; review the null model");
    }
    let mut state = MonitorState::new(config)?;
    state.initial = Some(fit);
    Ok(state)
}

/// Calendar year of observation `n` (1-based) in a vintage.
pub fn year_of(n: usize) -> i32 {
    FIRST_YEAR + n as i32 - 1
}

#[cfg(test)]
mod tests;
