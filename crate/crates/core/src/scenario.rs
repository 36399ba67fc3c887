//! Size and power experiments.
//!
//! Reported emissions fall geometrically, `E*_t = e_base (1 - g)^t`, while
//! actual emissions only partly follow: `E_t = (1 - m) E*_t + m e_base`.
//! The gap `xi_t = E*_t - E_t` goes unrecorded and so lands in the budget
//! imbalance, `y_t = u_t + xi_t` once the break starts, with `u` a
//! stationary AR(1). Each replication runs the full monitor on synthetic
//! vintages that append one year at a time.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::calibration::BoundarySpec;
use crate::error::{Error, ErrorClass, Result};
use crate::flux::FIRST_YEAR;
use crate::monitor::{Decision, MonitorConfig, MonitorState};
use crate::rng::{self, DEFAULT_SEED};

/// Baseline fossil emissions, GtC/yr.
pub const DEFAULT_E_BASE: f64 = 9.7;

/// Scenario streams live above this index so they never coincide with the
/// calibration streams drawn from the same master seed.
const STREAM_OFFSET: u64 = 1 << 40;

/// Named null-model parameter sets. Two and three are one-factor
/// perturbations of the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dgp {
    One,
    /// `phi` halved.
    Two,
    /// `sigma` halved.
    Three,
}

impl Dgp {
    /// `(phi, sigma)`.
    pub fn params(self) -> (f64, f64) {
        match self {
            Dgp::One => (0.35, 0.72),
            Dgp::Two => (0.175, 0.72),
            Dgp::Three => (0.35, 0.36),
        }
    }
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Dgp::One),
            "2" => Ok(Dgp::Two),
            "3" => Ok(Dgp::Three),
            other => Err(Error::InvalidParameter(format!("unknown DGP `{other}`, expected 1, 2 or 3"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub phi: f64,
    pub sigma: f64,
    pub k: usize,
    /// Monitoring steps.
    pub horizon: u32,
    pub alpha: f64,
    /// Annual abatement fraction of reported emissions.
    pub g: f64,
    /// Misreporting parameter; 0 is the null.
    pub m: f64,
    pub e_base: f64,
    /// Monitoring step at which misreporting starts; 1 is the first
    /// monitored year.
    pub tau_offset: u32,
    pub replications: usize,
    pub seed: u64,
    /// Run the residual Gaussianity battery at every step. It never
    /// changes a decision, so simulations leave it off.
    pub gaussianity_check: bool,
}

impl ScenarioSpec {
    pub fn new(dgp: Dgp, k: usize, horizon: u32, alpha: f64) -> Self {
        let (phi, sigma) = dgp.params();
        Self {
            phi,
            sigma,
            k,
            horizon,
            alpha,
            g: 0.0692,
            m: 0.0,
            e_base: DEFAULT_E_BASE,
            tau_offset: 1,
            replications: 10_000,
            seed: DEFAULT_SEED,
            gaussianity_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("g", self.g, 0.0..1.0)?;
        if !(0.0..=1.0).contains(&self.m) {
            return Err(Error::InvalidFraction {
                name: "m",
                value: self.m,
                range: "[0, 1]",
            });
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::NonStationaryParameter(self.phi));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replication count must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidHorizon("T must be at least 1".into()));
        }
        if self.tau_offset == 0 {
            return Err(Error::InvalidParameter("tau_offset must be at least 1".into()));
        }
        if !self.e_base.is_finite() {
            return Err(Error::InvalidParameter("e_base must be finite".into()));
        }
        Ok(())
    }

    /// Unrecorded emissions `xi` for monitoring steps `1..=T`.
    pub fn wedge(&self) -> Result<Vec<f64>> {
        let mut xi = vec![0.0; self.horizon as usize];
        let start = self.tau_offset as usize;
        if start <= xi.len() {
            let len = (xi.len() - start + 1) as u32;
            let reported = reported_path(self.e_base, self.g, len)?;
            let actual = actual_path(&reported, self.m, self.e_base)?;
            for (slot, (r, a)) in xi[start - 1..].iter_mut().zip(reported.iter().zip(&actual)) {
                *slot = r - a;
            }
        }
        Ok(xi)
    }
}

fn check_fraction(name: &'static str, value: f64, range: std::ops::Range<f64>) -> Result<()> {
    if range.contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidFraction {
            name,
            value,
            range: "[0, 1)",
        })
    }
}

/// `E*_t = e_base (1 - g)^t` for `t = 1..=horizon`.
pub fn reported_path(e_base: f64, g: f64, horizon: u32) -> Result<Vec<f64>> {
    check_fraction("g", g, 0.0..1.0)?;
    if horizon == 0 {
        return Err(Error::InvalidHorizon("path length must be at least 1".into()));
    }
    Ok((1..=horizon as i32).map(|t| e_base * (1.0 - g).powi(t)).collect())
}

/// `E_t = (1 - m) E*_t + m e_base`.
pub fn actual_path(reported: &[f64], m: f64, e_base: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::InvalidFraction {
            name: "m",
            value: m,
            range: "[0, 1]",
        });
    }
    Ok(reported.iter().map(|r| (1.0 - m) * r + m * e_base).collect())
}

/// `u_t = phi u_{t-1} + sigma e_t`, with the first value drawn from the
/// stationary law `N(0, sigma^2 / (1 - phi^2))`.
pub fn simulate_ar1<R: Rng + ?Sized>(phi: f64, sigma: f64, len: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::NonStationaryParameter(phi));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be non-negative")));
    }
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return Ok(out);
    }
    let e0: f64 = StandardNormal.sample(rng);
    let mut u = sigma / (1.0 - phi * phi).sqrt() * e0;
    out.push(u);
    for _ in 1..len {
        let e: f64 = StandardNormal.sample(rng);
        u = phi * u + sigma * e;
        out.push(u);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub replications: usize,
    pub rejection_rate: f64,
    /// Mean detection time in years among rejecting replications; `None`
    /// if none rejected.
    pub mean_detection_time: Option<f64>,
    /// Quartiles of the detection time among rejecting replications.
    pub quartiles: Option<[u32; 3]>,
    /// Monitoring step of the first rejection, per replication.
    pub detection_times: Vec<Option<u32>>,
    /// Replications that aborted on a numerical error; they count as
    /// non-rejections.
    pub failures: usize,
}

impl PowerReport {
    fn from_outcomes(outcomes: Vec<Result<Option<u32>>>) -> Self {
        let replications = outcomes.len();
        let mut failures = 0;
        let detection_times: Vec<Option<u32>> = outcomes
            .into_iter()
            .map(|o| {
                o.unwrap_or_else(|_| {
                    failures += 1;
                    None
                })
            })
            .collect();
        let mut hits: Vec<u32> = detection_times.iter().flatten().copied().collect();
        hits.sort_unstable();
        let rejection_rate = hits.len() as f64 / replications as f64;
        let mean_detection_time =
            (!hits.is_empty()).then(|| hits.iter().map(|&t| t as f64).sum::<f64>() / hits.len() as f64);
        let quartiles = (!hits.is_empty()).then(|| {
            let at = |p: f64| hits[((p * hits.len() as f64).ceil() as usize).clamp(1, hits.len()) - 1];
            [at(0.25), at(0.5), at(0.75)]
        });
        Self {
            replications,
            rejection_rate,
            mean_detection_time,
            quartiles,
            detection_times,
            failures,
        }
    }

    /// One row per replication; empty `detection_time` means no rejection.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replication,detection_time\n");
        for (r, t) in self.detection_times.iter().enumerate() {
            match t {
                Some(t) => writeln!(out, "{r},{t}").unwrap(),
                None => writeln!(out, "{r},").unwrap(),
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "replications: {}", self.replications).unwrap();
        writeln!(out, "rejection_rate: {:.4}", self.rejection_rate).unwrap();
        match self.mean_detection_time {
            Some(t) => writeln!(out, "mean_detection_time: {t:.3}").unwrap(),
            None => writeln!(out, "mean_detection_time: NA").unwrap(),
        }
        match self.quartiles {
            Some([a, b, c]) => writeln!(out, "detection_quartiles: {a},{b},{c}").unwrap(),
            None => writeln!(out, "detection_quartiles: NA").unwrap(),
        }
        writeln!(out, "failures: {}", self.failures).unwrap();
        out
    }
}

fn check_boundary(spec: &ScenarioSpec, boundary: &BoundarySpec) -> Result<()> {
    boundary.constant()?;
    if boundary.horizon.limit() != Some(spec.horizon) {
        return Err(Error::InvalidHorizon(format!(
            "boundary horizon {} does not match T = {}",
            boundary.horizon, spec.horizon
        )));
    }
    if boundary.alpha != spec.alpha {
        return Err(Error::InvalidParameter(format!(
            "boundary alpha {} does not match alpha = {}",
            boundary.alpha, spec.alpha
        )));
    }
    Ok(())
}

/// One replication: detection step, or `None` if the test never rejects.
pub fn run_replication(spec: &ScenarioSpec, config: &MonitorConfig, xi: &[f64], index: u64) -> Result<Option<u32>> {
    let mut rng = rng::stream(spec.seed, STREAM_OFFSET + index);
    let mut y = simulate_ar1(spec.phi, spec.sigma, spec.k + spec.horizon as usize, &mut rng)?;
    for (v, x) in y[spec.k..].iter_mut().zip(xi) {
        *v += x;
    }
    let mut state = MonitorState::new(config.clone())?;
    for step in 1..=spec.horizon {
        let n = spec.k + step as usize;
        let last_year = FIRST_YEAR + n as i32 - 1;
        if state.step_series(&y[..n], last_year)? == Decision::Reject {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

/// Replications run in parallel; the report depends only on `spec` and the boundary.
pub fn run_experiment(spec: &ScenarioSpec, boundary: &BoundarySpec) -> Result<PowerReport> {
    spec.validate()?;
    check_boundary(spec, boundary)?;
    let mut config = MonitorConfig::new(spec.k, boundary.clone())?;
    config.gaussianity_check = spec.gaussianity_check;
    let xi = spec.wedge()?;
    let mut outcomes: Vec<Result<Option<u32>>> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(spec, &config, &xi, r))
        .collect();
    // Invalid configuration surfaces once instead of as N failures.
    if let Some(pos) = outcomes
        .iter()
        .position(|o| matches!(o, Err(e) if e.class() == ErrorClass::Validation))
    {
        return Err(outcomes.swap_remove(pos).unwrap_err());
    }
    Ok(PowerReport::from_outcomes(outcomes))
}

/// Power and detection time for each misreporting level in `ms`.
pub fn power_curve(spec: &ScenarioSpec, boundary: &BoundarySpec, ms: &[f64]) -> Result<Vec<(f64, PowerReport)>> {
    ms.iter()
        .map(|&m| {
            let s = ScenarioSpec { m, ..spec.clone() };
            run_experiment(&s, boundary).map(|r| (m, r))
        })
        .collect()
}

pub fn power_curve_csv(curve: &[(f64, PowerReport)]) -> String {
    let mut out = String::from("m,rejection_rate,mean_detection_time,median_detection_time,failures\n");
    for (m, r) in curve {
        let mean = r.mean_detection_time.map_or(String::new(), |t| format!("{t}"));
        let median = r.quartiles.map_or(String::new(), |q| q[1].to_string());
        writeln!(out, "{m},{},{mean},{median},{}", r.rejection_rate, r.failures).unwrap();
    }
    out
}

/// Parses `a:step:b` into the inclusive grid `a, a + step, ...`.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("sweep `{text}` must look like start:step:stop"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, step, stop] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Rounded to 12 places so 0.05 * 3 prints as 0.15.
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}
