//! Monte Carlo calibration of the CUSUM boundary `C_t = c * f(t)`.
//!
//! For each replication, `T` iid N(0,1) draws are cumulated, each partial
//! sum is divided by `f(t)`, and the maximum over `t` is recorded. The
//! constant `c` is the `(1 - alpha)` empirical quantile of those maxima,
//! taken as the `ceil((1 - alpha) B)`-th order statistic.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt as numfmt;
use crate::rng;

pub const DEFAULT_REPLICATIONS: usize = 100_000;
/// Steps simulated when the horizon is indefinite.
pub const INDEFINITE_PROXY_STEPS: u32 = 1000;

/// Shape of the boundary function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryKind {
    /// `f(t) = sqrt(t)`.
    Sqrt,
}

impl BoundaryKind {
    pub fn eval(self, t: u32) -> f64 {
        match self {
            BoundaryKind::Sqrt => (t as f64).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Sqrt => "sqrt",
        }
    }

    /// Whether `f(t) / sqrt(t) -> inf`, required for indefinite monitoring.
    /// A new kind meant for open-ended use must return `true` here.
    pub fn allows_indefinite(self) -> bool {
        match self {
            BoundaryKind::Sqrt => false,
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(BoundaryKind::Sqrt),
            other => Err(Error::UnknownBoundary(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizon {
    Finite(u32),
    Indefinite,
}

impl Horizon {
    /// Number of steps simulated during calibration.
    pub fn steps(self) -> u32 {
        match self {
            Horizon::Finite(t) => t,
            Horizon::Indefinite => INDEFINITE_PROXY_STEPS,
        }
    }

    /// Monitoring steps allowed, `None` when open-ended.
    pub fn limit(self) -> Option<u32> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::Indefinite => None,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Indefinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "indefinite" => Ok(Horizon::Indefinite),
            _ => s
                .parse::<u32>()
                .map(Horizon::Finite)
                .map_err(|_| Error::InvalidHorizon(s.to_string())),
        }
    }
}

/// Boundary configuration, optionally carrying a calibrated constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub horizon: Horizon,
    pub alpha: f64,
    pub kind: BoundaryKind,
    c: Option<f64>,
    pub replications: usize,
    pub seed: u64,
}

fn validate(horizon: Horizon, alpha: f64, kind: BoundaryKind) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidAlpha(alpha));
    }
    match horizon {
        Horizon::Finite(0) => Err(Error::InvalidHorizon("T must be at least 1".into())),
        Horizon::Indefinite if !kind.allows_indefinite() => Err(Error::InvalidHorizon(format!(
            "boundary `{kind}` needs a finite horizon (f(t)/sqrt(t) must diverge for T = inf)"
        ))),
        _ => Ok(()),
    }
}

impl BoundarySpec {
    /// Uncalibrated boundary.
    pub fn new(horizon: Horizon, alpha: f64, kind: BoundaryKind) -> Result<Self> {
        validate(horizon, alpha, kind)?;
        Ok(Self {
            horizon,
            alpha,
            kind,
            c: None,
            replications: 0,
            seed: 0,
        })
    }

    /// Boundary with a known constant, e.g. loaded from a cache or state
    /// file. `replications` and `seed` record its provenance.
    pub fn with_constant(
        horizon: Horizon,
        alpha: f64,
        kind: BoundaryKind,
        c: f64,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        validate(horizon, alpha, kind)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("boundary constant {c} must be > 0")));
        }
        Ok(Self {
            horizon,
            alpha,
            kind,
            c: Some(c),
            replications,
            seed,
        })
    }

    pub fn constant(&self) -> Result<f64> {
        self.c.ok_or(Error::NotCalibrated)
    }

    pub fn is_calibrated(&self) -> bool {
        self.c.is_some()
    }

    /// `C = c * f(t)` for step `t >= 1` since monitoring began.
    pub fn boundary_value(&self, t: u32) -> Result<f64> {
        let c = self.constant()?;
        if t == 0 {
            return Err(Error::NonPositiveStep(t));
        }
        Ok(c * self.kind.eval(t))
    }
}

/// Maximum of the scaled partial sums for every replication, indexed by
/// replication.
pub fn simulate_maxima(steps: u32, kind: BoundaryKind, replications: usize, seed: u64) -> Vec<f64> {
    let scale: Vec<f64> = (1..=steps).map(|t| 1.0 / kind.eval(t)).collect();
    (0..replications as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b);
            let mut sum = 0.0;
            let mut best = f64::NEG_INFINITY;
            for s in &scale {
                let e: f64 = StandardNormal.sample(&mut rng);
                sum += e;
                best = best.max(sum * s);
            }
            best
        })
        .collect()
}

/// 1-based rank of the `(1 - alpha)` order statistic among `b` values.
/// The guard keeps `(1 - 0.05) * 1e5` at 95000 despite rounding.
pub fn quantile_rank(alpha: f64, b: usize) -> usize {
    let raw = (1.0 - alpha) * b as f64;
    ((raw - 1e-9).ceil() as usize).clamp(1, b)
}

fn quantile_of_sorted(sorted: &[f64], alpha: f64) -> f64 {
    sorted[quantile_rank(alpha, sorted.len()) - 1]
}

fn check_replications(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidParameter("replication count must be >= 1".into()));
    }
    Ok(())
}

pub fn calibrate(
    horizon: Horizon,
    alpha: f64,
    kind: BoundaryKind,
    replications: usize,
    seed: u64,
) -> Result<BoundarySpec> {
    validate(horizon, alpha, kind)?;
    check_replications(replications)?;
    let mut maxima = simulate_maxima(horizon.steps(), kind, replications, seed);
    let k = quantile_rank(alpha, replications);
    let (_, c, _) = maxima.select_nth_unstable_by(k - 1, f64::total_cmp);
    BoundarySpec::with_constant(horizon, alpha, kind, *c, replications, seed)
}

/// Fraction of fresh replications in which `sum_{s<=t} e_s <= -C_t` for
/// some `t` within the horizon.
pub fn crossing_probability(spec: &BoundarySpec, replications: usize, seed: u64) -> Result<f64> {
    check_replications(replications)?;
    let bounds: Vec<f64> = (1..=spec.horizon.steps())
        .map(|t| spec.boundary_value(t))
        .collect::<Result<_>>()?;
    let hits: usize = (0..replications as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b);
            let mut sum = 0.0;
            for bound in &bounds {
                let e: f64 = StandardNormal.sample(&mut rng);
                sum += e;
                if sum <= -bound {
                    return 1;
                }
            }
            0
        })
        .sum();
    Ok(hits as f64 / replications as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRow {
    pub alpha: f64,
    pub c: f64,
    /// `c * f(t)` for t = 1..years.
    pub cells: Vec<f64>,
}

/// Boundaries for several significance levels, one row per alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    pub horizon: Horizon,
    pub kind: BoundaryKind,
    pub start_year: i32,
    pub rows: Vec<CriticalRow>,
}

impl CriticalValueTable {
    pub fn years(&self) -> usize {
        self.rows.first().map_or(0, |r| r.cells.len())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,c");
        for i in 0..self.years() {
            write!(out, ",{}", self.start_year + i as i32).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{},{}", row.alpha, numfmt::csv(row.c)).unwrap();
            for cell in &row.cells {
                write!(out, ",{}", numfmt::csv(*cell)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Two-decimal table for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<12}", "");
        for i in 0..self.years() {
            write!(out, "{:>7}", self.start_year + i as i32).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:<12}", format!("alpha = {}%", row.alpha * 100.0)).unwrap();
            for cell in &row.cells {
                write!(out, "{cell:>7.2}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Calibrates every alpha from one shared set of simulated maxima, so the
/// constants are monotone in alpha by construction.
pub fn critical_value_table(
    horizon: Horizon,
    kind: BoundaryKind,
    alphas: &[f64],
    years: u32,
    replications: usize,
    seed: u64,
    start_year: i32,
) -> Result<CriticalValueTable> {
    for &alpha in alphas {
        validate(horizon, alpha, kind)?;
    }
    check_replications(replications)?;
    if years == 0 || horizon.limit().is_some_and(|t| years > t) {
        return Err(Error::InvalidHorizon(format!(
            "{years} table years do not fit horizon {horizon}"
        )));
    }
    let mut maxima = simulate_maxima(horizon.steps(), kind, replications, seed);
    maxima.sort_unstable_by(f64::total_cmp);
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let c = quantile_of_sorted(&maxima, alpha);
            CriticalRow {
                alpha,
                c,
                cells: (1..=years).map(|t| c * kind.eval(t)).collect(),
            }
        })
        .collect();
    Ok(CriticalValueTable {
        horizon,
        kind,
        start_year,
        rows,
    })
}

/// Everything that determines a calibrated constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CacheKey {
    pub horizon: Horizon,
    /// Alpha as written, e.g. `0.05`.
    pub alpha: String,
    pub kind: BoundaryKind,
    pub replications: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(horizon: Horizon, alpha: f64, kind: BoundaryKind, replications: usize, seed: u64) -> Self {
        Self {
            horizon,
            alpha: alpha.to_string(),
            kind,
            replications,
            seed,
        }
    }
}

/// Text cache of calibrated constants, one
/// `T=..,alpha=..,f=..,B=..,seed=..,c=..` line per entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationCache {
    entries: BTreeMap<CacheKey, f64>,
}

impl CalibrationCache {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |detail: &str| Error::StateFormat {
                line: i + 1,
                detail: detail.to_string(),
            };
            let mut fields = BTreeMap::new();
            for part in line.split(',') {
                let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                fields.insert(k.trim(), v.trim());
            }
            let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
            let alpha: f64 = get("alpha")?.parse().map_err(|_| bad("alpha"))?;
            let key = CacheKey {
                horizon: get("T")?.parse()?,
                alpha: alpha.to_string(),
                kind: get("f")?.parse()?,
                replications: get("B")?.parse().map_err(|_| bad("B"))?,
                seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
            };
            let c: f64 = get("c")?.parse().map_err(|_| bad("c"))?;
            entries.insert(key, c);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, c) in &self.entries {
            writeln!(
                out,
                "T={},alpha={},f={},B={},seed={},c={}",
                k.horizon,
                k.alpha,
                k.kind,
                k.replications,
                k.seed,
                numfmt::csv(*c)
            )
            .unwrap();
        }
        out
    }

    pub fn get(&self, key: &CacheKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn insert(&mut self, key: CacheKey, c: f64) {
        self.entries.insert(key, c);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns the cached boundary or calibrates and stores it.
    pub fn get_or_calibrate(
        &mut self,
        horizon: Horizon,
        alpha: f64,
        kind: BoundaryKind,
        replications: usize,
        seed: u64,
    ) -> Result<BoundarySpec> {
        let key = CacheKey::new(horizon, alpha, kind, replications, seed);
        if let Some(c) = self.get(&key) {
            return BoundarySpec::with_constant(horizon, alpha, kind, c, replications, seed);
        }
        let spec = calibrate(horizon, alpha, kind, replications, seed)?;
        self.insert(key, spec.constant()?);
        Ok(spec)
    }
}
