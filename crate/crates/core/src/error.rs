use std::io;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data or an invalid parameter.
    Validation,
    /// A numerical procedure could not produce a usable result.
    Numerical,
    /// Filesystem or stream failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("required column `{0}` is missing")]
    MissingColumn(String),

    #[error("years are not consecutive: {previous} is followed by {next}")]
    NonConsecutiveYears { previous: i32, next: i32 },

    #[error("vintage must start in {expected}, found {found}")]
    InvalidStartYear { expected: i32, found: i32 },

    #[error("no data rows")]
    EmptyData,

    #[error("malformed number `{value}` at row {row}, column `{column}`")]
    MalformedNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("series is degenerate: {0}")]
    DegenerateSeries(&'static str),

    #[error("lag {lag} is too large for a series of length {n}")]
    LagTooLarge { lag: usize, n: usize },

    #[error("regressor has zero sum of squares")]
    DegenerateRegressor,

    #[error("fit has zero innovation variance")]
    DegenerateFit,

    #[error("optimizer did not converge after {iterations} iterations (objective {objective})")]
    NonConvergence { iterations: usize, objective: f64 },

    #[error("no candidate model could be fitted over the {p_max}x{q_max} order grid")]
    AllCandidatesFailed { p_max: usize, q_max: usize },

    #[error("alpha {0} is outside (0, 0.5]")]
    InvalidAlpha(f64),

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown boundary function `{0}`")]
    UnknownBoundary(String),

    #[error("boundary constant has not been calibrated")]
    NotCalibrated,

    #[error("boundary step must be at least 1, got {0}")]
    NonPositiveStep(u32),

    #[error("fraction {name}={value} is outside {range}")]
    InvalidFraction {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("AR coefficient {0} is outside (-1, 1)")]
    NonStationaryParameter(f64),

    #[error("vintage has {got} observations, expected {expected}")]
    WindowMismatch { expected: usize, got: usize },

    #[error("monitor is already terminal ({0})")]
    AlreadyTerminal(String),

    #[error("state file line {line}: {detail}")]
    StateFormat { line: usize, detail: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable identifier, e.g. `NonConsecutiveYears`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonConsecutiveYears { .. } => "NonConsecutiveYears",
            Error::InvalidStartYear { .. } => "InvalidStartYear",
            Error::EmptyData => "EmptyData",
            Error::MalformedNumber { .. } => "MalformedNumber",
            Error::TooFewObservations { .. } => "TooFewObservations",
            Error::DegenerateSeries(_) => "DegenerateSeries",
            Error::LagTooLarge { .. } => "LagTooLarge",
            Error::DegenerateRegressor => "DegenerateRegressor",
            Error::DegenerateFit => "DegenerateFit",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::AllCandidatesFailed { .. } => "AllCandidatesFailed",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::InvalidHorizon(_) => "InvalidHorizon",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::UnknownBoundary(_) => "UnknownBoundary",
            Error::NotCalibrated => "NotCalibrated",
            Error::NonPositiveStep(_) => "NonPositiveStep",
            Error::InvalidFraction { .. } => "InvalidFraction",
            Error::NonStationaryParameter(_) => "NonStationaryParameter",
            Error::WindowMismatch { .. } => "WindowMismatch",
            Error::AlreadyTerminal(_) => "AlreadyTerminal",
            Error::StateFormat { .. } => "StateFormat",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateSeries(_)
            | Error::DegenerateRegressor
            | Error::DegenerateFit
            | Error::NonConvergence { .. }
            | Error::AllCandidatesFailed { .. } => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
