//! Sequential monitoring of the global carbon budget imbalance.
//!
//! The pipeline: parse flux [`Vintage`]s, derive the budget imbalance,
//! fit a zero-mean AR(1) (or ARMA) null model, and run an innovation-based
//! CUSUM against a Monte Carlo calibrated boundary `c * sqrt(t)`. The
//! [`scenario`] module simulates under-reporting to study size and power.

pub mod arma;
pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod fmt;
pub mod monitor;
pub mod rng;
pub mod scenario;

pub use arma::{bic_select, fit_ar1, fit_arma, Ar1Fit, ArmaFit, OrderSelection};
pub use calibration::{
    calibrate, critical_value_table, BoundaryKind, BoundarySpec, CalibrationCache, CriticalValueTable, Horizon,
};
pub use diagnostics::{CriticalValues, DiagnosticsReport, KsReference};
pub use error::{Error, ErrorClass, Result};
pub use flux::{budget_imbalance, parse_vintage, serialize_vintage, BudgetImbalanceSeries, FluxRecord, Vintage};
pub use monitor::{init_monitor, read_state, write_state, Decision, MonitorConfig, MonitorState, MonitorStatus, StepRecord};
pub use rng::DEFAULT_SEED;
pub use scenario::{run_experiment, Dgp, PowerReport, ScenarioSpec};
