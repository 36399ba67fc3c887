use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use co2watch_core::calibration::DEFAULT_REPLICATIONS;
use co2watch_core::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "co2watch", version, about = "Sequential CUSUM monitoring of the global carbon budget imbalance")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// Worker threads for Monte Carlo work; results do not depend on it
    /// [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// File of `key=value` lines supplying flag values; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Fixed-width tables, two decimals
    Text,
    /// CSV, 17 significant digits
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a vintage CSV and print its budget imbalance
    Ingest(IngestArgs),
    /// Descriptive statistics and diagnostic tests of the budget imbalance
    /// and of its AR(1) residuals
    Diagnose(DiagnoseArgs),
    /// Fit the null model, or select ARMA orders by BIC
    Fit(FitArgs),
    /// Calibrate the boundary constant c by Monte Carlo
    Calibrate(CalibrateArgs),
    /// Critical values c * f(t) for several sizes, by calendar year
    Table(TableArgs),
    /// Run the sequential test one vintage at a time
    #[command(subcommand)]
    Monitor(MonitorCommand),
    /// Size and power experiments under simulated misreporting
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// Vintage CSV with columns year,e_ff,e_luc,g_atm,s_ocn,s_lnd[,s_cem]
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArg,

    /// Also write the validated vintage in normalized form
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KsRef {
    /// Compare values as given against N(0, 1)
    Raw,
    /// Standardize by sample mean and std first
    Standardized,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArg,

    /// Use only the first K observations [default: all]
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,

    /// Reference for the Kolmogorov-Smirnov statistic
    #[arg(long, value_enum, default_value_t = KsRef::Raw)]
    pub ks_reference: KsRef,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArg,

    /// Fit window: first K observations [default: all]
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,

    /// AR order
    #[arg(long, default_value_t = 1)]
    pub p: usize,

    /// MA order
    #[arg(long, default_value_t = 0)]
    pub q: usize,

    /// Choose (p, q) by BIC over 0..=P_MAX x 0..=Q_MAX instead
    #[arg(long, num_args = 2, value_names = ["P_MAX", "Q_MAX"])]
    pub select: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Monte Carlo replications B
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub replications: usize,

    /// Master RNG seed
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Boundary function f
    #[arg(long, default_value = "sqrt")]
    pub boundary: String,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Monitoring horizon in years, or `inf`
    #[arg(long, default_value = "30")]
    pub horizon: String,

    /// Overall size of the test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[command(flatten)]
    pub mc: McArgs,

    /// Cache of calibrated constants, read and updated
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Monitoring horizon in years, or `inf`
    #[arg(long, default_value = "30")]
    pub horizon: String,

    /// Comma-separated sizes, one row each
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.10,0.32")]
    pub alpha: Vec<f64>,

    /// Table columns
    #[arg(long, default_value_t = 10)]
    pub years: u32,

    /// Calendar year of the first monitored observation
    #[arg(long, default_value_t = 2020)]
    pub start_year: i32,

    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Subcommand)]
pub enum MonitorCommand {
    /// Calibrate the boundary, fit the initial window and write a state file
    Init(MonitorInitArgs),
    /// Feed the next vintage; exits 3 when the test rejects
    Step(MonitorStepArgs),
    /// Print the per-year table and current status
    Status(MonitorStatusArgs),
}

#[derive(Debug, Args)]
pub struct StateArg {
    /// Monitor state file
    #[arg(long, value_name = "FILE", default_value = "co2watch.state")]
    pub state: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonitorInitArgs {
    /// Initial vintage; its length sets the end of the window
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,

    /// Initial window length; must equal the vintage length
    #[arg(long, default_value_t = 61)]
    pub k: usize,

    /// Overall size of the test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Monitoring horizon in years
    #[arg(long, default_value = "30")]
    pub horizon: String,

    /// AR order of the null model
    #[arg(long, default_value_t = 1)]
    pub p: usize,

    /// MA order of the null model
    #[arg(long, default_value_t = 0)]
    pub q: usize,

    /// Skip the Gaussianity battery on window residuals
    #[arg(long)]
    pub no_gauss_check: bool,

    #[command(flatten)]
    pub mc: McArgs,

    /// Cache of calibrated constants, read and updated
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,

    #[command(flatten)]
    pub state: StateArg,
}

#[derive(Debug, Args)]
pub struct MonitorStepArgs {
    #[command(flatten)]
    pub state: StateArg,

    /// Next vintage, one observation longer than the last
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonitorStatusArgs {
    #[command(flatten)]
    pub state: StateArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset (phi, sigma): 1 = (0.35, 0.72), 2 halves phi, 3 halves sigma
    #[arg(long, value_enum, default_value_t = DgpArg::One)]
    pub dgp: DgpArg,

    /// AR coefficient of the null process [default: from --dgp]
    #[arg(long)]
    pub phi: Option<f64>,

    /// Innovation std of the null process [default: from --dgp]
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Initial window length
    #[arg(long, default_value_t = 61)]
    pub k: usize,

    /// Monitoring horizon in years
    #[arg(long, default_value_t = 30)]
    pub horizon: u32,

    /// Overall size of the test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Annual abatement fraction of reported emissions
    #[arg(long, default_value_t = 0.0692)]
    pub g: f64,

    /// Misreporting parameter in [0, 1]; 0 is the null
    #[arg(long, default_value_t = 0.0)]
    pub m: f64,

    /// Baseline emissions level, GtC/yr
    #[arg(long, default_value_t = co2watch_core::scenario::DEFAULT_E_BASE)]
    pub e_base: f64,

    /// Monitoring step at which misreporting starts
    #[arg(long, default_value_t = 1)]
    pub tau_offset: u32,

    /// Simulated monitoring runs
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,

    /// Master RNG seed for both calibration and simulation
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Replications B for calibrating the boundary
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub calibration_replications: usize,

    /// Sweep the misreporting parameter, e.g. `m=0.05:0.05:0.40`
    #[arg(long, value_name = "m=START:STEP:STOP")]
    pub sweep: Option<String>,
}
