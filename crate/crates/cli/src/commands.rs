use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use co2watch_core::arma::{bic_select, fit_ar1, fit_arma};
use co2watch_core::calibration::{calibrate, critical_value_table, BoundaryKind, CalibrationCache, Horizon};
use co2watch_core::diagnostics::{CriticalValues, DiagnosticsReport, KsReference};
use co2watch_core::flux::{budget_imbalance, read_vintage_file, serialize_vintage};
use co2watch_core::fmt::csv;
use co2watch_core::monitor::{init_monitor, read_state, write_state, Decision, MonitorConfig};
use co2watch_core::scenario::{self, Dgp, ScenarioSpec};
use co2watch_core::{BoundarySpec, Error};

use crate::args::*;
use crate::{usage, Failure, EXIT_OK, EXIT_REJECT};

type Outcome = Result<i32, Failure>;

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Outcome {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("InvalidThreads", "--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| usage("InvalidThreads", e.to_string()))?;
    let text = pool.install(|| run_command(cli))?;
    out.write_all(text.0.as_bytes())?;
    Ok(text.1)
}

fn run_command(cli: &Cli) -> Result<(String, i32), Failure> {
    let f = cli.format;
    match &cli.command {
        Command::Ingest(a) => ingest(a, f),
        Command::Diagnose(a) => diagnose(a, f),
        Command::Fit(a) => fit(a, f),
        Command::Calibrate(a) => calibrate_cmd(a, f),
        Command::Table(a) => table(a, f),
        Command::Monitor(MonitorCommand::Init(a)) => monitor_init(a, f),
        Command::Monitor(MonitorCommand::Step(a)) => monitor_step(a, f),
        Command::Monitor(MonitorCommand::Status(a)) => monitor_status(a, f),
        Command::Simulate(a) => simulate(a, f),
    }
}

fn ok(text: String) -> Result<(String, i32), Failure> {
    Ok((text, EXIT_OK))
}

fn window(y: &[f64], k: Option<usize>) -> Result<&[f64], Error> {
    match k {
        None => Ok(y),
        Some(k) if k <= y.len() => Ok(&y[..k]),
        Some(k) => Err(Error::WindowMismatch {
            expected: k,
            got: y.len(),
        }),
    }
}

fn ingest(a: &IngestArgs, f: Format) -> Result<(String, i32), Failure> {
    let v = read_vintage_file(&a.data.data)?;
    if let Some(path) = &a.out {
        let file = std::fs::File::create(path)?;
        serialize_vintage(&v, std::io::BufWriter::new(file))?;
    }
    let b = budget_imbalance(&v);
    let mut s = String::new();
    match f {
        Format::Text => {
            writeln!(s, "vintage {}: {} years, {}-{}", v.label(), v.len(), v.first_year(), v.last_year()).unwrap();
            writeln!(s, "{:>6} {:>8}", "year", "B").unwrap();
            for (y, x) in b.years.iter().zip(&b.values) {
                writeln!(s, "{y:>6} {x:>8.2}").unwrap();
            }
        }
        Format::Csv => {
            s.push_str("year,budget_imbalance\n");
            for (y, x) in b.years.iter().zip(&b.values) {
                writeln!(s, "{y},{}", csv(*x)).unwrap();
            }
        }
    }
    ok(s)
}

struct DiagRow {
    name: &'static str,
    report: DiagnosticsReport,
    phi: f64,
    sigma: f64,
}

const DIAG_HEADER: [&str; 14] = [
    "series", "n", "mean", "std", "skew", "kurt", "phi_hat", "sigma_hat", "N", "KS", "AD", "DW", "Q(1)", "Q(5)",
];

fn diag_values(r: &DiagRow) -> [f64; 12] {
    let d = &r.report;
    let q = |lag| d.q.get(&lag).copied().unwrap_or(f64::NAN);
    [d.mean, d.std, d.skew, d.kurt, r.phi, r.sigma, d.jb, d.ks, d.ad, d.dw, q(1), q(5)]
}

fn render_diagnostics(rows: &[DiagRow], f: Format) -> String {
    let mut s = String::new();
    match f {
        Format::Text => {
            write!(s, "{:<10}{:>4}", DIAG_HEADER[0], DIAG_HEADER[1]).unwrap();
            for h in &DIAG_HEADER[2..] {
                write!(s, "{h:>8}").unwrap();
            }
            s.push('\n');
            for r in rows {
                write!(s, "{:<10}{:>4}", r.name, r.report.n).unwrap();
                for v in diag_values(r) {
                    write!(s, "{v:>8.2}").unwrap();
                }
                s.push('\n');
            }
        }
        Format::Csv => {
            s.push_str("series,n,mean,std,skew,kurt,phi_hat,sigma_hat,jb,ks,ad,dw,q1,q5\n");
            for r in rows {
                write!(s, "{},{}", r.name, r.report.n).unwrap();
                for v in diag_values(r) {
                    write!(s, ",{}", csv(v)).unwrap();
                }
                s.push('\n');
            }
        }
    }
    s
}

fn diagnose(a: &DiagnoseArgs, f: Format) -> Result<(String, i32), Failure> {
    let v = read_vintage_file(&a.data.data)?;
    let b = budget_imbalance(&v);
    let y = window(&b.values, a.k)?;
    let critical = CriticalValues::default();
    let reference = match a.ks_reference {
        KsRef::Raw => KsReference::StandardNormal,
        KsRef::Standardized => KsReference::Standardized,
    };
    let fit = fit_ar1(y)?;
    let refit = fit_ar1(&fit.residuals)?;
    let rows = [
        DiagRow {
            name: "imbalance",
            report: DiagnosticsReport::compute_with(y, &critical, reference)?,
            phi: fit.phi,
            sigma: fit.sigma,
        },
        DiagRow {
            name: "residuals",
            report: DiagnosticsReport::compute_with(&fit.residuals, &critical, reference)?,
            phi: refit.phi,
            sigma: refit.sigma,
        },
    ];
    let mut s = render_diagnostics(&rows, f);
    if f == Format::Text {
        writeln!(
            s,
            "5% critical values: N {}, KS {}, AD {}, Q(1) {}, Q(5) {}",
            critical.jarque_bera, critical.ks, critical.anderson_darling, critical.ljung_box[&1], critical.ljung_box[&5]
        )
        .unwrap();
    }
    ok(s)
}

fn fit(a: &FitArgs, f: Format) -> Result<(String, i32), Failure> {
    let v = read_vintage_file(&a.data.data)?;
    let b = budget_imbalance(&v);
    let y = window(&b.values, a.k)?;
    let mut s = String::new();
    let mut params: Vec<(String, f64)> = Vec::new();
    let residuals: Vec<f64>;
    let (p, q);
    if let Some(sel) = &a.select {
        let selection = bic_select(y, sel[0], sel[1])?;
        if f == Format::Text {
            writeln!(s, "BIC grid ({} cells, {} skipped)", selection.fits.len(), selection.skipped.len()).unwrap();
            let mut fits = selection.fits.clone();
            fits.sort_by_key(|x| (x.p, x.q));
            for x in &fits {
                writeln!(s, "  ARMA({},{})  bic {:>10.3}", x.p, x.q, x.bic).unwrap();
            }
        }
        (p, q) = (selection.p, selection.q);
        let best = selection.best;
        residuals = best.innovations(y).iter().map(|e| e / best.sigma).collect();
        push_arma(&mut params, &best.phi, &best.psi, best.sigma, best.loglik, best.bic);
    } else if (a.p, a.q) == (1, 0) {
        (p, q) = (1, 0);
        let ar = fit_ar1(y)?;
        params.push(("phi1".into(), ar.phi));
        params.push(("sigma".into(), ar.sigma));
        residuals = ar.residuals;
    } else {
        (p, q) = (a.p, a.q);
        let m = fit_arma(y, p, q)?;
        residuals = m.innovations(y).iter().map(|e| e / m.sigma).collect();
        push_arma(&mut params, &m.phi, &m.psi, m.sigma, m.loglik, m.bic);
    }
    let report = DiagnosticsReport::compute(&residuals, &CriticalValues::default())?;
    let refit = fit_ar1(&residuals).map(|r| (r.phi, r.sigma)).unwrap_or((f64::NAN, f64::NAN));
    let row = DiagRow {
        name: "residuals",
        report,
        phi: refit.0,
        sigma: refit.1,
    };
    match f {
        Format::Text => {
            writeln!(s, "ARMA({p},{q}) on {} observations", y.len()).unwrap();
            for (k, v) in &params {
                writeln!(s, "  {k:<8} {v:>10.4}").unwrap();
            }
        }
        Format::Csv => {
            s.push_str("parameter,value\n");
            writeln!(s, "p,{p}\nq,{q}\nn,{}", y.len()).unwrap();
            for (k, v) in &params {
                writeln!(s, "{k},{}", csv(*v)).unwrap();
            }
            s.push('\n');
        }
    }
    s.push_str(&render_diagnostics(&[row], f));
    ok(s)
}

fn push_arma(params: &mut Vec<(String, f64)>, phi: &[f64], psi: &[f64], sigma: f64, loglik: f64, bic: f64) {
    for (i, c) in phi.iter().enumerate() {
        params.push((format!("phi{}", i + 1), *c));
    }
    for (i, c) in psi.iter().enumerate() {
        params.push((format!("psi{}", i + 1), *c));
    }
    params.push(("sigma".into(), sigma));
    params.push(("loglik".into(), loglik));
    params.push(("bic".into(), bic));
}

fn calibrated(
    horizon: Horizon,
    alpha: f64,
    mc: &McArgs,
    cache: Option<&Path>,
) -> Result<BoundarySpec, Failure> {
    let kind: BoundaryKind = mc.boundary.parse()?;
    match cache {
        Some(path) => {
            let mut c = CalibrationCache::load(path)?;
            let spec = c.get_or_calibrate(horizon, alpha, kind, mc.replications, mc.seed)?;
            c.save(path)?;
            Ok(spec)
        }
        None => Ok(calibrate(horizon, alpha, kind, mc.replications, mc.seed)?),
    }
}

fn calibrate_cmd(a: &CalibrateArgs, f: Format) -> Result<(String, i32), Failure> {
    let horizon: Horizon = a.horizon.parse()?;
    let spec = calibrated(horizon, a.alpha, &a.mc, a.cache.as_deref())?;
    let c = spec.constant()?;
    let s = match f {
        Format::Text => format!(
            "c = {c:.4}  (T={horizon}, alpha={}, f={}, B={}, seed={})\n",
            a.alpha, spec.kind, a.mc.replications, a.mc.seed
        ),
        Format::Csv => format!(
            "T,alpha,f,B,seed,c\n{horizon},{},{},{},{},{}\n",
            a.alpha,
            spec.kind,
            a.mc.replications,
            a.mc.seed,
            csv(c)
        ),
    };
    ok(s)
}

fn table(a: &TableArgs, f: Format) -> Result<(String, i32), Failure> {
    let horizon: Horizon = a.horizon.parse()?;
    let kind: BoundaryKind = a.mc.boundary.parse()?;
    let t = critical_value_table(horizon, kind, &a.alpha, a.years, a.mc.replications, a.mc.seed, a.start_year)?;
    ok(match f {
        Format::Text => t.to_text(),
        Format::Csv => t.to_csv(),
    })
}

fn load_state(path: &Path) -> Result<co2watch_core::MonitorState, Failure> {
    let text = std::fs::read_to_string(path)?;
    Ok(read_state(&text)?)
}

fn save_state(path: &Path, state: &co2watch_core::MonitorState) -> Result<(), Failure> {
    let text = write_state(state)?;
    // Write-then-rename so an interrupted run never leaves half a state.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn monitor_init(a: &MonitorInitArgs, f: Format) -> Result<(String, i32), Failure> {
    let horizon: Horizon = a.horizon.parse()?;
    if horizon.limit().is_none() {
        return Err(Error::InvalidHorizon("monitoring needs a finite horizon".into()).into());
    }
    let v = read_vintage_file(&a.data)?;
    let boundary = calibrated(horizon, a.alpha, &a.mc, a.cache.as_deref())?;
    let mut config = MonitorConfig::new(a.k, boundary)?;
    config.orders = (a.p, a.q);
    config.gaussianity_check = !a.no_gauss_check;
    let state = init_monitor(config, &v)?;
    save_state(&a.state.state, &state)?;
    let fit = state.initial_fit().expect("fit stored at init");
    let c = state.config.boundary.constant()?;
    let s = match f {
        Format::Text => format!(
            "initial window {}-{} (K={}): phi_hat {:.2}, sigma_hat {:.2}, gaussianity {}\nboundary c = {c:.4} (T={horizon}, alpha={})\nstate written to {}\n",
            v.first_year(),
            v.last_year(),
            a.k,
            fit.phi_hat,
            fit.sigma_hat,
            fit.gauss_flag.as_str(),
            a.alpha,
            a.state.state.display()
        ),
        Format::Csv => format!(
            "k,phi_hat,sigma_hat,gauss_flag,c\n{},{},{},{},{}\n",
            a.k,
            csv(fit.phi_hat),
            csv(fit.sigma_hat),
            fit.gauss_flag.as_str(),
            csv(c)
        ),
    };
    ok(s)
}

fn monitor_step(a: &MonitorStepArgs, f: Format) -> Result<(String, i32), Failure> {
    let mut state = load_state(&a.state.state)?;
    let v = read_vintage_file(&a.data)?;
    let decision = state.step(&v)?;
    save_state(&a.state.state, &state)?;
    let r = state.steps().last().expect("step recorded");
    let s = match f {
        Format::Text => format!(
            "{}: innovation {:.2}, Z {:.2}, boundary -{:.2} -> {} (status {})\n",
            r.year,
            r.innovation,
            r.z,
            r.boundary,
            r.decision.as_str(),
            state.status()
        ),
        Format::Csv => format!(
            "year,n,phi_hat,sigma_hat,innovation,z,boundary,decision,gauss_flag\n{},{},{},{},{},{},{},{},{}\n",
            r.year,
            r.n,
            csv(r.phi_hat),
            csv(r.sigma_hat),
            csv(r.innovation),
            csv(r.z),
            csv(r.boundary),
            r.decision.as_str(),
            r.gauss_flag.as_str()
        ),
    };
    let code = if decision == Decision::Reject { EXIT_REJECT } else { EXIT_OK };
    Ok((s, code))
}

fn monitor_status(a: &MonitorStatusArgs, f: Format) -> Result<(String, i32), Failure> {
    let state = load_state(&a.state.state)?;
    ok(match f {
        Format::Text => state.status_report(),
        Format::Csv => write_state(&state)?,
    })
}

fn simulate(a: &SimulateArgs, f: Format) -> Result<(String, i32), Failure> {
    let dgp = match a.dgp {
        DgpArg::One => Dgp::One,
        DgpArg::Two => Dgp::Two,
        DgpArg::Three => Dgp::Three,
    };
    let mut spec = ScenarioSpec::new(dgp, a.k, a.horizon, a.alpha);
    if let Some(phi) = a.phi {
        spec.phi = phi;
    }
    if let Some(sigma) = a.sigma {
        spec.sigma = sigma;
    }
    spec.g = a.g;
    spec.m = a.m;
    spec.e_base = a.e_base;
    spec.tau_offset = a.tau_offset;
    spec.replications = a.replications;
    spec.seed = a.seed;
    spec.validate()?;
    let boundary = calibrate(
        Horizon::Finite(a.horizon),
        a.alpha,
        BoundaryKind::Sqrt,
        a.calibration_replications,
        a.seed,
    )?;
    let c = boundary.constant()?;
    let mut s = String::new();
    if let Some(sweep) = &a.sweep {
        let grid = sweep
            .strip_prefix("m=")
            .ok_or_else(|| usage("InvalidSweep", format!("--sweep `{sweep}` must start with `m=`")))?;
        let ms = scenario::parse_sweep(grid)?;
        let curve = scenario::power_curve(&spec, &boundary, &ms)?;
        match f {
            Format::Csv => s.push_str(&scenario::power_curve_csv(&curve)),
            Format::Text => {
                writeln!(s, "phi {} sigma {} K {} T {} alpha {} c {c:.4}", spec.phi, spec.sigma, spec.k, spec.horizon, spec.alpha).unwrap();
                writeln!(s, "{:>6} {:>8} {:>10} {:>8}", "m", "power", "mean_time", "median").unwrap();
                for (m, r) in &curve {
                    let mean = r.mean_detection_time.map_or("NA".into(), |t| format!("{t:.2}"));
                    let median = r.quartiles.map_or("NA".into(), |q| q[1].to_string());
                    writeln!(s, "{m:>6} {:>8.4} {mean:>10} {median:>8}", r.rejection_rate).unwrap();
                }
            }
        }
        return ok(s);
    }
    let report = scenario::run_experiment(&spec, &boundary)?;
    match f {
        Format::Csv => {
            s.push_str(&report.to_csv());
            s.push('\n');
            for line in report.summary().lines() {
                writeln!(s, "# {line}").unwrap();
            }
        }
        Format::Text => {
            writeln!(
                s,
                "phi {} sigma {} K {} T {} alpha {} g {} m {} c {c:.4}",
                spec.phi, spec.sigma, spec.k, spec.horizon, spec.alpha, spec.g, spec.m
            )
            .unwrap();
            s.push_str(&report.summary());
        }
    }
    ok(s)
}
