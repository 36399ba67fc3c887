//! Line-oriented state file: `key=value` header, then a CSV body.
//!
//! ```text
//! version=1
//! alpha=0.05
//! T=30
//! K=61
//! f=sqrt
//! c=2.4536000000000000
//! status=running
//! year,n,phi_hat,sigma_hat,innovation,z,boundary,decision,gauss_flag
//! ```
//!
//! Floats carry 17 significant digits so a reloaded state continues
//! bit-identically. An `orders=p,q` line appears only for non-AR(1) models.

use std::fmt::Write as _;

use super::{Decision, GaussFlag, MonitorConfig, MonitorState, MonitorStatus, StepRecord};
use crate::calibration::{BoundaryKind, BoundarySpec, Horizon};
use crate::error::{Error, Result};
use crate::fmt::csv;

pub const STATE_VERSION: u32 = 1;
const BODY_HEADER: &str = "year,n,phi_hat,sigma_hat,innovation,z,boundary,decision,gauss_flag";

pub fn write_state(state: &MonitorState) -> Result<String> {
    let b = &state.config.boundary;
    let mut out = String::new();
    writeln!(out, "version={STATE_VERSION}").unwrap();
    writeln!(out, "alpha={}", b.alpha).unwrap();
    writeln!(out, "T={}", b.horizon).unwrap();
    writeln!(out, "K={}", state.config.k).unwrap();
    writeln!(out, "f={}", b.kind).unwrap();
    writeln!(out, "c={}", csv(b.constant()?)).unwrap();
    if state.config.orders != (1, 0) {
        writeln!(out, "orders={},{}", state.config.orders.0, state.config.orders.1).unwrap();
    }
    writeln!(out, "status={}", state.status()).unwrap();
    writeln!(out, "{BODY_HEADER}").unwrap();
    for s in state.steps() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.year,
            s.n,
            csv(s.phi_hat),
            csv(s.sigma_hat),
            csv(s.innovation),
            csv(s.z),
            csv(s.boundary),
            s.decision.as_str(),
            s.gauss_flag.as_str()
        )
        .unwrap();
    }
    Ok(out)
}

fn fail(line: usize, detail: impl Into<String>) -> Error {
    Error::StateFormat {
        line,
        detail: detail.into(),
    }
}

fn parse_status(text: &str, line: usize) -> Result<MonitorStatus> {
    match text {
        "running" => Ok(MonitorStatus::Running),
        "horizon_exhausted" => Ok(MonitorStatus::HorizonExhausted),
        other => other
            .strip_prefix("rejected:")
            .and_then(|y| y.parse().ok())
            .map(MonitorStatus::Rejected)
            .ok_or_else(|| fail(line, format!("unknown status `{other}`"))),
    }
}

pub fn read_state(text: &str) -> Result<MonitorState> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (no, line) = lines.next().ok_or_else(|| fail(0, format!("missing `{key}=`")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(|v| (no, v.to_string()))
            .ok_or_else(|| fail(no, format!("expected `{key}=`, found `{line}`")))
    };
    let (no, version) = header("version")?;
    if version != STATE_VERSION.to_string() {
        return Err(fail(no, format!("unsupported version {version}")));
    }
    let (no, alpha) = header("alpha")?;
    let alpha: f64 = alpha.parse().map_err(|_| fail(no, "alpha"))?;
    let (_, horizon) = header("T")?;
    let horizon: Horizon = horizon.parse()?;
    let (no, k) = header("K")?;
    let k: usize = k.parse().map_err(|_| fail(no, "K"))?;
    let (_, kind) = header("f")?;
    let kind: BoundaryKind = kind.parse()?;
    let (no, c) = header("c")?;
    let c: f64 = c.parse().map_err(|_| fail(no, "c"))?;
    drop(header);

    let mut rest = lines.peekable();
    let mut orders = (1, 0);
    if let Some((no, line)) = rest.peek().copied() {
        if let Some(v) = line.strip_prefix("orders=") {
            let (p, q) = v.split_once(',').ok_or_else(|| fail(no, "orders"))?;
            orders = (
                p.parse().map_err(|_| fail(no, "orders"))?,
                q.parse().map_err(|_| fail(no, "orders"))?,
            );
            rest.next();
        }
    }
    let (no, line) = rest.next().ok_or_else(|| fail(0, "missing `status=`"))?;
    let status = parse_status(
        line.strip_prefix("status=").ok_or_else(|| fail(no, "expected `status=`"))?,
        no,
    )?;
    let (no, line) = rest.next().ok_or_else(|| fail(0, "missing CSV header"))?;
    if line != BODY_HEADER {
        return Err(fail(no, "unexpected CSV header"));
    }

    let mut steps = Vec::new();
    for (no, line) in rest {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(fail(no, format!("expected 9 fields, found {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| fail(no, format!("bad number `{}`", f[i]))) };
        steps.push(StepRecord {
            year: f[0].parse().map_err(|_| fail(no, "year"))?,
            n: f[1].parse().map_err(|_| fail(no, "n"))?,
            phi_hat: num(2)?,
            sigma_hat: num(3)?,
            innovation: num(4)?,
            z: num(5)?,
            boundary: num(6)?,
            decision: match f[7] {
                "continue" => Decision::Continue,
                "reject" => Decision::Reject,
                other => return Err(fail(no, format!("decision `{other}`"))),
            },
            gauss_flag: match f[8] {
                "pass" => GaussFlag::Pass,
                "warn" => GaussFlag::Warn,
                "skip" => GaussFlag::Skip,
                other => return Err(fail(no, format!("gauss_flag `{other}`"))),
            },
        });
    }

    let boundary = BoundarySpec::with_constant(horizon, alpha, kind, c, 0, 0)?;
    let config = MonitorConfig {
        k,
        boundary,
        orders,
        gaussianity_check: !steps.iter().any(|s| s.gauss_flag == GaussFlag::Skip),
    };
    MonitorState::from_parts(config, steps, status)
}
