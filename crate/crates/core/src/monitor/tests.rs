use super::*;
use crate::arma::fit_ar1;
use crate::calibration::{BoundaryKind, Horizon};
use crate::flux::FluxRecord;

const K: usize = 61;

/// Vintage whose budget imbalance is exactly `y` (all flux in `e_ff`).
fn vintage_from(y: &[f64]) -> Vintage {
    let records = y
        .iter()
        .enumerate()
        .map(|(i, &v)| FluxRecord {
            year: FIRST_YEAR + i as i32,
            e_ff: v,
            e_luc: 0.0,
            g_atm: 0.0,
            s_ocn: 0.0,
            s_lnd: 0.0,
            s_cem: 0.0,
        })
        .collect();
    Vintage::new("synthetic", records).unwrap()
}

/// Deterministic, irregular window of length K.
fn window() -> Vec<f64> {
    let mut y = Vec::with_capacity(K);
    let mut prev = 0.0;
    for i in 0..K {
        let shock = (((i * 7919 + 13) % 97) as f64 / 97.0 - 0.5) * 1.6;
        prev = 0.35 * prev + shock;
        y.push(prev);
    }
    y
}

fn config(alpha: f64, c: f64, horizon: u32) -> MonitorConfig {
    let boundary =
        BoundarySpec::with_constant(Horizon::Finite(horizon), alpha, BoundaryKind::Sqrt, c, 0, 0).unwrap();
    MonitorConfig::new(K, boundary).unwrap()
}

/// Appends the observation whose standardized innovation is `eps`.
fn extend_with_innovation(y: &mut Vec<f64>, eps: f64) {
    let fit = fit_ar1(&y[..K]).unwrap();
    let last = *y.last().unwrap();
    y.push(fit.phi * last + fit.sigma * eps);
}

#[test]
fn window_length_must_match() {
    let y = window();
    let short = vintage_from(&y[..60]);
    assert!(matches!(
        init_monitor(config(0.05, 2.45, 30), &short),
        Err(Error::WindowMismatch {
            expected: 61,
            got: 60
        })
    ));
    let state = init_monitor(config(0.05, 2.45, 30), &vintage_from(&y)).unwrap();
    assert!(state.steps().is_empty());
    assert_eq!(state.status(), MonitorStatus::Running);
    let fit = fit_ar1(&y).unwrap();
    assert_eq!(state.initial_fit().unwrap().phi_hat, fit.phi);
}

#[test]
fn first_step_crossing_rejects() {
    let mut y = window();
    extend_with_innovation(&mut y, -2.50);
    let mut state = init_monitor(config(0.05, 2.45, 30), &vintage_from(&y[..K])).unwrap();
    let decision = state.step(&vintage_from(&y)).unwrap();
    let rec = state.steps()[0];
    assert!((rec.innovation + 2.5).abs() < 1e-12);
    assert_eq!(rec.boundary, 2.45);
    assert_eq!(decision, Decision::Reject);
    assert_eq!(state.status(), MonitorStatus::Rejected(2020));
    // Terminal: further vintages are refused.
    y.push(0.0);
    assert!(matches!(
        state.step(&vintage_from(&y)),
        Err(Error::AlreadyTerminal(_))
    ));
}

#[test]
fn first_step_inside_boundary_continues() {
    let mut y = window();
    extend_with_innovation(&mut y, -2.40);
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    assert_eq!(state.step(&vintage_from(&y)).unwrap(), Decision::Continue);
    assert_eq!(state.status(), MonitorStatus::Running);
}

#[test]
fn tenth_step_crossing_at_32_percent() {
    let mut y = window();
    let mut state = MonitorState::new(config(0.32, 1.44, 30)).unwrap();
    for step in 1..=10 {
        extend_with_innovation(&mut y, -0.46);
        let decision = state.step(&vintage_from(&y)).unwrap();
        if step < 10 {
            assert_eq!(decision, Decision::Continue, "step {step}");
        } else {
            assert_eq!(decision, Decision::Reject);
        }
    }
    let last = state.steps()[9];
    assert!((last.z + 4.60).abs() < 1e-9);
    assert!((last.boundary - 4.55).abs() < 0.01);
}

#[test]
fn positive_drift_never_rejects() {
    let mut y = window();
    let mut state = MonitorState::new(config(0.32, 1.44, 30)).unwrap();
    for _ in 0..30 {
        extend_with_innovation(&mut y, 3.0);
        assert_eq!(state.step(&vintage_from(&y)).unwrap(), Decision::Continue);
    }
    assert_eq!(state.status(), MonitorStatus::HorizonExhausted);
    assert!(state.z() > 80.0);
    y.push(0.0);
    assert!(matches!(
        state.step(&vintage_from(&y)),
        Err(Error::AlreadyTerminal(_))
    ));
}

#[test]
fn wrong_vintage_length_is_refused() {
    let mut y = window();
    y.push(0.1);
    y.push(0.2);
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    assert!(matches!(
        state.step(&vintage_from(&y)),
        Err(Error::WindowMismatch {
            expected: 62,
            got: 63
        })
    ));
}

#[test]
fn revised_history_uses_current_vintage_and_freezes_past() {
    let mut y = window();
    extend_with_innovation(&mut y, 0.3);
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    state.step(&vintage_from(&y)).unwrap();
    let first = state.steps()[0];

    // Next release revises both the window and last year's value.
    let mut revised: Vec<f64> = y.iter().map(|v| v * 1.1).collect();
    revised[K] += 0.5;
    revised.push(-0.2);
    state.step(&vintage_from(&revised)).unwrap();

    let fit = fit_ar1(&revised[..K]).unwrap();
    let expected = (revised[K + 1] - fit.phi * revised[K]) / fit.sigma;
    let second = state.steps()[1];
    assert_eq!(second.innovation, expected);
    assert_eq!(second.phi_hat, fit.phi);
    assert_eq!(state.steps()[0], first);
    assert_eq!(second.z, first.innovation + expected);
}

#[test]
fn z_is_running_sum_and_report_agrees() {
    let mut y = window();
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    assert!(state.status_report().contains("status: running"));
    for eps in [0.4, -1.1, 0.25] {
        extend_with_innovation(&mut y, eps);
        state.step(&vintage_from(&y)).unwrap();
    }
    let mut z = 0.0;
    for s in state.steps() {
        z += s.innovation;
        assert_eq!(s.z, z);
        assert_eq!(s.decision == Decision::Reject, s.z <= -s.boundary);
    }
    let report = state.status_report();
    assert_eq!(report.lines().count(), 1 + 3 + 1);
}

#[test]
fn rejected_report_names_year() {
    let mut y = window();
    extend_with_innovation(&mut y, -3.0);
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    state.step(&vintage_from(&y)).unwrap();
    let report = state.status_report();
    let rows: Vec<&str> = report.lines().collect();
    assert!(rows[1].contains("reject"));
    assert!(rows[2].starts_with("status: rejected:2020"));
}

#[test]
fn state_file_replay_continues_identically() {
    let mut y = window();
    let eps = [0.7, -0.2, -1.3, 0.05, -0.9, 0.4];
    let mut uninterrupted = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    let mut vintages = Vec::new();
    for e in eps {
        extend_with_innovation(&mut y, e);
        // Revise the newest-but-one value so refits actually move.
        let mut v = y.clone();
        v[0] += 0.01 * e;
        vintages.push(vintage_from(&v));
    }
    for v in &vintages {
        uninterrupted.step(v).unwrap();
    }

    let mut first_half = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    for v in &vintages[..3] {
        first_half.step(v).unwrap();
    }
    let text = write_state(&first_half).unwrap();
    assert!(text.starts_with("version=1\nalpha=0.05\nT=30\nK=61\nf=sqrt\nc=2.4500000000000002\nstatus=running\n"));
    let mut resumed = read_state(&text).unwrap();
    assert_eq!(resumed.steps(), first_half.steps());
    for v in &vintages[3..] {
        resumed.step(v).unwrap();
    }
    for (a, b) in resumed.steps().iter().zip(uninterrupted.steps()) {
        assert_eq!(a.z.to_bits(), b.z.to_bits());
    }
    assert_eq!(write_state(&resumed).unwrap(), write_state(&uninterrupted).unwrap());
}

#[test]
fn tampered_state_is_rejected() {
    let mut y = window();
    extend_with_innovation(&mut y, 0.5);
    let mut state = MonitorState::new(config(0.05, 2.45, 30)).unwrap();
    state.step(&vintage_from(&y)).unwrap();
    let text = write_state(&state).unwrap();
    let last = text.lines().last().unwrap().to_string();
    let mut fields: Vec<String> = last.split(',').map(String::from).collect();
    fields[5] = "9.0".into();
    let tampered = text.replace(&last, &fields.join(","));
    assert!(matches!(read_state(&tampered), Err(Error::StateFormat { .. })));
    assert!(read_state("version=2\n").is_err());
}

#[test]
fn arma_null_model_orders_persist() {
    let mut y = window();
    let mut cfg = config(0.05, 2.45, 30);
    cfg.orders = (2, 0);
    let mut state = MonitorState::new(cfg).unwrap();
    y.push(0.3);
    state.step(&vintage_from(&y)).unwrap();
    let text = write_state(&state).unwrap();
    assert!(text.contains("\norders=2,0\n"));
    let back = read_state(&text).unwrap();
    assert_eq!(back.config.orders, (2, 0));
}
