use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use libration::noise_eater::{
    closed_loop_psd, controller_response, default_fiber_delay, effective_psd_at_libration, gain_scan,
    interferometer_response, loop_gain, suppression, write_gain_scan_csv, FeedbackParams, Modulator,
};
use libration::params::PhaseNoiseParams;
use libration::OperatingPoint;
use num_complex::Complex64;
use proptest::prelude::*;

const OMEGA_ALPHA: f64 = TAU * 1.1e6;

fn particle2(psd_s: f64) -> OperatingPoint {
    let (kappa, delta) = (TAU * 330e3, OMEGA_ALPHA);
    OperatingPoint {
        omega_alpha: OMEGA_ALPHA,
        kappa,
        detuning: delta,
        coupling_g: TAU * 31.5e3,
        recoil_gamma_ba: TAU * 0.5e3,
        psd_s,
        drive_lambda: OperatingPoint::lambda_for_ncav(6.8e6, delta, kappa),
    }
}

#[test]
fn fiber_interferometer_peaks_near_one_megahertz() {
    let tau: f64 = default_fiber_delay();
    let (mut best_f, mut best) = (0.0, 0.0);
    for k in 1..=2000 {
        let f = k as f64 * 1e3;
        let r = interferometer_response(tau, TAU * f).norm();
        if r > best {
            best = r;
            best_f = f;
        }
    }
    assert!((0.9e6..=1.3e6).contains(&best_f), "{best_f}");
    assert!((best - 2.0).abs() < 1e-6);
    assert!(interferometer_response(tau, OMEGA_ALPHA).norm() > 1.9);
}

#[test]
fn controller_vanishes_at_zero_and_infinity_and_with_zero_gain() {
    let fb = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA).unwrap();
    assert_eq!(controller_response(&fb, 0.0).norm(), 0.0);
    assert!(controller_response(&fb, 1e15).norm() < 1e-6);
    assert!(controller_response(&fb, 1e-3).norm() < 1e-6);
    let off = fb.clone().with_gain(0.0);
    for w in [0.0, 1e3, OMEGA_ALPHA, 1e9] {
        assert_eq!(controller_response(&off, w).norm(), 0.0);
    }
}

#[test]
fn unit_gain_gives_twenty_decibels_at_center() {
    let fb = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA).unwrap();
    let s = suppression(&fb, OMEGA_ALPHA);
    assert!((10.0 * s.log10() + 20.0).abs() < 1e-9, "{s}");
    assert!((loop_gain(&fb, OMEGA_ALPHA) - Complex64::new(9.0, 0.0)).norm() < 1e-9);
}

#[test]
fn open_loop_passes_noise_unchanged() {
    let s = PhaseNoiseParams::from_hz_per_sqrt_hz(0.16).psd_s;
    let fb = FeedbackParams::with_defaults(0.0, OMEGA_ALPHA).unwrap();
    let out = effective_psd_at_libration(&fb, s, OMEGA_ALPHA).unwrap();
    assert_eq!(out, s);
    assert!(((out / (TAU * TAU)).sqrt() - 0.16).abs() < 1e-12);
    let on = fb.with_gain(1.0);
    let reduced = effective_psd_at_libration(&on, s, OMEGA_ALPHA).unwrap();
    assert!((s / reduced - 100.0).abs() < 1e-6);
}

#[test]
fn closed_loop_equals_open_where_controller_is_silent() {
    let fb = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA).unwrap();
    assert_eq!(closed_loop_psd(&fb, 3.0, 0.0).unwrap(), 3.0);
    assert!(closed_loop_psd(&fb, -1.0, OMEGA_ALPHA).is_err());
}

#[test]
fn detuned_center_weakens_suppression() {
    let fb = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA * 1.05).unwrap();
    let at_center = closed_loop_psd(&fb, 1.0, fb.omega_iq).unwrap();
    let at_libration = effective_psd_at_libration(&fb, 1.0, OMEGA_ALPHA).unwrap();
    assert!(at_libration > at_center);
}

#[test]
fn suppression_monotone_in_gain_for_aligned_phase() {
    for offset in [-1.4, -0.7, 0.0, 0.7, 1.4] {
        // rotate the loop phase at the center by `offset` (inside ±π/2)
        let base = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA).unwrap();
        let fb = base.clone().with_tau_iq(base.tau_iq + offset / OMEGA_ALPHA);
        let x = loop_gain(&fb, OMEGA_ALPHA);
        assert!((x.arg() + offset).abs() < 1e-6 || (x.arg() + offset).abs() > TAU - 1e-6);
        let mut prev = f64::INFINITY;
        for k in 0..=50 {
            let s = suppression(&fb.clone().with_gain(0.04 * k as f64), OMEGA_ALPHA);
            assert!(s < prev || k == 0, "phase {offset} step {k}");
            prev = s;
        }
    }
}

#[test]
fn custom_modulator_realigned() {
    let m = Modulator::Function(Arc::new(|w: f64| Complex64::from_polar(9.0 / 2.0, -w * 1e-8)));
    let fb = FeedbackParams::with_defaults(1.0, OMEGA_ALPHA).unwrap().with_modulator(m);
    let l = loop_gain(&fb, OMEGA_ALPHA);
    assert!(l.im.abs() < 1e-9 * l.norm() && l.re > 0.0, "{l}");
}

#[test]
fn single_precision_loop() {
    let fb = FeedbackParams::<f32>::with_defaults(1.0, OMEGA_ALPHA as f32).unwrap();
    let s = suppression(&fb, fb.omega_iq);
    assert!((s - 0.01).abs() < 1e-4, "{s}");
}

#[test]
fn gain_scan_is_monotone_and_reaches_backaction_limit() {
    let s_open = PhaseNoiseParams::from_hz_per_sqrt_hz(0.16).psd_s;
    let op = particle2(s_open);
    let fb = FeedbackParams::with_defaults(0.0, OMEGA_ALPHA).unwrap();
    let gains: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let rows = gain_scan(&fb, &op, s_open, &gains).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].n_ss <= w[0].n_ss);
        assert!(w[1].gamma_phi <= w[0].gamma_phi);
    }
    assert!(rows[0].n_ss > 1.0, "open loop {}", rows[0].n_ss);
    let n0 = libration::rates::steady_state_occupation(&particle2(0.0)).unwrap().n0;
    let last = rows.last().unwrap();
    assert!(last.n_ss - n0 < 0.02 * rows[0].n_ss, "{} vs {n0}", last.n_ss);
    let mut buf = Vec::new();
    write_gain_scan_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("g [1],S_fb [rad^2/s],Gamma_phi [rad/s],n_ss [1]\n"));
    assert_eq!(text.lines().count(), gains.len() + 1);
}

proptest! {
    #[test]
    fn closed_loop_is_non_negative(
        g in 0.0f64..5.0,
        w in 0.0f64..1e8,
        s in 0.0f64..1e3,
        phase in -FRAC_PI_2..FRAC_PI_2,
    ) {
        let fb = FeedbackParams::with_defaults(g, OMEGA_ALPHA).unwrap();
        let fb = fb.clone().with_tau_iq(fb.tau_iq + phase / OMEGA_ALPHA);
        let out = closed_loop_psd(&fb, s, w).unwrap();
        prop_assert!(out >= 0.0 && out.is_finite());
    }
}
