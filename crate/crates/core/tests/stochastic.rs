use std::f64::consts::TAU;

use libration::rates::phase_noise_heating;
use libration::stochastic::{
    calibrate_convention, cavity_fixed_point, cavity_sde, cavity_sde_from, drive_record, heating_rate_from_drive,
    max_cavity_step, phase_trajectory, phase_trajectory_stream, run_ensemble, welch_psd, write_trajectory_csv,
    DriveRecord, EnsembleConfig, StochasticError,
};
use libration::OperatingPoint;
use num_complex::Complex64;

/// Particle-2-like operating point at the antinode.
fn point(psd_s: f64) -> OperatingPoint {
    let kappa = TAU * 330e3;
    let detuning = TAU * 1.1e6;
    let ncav: f64 = 6.8e6;
    OperatingPoint {
        omega_alpha: detuning,
        kappa,
        detuning,
        coupling_g: TAU * 31.5e3,
        recoil_gamma_ba: TAU * 0.5e3,
        psd_s,
        drive_lambda: (ncav * (detuning * detuning + kappa * kappa / 4.0)).sqrt(),
    }
}

#[test]
fn zero_noise_phase_is_flat() {
    let t = phase_trajectory(0.0, 1e-8, 1000, 9).unwrap();
    assert_eq!(t.phi.len(), 1001);
    assert!(t.phi.iter().all(|&p| p == 0.0));
}

#[test]
fn increment_statistics() {
    let (s, dt, n) = (3.0e4, 1e-7, 1_000_000);
    let t = phase_trajectory(s, dt, n, 17).unwrap();
    assert_eq!(t.phi[0], 0.0);
    let inc: Vec<f64> = t.phi.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = inc.iter().sum::<f64>() / n as f64;
    let var = inc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = s * dt;
    // chi-squared: std of the sample variance is var·sqrt(2/(n−1))
    assert!((var - want).abs() < 3.0 * want * (2.0 / (n - 1) as f64).sqrt(), "{var} vs {want}");
    // zero-mean frequency noise
    assert!(mean.abs() < 3.0 * (want / n as f64).sqrt());
}

#[test]
fn frequency_noise_spectrum_is_white() {
    let (s, dt) = (2.0e3, 1e-6);
    let t = phase_trajectory(s, dt, 1 << 20, 4).unwrap();
    let rate: Vec<f64> = t.phi.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let seg = 1024;
    let p = welch_psd(&rate, dt, seg).unwrap();
    let segments = (rate.len() - seg) / (seg / 2) + 1;
    // overlapped Hann segments are nearly independent: per-bin relative std ~ 1/sqrt(K)
    let rel = 1.0 / (segments as f64 * 0.9).sqrt();
    let band: Vec<f64> = p
        .freq
        .iter()
        .zip(&p.psd)
        .filter(|(f, _)| **f >= 0.01 / dt && **f <= 0.4 / dt)
        .map(|(_, v)| v / 2.0)
        .collect();
    let level = band.iter().sum::<f64>() / band.len() as f64;
    assert!((level - s).abs() < 3.0 * s * rel / (band.len() as f64).sqrt() * 2.0, "{level} vs {s}");
    for v in &band {
        assert!((v - s).abs() < 5.0 * rel * s);
    }
}

#[test]
fn trajectories_are_reproducible() {
    let a = phase_trajectory_stream(1.0, 1e-3, 5000, 42, 3).unwrap();
    let b = phase_trajectory_stream(1.0, 1e-3, 5000, 42, 3).unwrap();
    let c = phase_trajectory_stream(1.0, 1e-3, 5000, 42, 4).unwrap();
    assert!(a.phi.iter().zip(&b.phi).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a.phi, c.phi);
    let op = point(TAU * 330e3 / 50.0);
    let cfg = EnsembleConfig {
        n_trajectories: 4,
        periods: 60,
        ..Default::default()
    };
    let r1 = run_ensemble(&op, &cfg).unwrap();
    let r2 = run_ensemble(&op, &cfg).unwrap();
    assert_eq!(r1.ncav_ensemble.mean.to_bits(), r2.ncav_ensemble.mean.to_bits());
    assert_eq!(r1.xi_mean.mean.to_bits(), r2.xi_mean.mean.to_bits());
}

#[test]
fn noiseless_cavity_sits_at_fixed_point() {
    let op = point(0.0);
    let dt = max_cavity_step(&op);
    let noise = phase_trajectory(0.0, dt, 2000, 1).unwrap();
    // start empty: converges to iΛ/(iΔ + κ/2)
    let cav = cavity_sde_from(&op, &noise, Complex64::new(0.0, 0.0)).unwrap();
    let fp = cavity_fixed_point(&op);
    let last = *cav.alpha.last().unwrap();
    assert!((last - fp).norm() < 1e-9 * fp.norm());
    let ncav = op.drive_lambda.powi(2) / (op.detuning.powi(2) + op.kappa.powi(2) / 4.0);
    assert!((last.norm_sqr() - ncav).abs() < 1e-8 * ncav);

    // the steady drive is the constant 2G Re[iΛ/(iΔ + κ/2)]
    let cav = cavity_sde(&op, &noise).unwrap();
    let rec = drive_record(&op, &noise, &cav).unwrap();
    let want = 2.0 * op.coupling_g * fp.re;
    assert!(rec.xi.iter().all(|x| (x - want).abs() <= 1e-9 * want.abs()));
}

#[test]
fn undriven_cavity_decays() {
    let mut op = point(1e3);
    op.drive_lambda = 0.0;
    let dt = max_cavity_step(&op);
    let noise = phase_trajectory(op.psd_s, dt, 4000, 2).unwrap();
    let cav = cavity_sde_from(&op, &noise, Complex64::new(3.0, -2.0)).unwrap();
    let t_end = 4000.0 * dt;
    let want = 13f64.sqrt() * (-op.kappa / 2.0 * t_end).exp();
    assert!((cav.alpha.last().unwrap().norm() - want).abs() < 1e-9);
}

#[test]
fn coarse_steps_are_rejected() {
    let op = point(0.0);
    let dt = 1.01 * max_cavity_step(&op);
    let noise = phase_trajectory(0.0, dt, 10, 1).unwrap();
    assert!(matches!(cavity_sde(&op, &noise), Err(StochasticError::StepTooCoarse { .. })));
}

#[test]
fn drive_requires_aligned_grids() {
    let op = point(0.0);
    let dt = max_cavity_step(&op);
    let noise = phase_trajectory(0.0, dt, 10, 1).unwrap();
    let cav = cavity_sde(&op, &phase_trajectory(0.0, dt, 11, 1).unwrap()).unwrap();
    assert!(matches!(drive_record(&op, &noise, &cav), Err(StochasticError::GridMismatch { .. })));
    let mut uncoupled = op;
    uncoupled.coupling_g = 0.0;
    let cav = cavity_sde(&op, &noise).unwrap();
    assert!(drive_record(&uncoupled, &noise, &cav).unwrap().xi.iter().all(|&x| x == 0.0));
}

#[test]
fn ensemble_moments_match_finite_noise_closed_forms() {
    // For white phase noise, β = e^{iφ}α obeys dβ = [−(a + S/2)β + iΛ]dt + iβ dφ,
    // so ⟨β⟩ = iΛ/(a + S/2) and ⟨|α|²⟩ = Λ²(κ + S) / (κ[Δ² + ((κ + S)/2)²]).
    let kappa = TAU * 330e3;
    let op = point(kappa / 100.0);
    let cfg = EnsembleConfig {
        n_trajectories: 200,
        periods: 256,
        ..Default::default()
    };
    let r = run_ensemble(&op, &cfg).unwrap();
    let (k, s, d, l) = (op.kappa, op.psd_s, op.detuning, op.drive_lambda);
    let ncav_exact = l * l * (k + s) / (k * (d * d + ((k + s) / 2.0).powi(2)));
    assert!((op.ncav_phase_diffused() / ncav_exact - 1.0).abs() < 1e-12);
    let m = r.ncav_time_average;
    assert!((m.mean - ncav_exact).abs() < 3.0 * m.std_error, "{} ± {} vs {ncav_exact}", m.mean, m.std_error);
    let e = r.ncav_ensemble;
    assert!((e.mean - ncav_exact).abs() < 3.0 * e.std_error);

    let beta = Complex64::new(0.0, l) / Complex64::new(k / 2.0 + s / 2.0, d);
    let xi_exact = 2.0 * op.coupling_g * beta.re;
    let x = r.xi_mean;
    assert!((x.mean - xi_exact).abs() < 3.0 * x.std_error, "{} ± {} vs {xi_exact}", x.mean, x.std_error);
}

#[test]
fn cavity_occupation_is_step_independent() {
    let kappa = TAU * 330e3;
    let op = point(kappa / 100.0);
    let run = |spp| {
        let cfg = EnsembleConfig {
            n_trajectories: 64,
            periods: 256,
            steps_per_period: spp,
            master_seed: 8,
        };
        run_ensemble(&op, &cfg).unwrap().ncav_time_average.mean
    };
    let (coarse, fine) = (run(24), run(48));
    assert!((coarse - fine).abs() / fine < 0.005, "{coarse} vs {fine}");
}

#[test]
fn heating_needs_enough_records() {
    let op = point(TAU * 330e3 / 50.0);
    let cfg = EnsembleConfig {
        n_trajectories: 10,
        periods: 64,
        ..Default::default()
    };
    let dt = cfg.dt(op.omega_alpha);
    let n = cfg.n_steps(&op);
    let recs: Vec<DriveRecord> = (0..10)
        .map(|k| {
            let noise = phase_trajectory_stream(op.psd_s, dt, n, 1, k).unwrap();
            drive_record(&op, &noise, &cavity_sde(&op, &noise).unwrap()).unwrap()
        })
        .collect();
    assert!(matches!(
        heating_rate_from_drive(&recs, op.omega_alpha),
        Err(StochasticError::InsufficientStatistics { n_records: 10, .. })
    ));
    let mut short = recs[0].clone();
    short.xi.truncate(short.transient + 10 * cfg.steps_per_period);
    let many = vec![short; 100];
    assert!(matches!(
        heating_rate_from_drive(&many, op.omega_alpha),
        Err(StochasticError::RecordTooShort { .. })
    ));
}

#[test]
fn zero_phase_noise_gives_zero_heating() {
    let op = point(0.0);
    let cfg = EnsembleConfig {
        n_trajectories: 100,
        periods: 64,
        ..Default::default()
    };
    let r = run_ensemble(&op, &cfg).unwrap();
    assert_eq!(r.heating.unwrap().gamma_phi, 0.0);
}

#[test]
fn spectral_convention_calibrates_on_amplitude_noise() {
    let op = point(0.0);
    let cfg = EnsembleConfig {
        n_trajectories: 100,
        periods: 256,
        master_seed: 21,
        ..Default::default()
    };
    let cal = calibrate_convention(&op, 1e-9, &cfg).unwrap();
    assert!(cal.z_score().abs() < 3.0, "{cal:?}");
}

#[test]
fn phase_noise_heating_matches_closed_form() {
    let kappa = TAU * 330e3;
    let op = point(kappa / 50.0);
    let cfg = EnsembleConfig {
        n_trajectories: 100,
        periods: 512,
        master_seed: 3,
        ..Default::default()
    };
    let h = run_ensemble(&op, &cfg).unwrap().heating.unwrap();
    let want = phase_noise_heating(&op).unwrap();
    // Monte Carlo error plus an O(S/κ) weak-noise truncation allowance
    let sigma = (h.std_error.powi(2) + (want * op.psd_s / op.kappa).powi(2)).sqrt();
    assert!((h.gamma_phi - want).abs() < 3.0 * sigma, "{} ± {} vs {want}", h.gamma_phi, h.std_error);
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let op = point(1e3);
    let dt = max_cavity_step(&op);
    let noise = phase_trajectory(op.psd_s, dt, 5, 1).unwrap();
    let cav = cavity_sde(&op, &noise).unwrap();
    let rec = drive_record(&op, &noise, &cav).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &noise, &cav, &rec).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "t [s],phi [rad],re_alpha [1],im_alpha [1],xi [rad/s]");
    assert_eq!(lines[1].split(',').count(), 5);
}
