use std::f64::consts::TAU;

use libration::lindblad::{
    build_reduced, build_two_mode, emission_spectrum, evolve, evolve_with_budget, steady_state, steady_state_converged,
    DensityMatrix, FockSpace, LindbladError, Liouvillian, Sideband,
};
use libration::rates::steady_state_occupation;
use libration::{OperatingPoint, RateSet};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn khz(f: f64) -> f64 {
    TAU * f * 1e3
}

fn op(g: f64, gamma_ba: f64) -> OperatingPoint {
    OperatingPoint {
        omega_alpha: khz(1100.0),
        kappa: khz(330.0),
        detuning: khz(1100.0),
        coupling_g: g,
        recoil_gamma_ba: gamma_ba,
        psd_s: 0.0,
        drive_lambda: 0.0,
    }
}

fn reduced_rates(a_plus: f64, a_minus: f64, gamma: f64) -> RateSet {
    let mut r = steady_state_occupation(&op(khz(10.0), 0.0)).unwrap();
    r.a_plus = a_plus;
    r.a_minus = a_minus;
    r.recoil_gamma_ba = gamma;
    r.gamma_phi = 0.0;
    r
}

fn random_density(space: FockSpace, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let n = space.dim();
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(space, m / tr).unwrap()
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn uncoupled_two_mode_has_free_libration() {
    let space = FockSpace::new(2, 4).unwrap();
    let l = build_two_mode(&op(0.0, 0.0), space, 0.0).unwrap();
    assert!(matches!(steady_state(&l), Err(LindbladError::NonUniqueSteadyState { .. })));

    // the decaying cavity still empties: vacuum ⊗ vacuum is reached from |0⟩⊗|3⟩
    let rho0 = DensityMatrix::fock(space, 0, 3).unwrap();
    let t_end = 30.0 / khz(330.0);
    let out = evolve(&l, &rho0, &[0.0, t_end]).unwrap();
    let last = out.last().unwrap();
    let vac = space.index(0, 0);
    assert!((last.matrix()[(vac, vac)].re - 1.0).abs() < 1e-9);
    assert!(last.n_cav() < 1e-9 && last.n_lib() < 1e-12);
}

#[test]
fn two_mode_steady_state_matches_rate_balance() {
    let op = op(khz(10.0), khz(0.5));
    let rates = steady_state_occupation(&op).unwrap();
    let l = build_two_mode(&op, FockSpace::new(14, 4).unwrap(), 0.0).unwrap();
    let rho = steady_state(&l).unwrap();
    rho.validate().unwrap();
    let rel = (rho.n_lib() - rates.n_exact).abs() / rates.n_exact;
    assert!(rel < 0.05, "two-mode {} vs rate balance {}", rho.n_lib(), rates.n_exact);
}

#[test]
fn two_mode_needs_a_cavity() {
    let space = FockSpace::new(8, 1).unwrap();
    assert!(matches!(
        build_two_mode(&op(1.0, 0.0), space, 0.0),
        Err(LindbladError::CutoffTooSmall { field: "n_cav", .. })
    ));
    let mut bad = op(1.0, 0.0);
    bad.kappa = f64::NAN;
    assert!(matches!(
        build_two_mode(&bad, FockSpace::new(4, 2).unwrap(), 0.0),
        Err(LindbladError::InvalidInput { .. })
    ));
}

#[test]
fn generator_preserves_hermiticity_and_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let space = FockSpace::new(6, 3).unwrap();
    let l = build_two_mode(&op(khz(30.0), khz(2.0)), space, khz(5.0)).unwrap();
    let scale = l.norm_inf();
    assert!(l.trace_preservation_error() < 1e-10 * scale);
    for _ in 0..5 {
        let rho = random_density(space, &mut rng);
        let d = l.apply(&rho).unwrap();
        assert!(max_abs(&(&d - d.adjoint())) < 1e-12 * scale);
        assert!(d.trace().norm() < 1e-10 * scale);
    }
}

#[test]
fn reduced_ground_state_without_heating() {
    let l = build_reduced(&reduced_rates(0.0, 1e3, 0.0), khz(1100.0), FockSpace::new(10, 1).unwrap()).unwrap();
    let rho = steady_state(&l).unwrap();
    assert!(rho.n_lib() < 1e-12);
    assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
}

#[test]
fn reduced_steady_state_matches_detailed_balance() {
    // (A₊, A₋, Γ) in rad/s
    for &(ap, am, g) in &[(10.0, 1000.0, 50.0), (0.0, 2000.0, 300.0), (200.0, 900.0, 40.0)] {
        let rates = reduced_rates(ap, am, g);
        let n_closed = (g + ap) / (am - ap);
        let mut n_lib = 10;
        let rho = loop {
            let l = build_reduced(&rates, khz(1100.0), FockSpace::new(n_lib, 1).unwrap()).unwrap();
            let rho = steady_state(&l).unwrap();
            if rho.top_libration_population() < 1e-8 {
                break rho;
            }
            n_lib += 4;
        };
        let rel = (rho.n_lib() - n_closed).abs() / n_closed;
        assert!(rel < 1e-6, "N_b={n_lib}: {} vs {n_closed}", rho.n_lib());
    }
}

#[test]
fn reduced_heating_has_no_steady_state() {
    let l = build_reduced(&reduced_rates(2.0, 1.0, 0.0), khz(1100.0), FockSpace::new(10, 1).unwrap()).unwrap();
    assert!(matches!(steady_state(&l), Err(LindbladError::NoNormalizableSteadyState { .. })));
    assert!(build_reduced(&reduced_rates(-1.0, 1.0, 0.0), 1.0, FockSpace::new(10, 1).unwrap()).is_err());
    assert!(build_reduced(&reduced_rates(0.0, 1.0, 0.0), 1.0, FockSpace::new(10, 2).unwrap()).is_err());
}

#[test]
fn decaying_cavity_relaxes_to_vacuum() {
    let space = FockSpace::new(6, 1).unwrap();
    let c = space.b();
    let h = c.adjoint() * &c * Complex64::new(3.0, 0.0);
    let l = Liouvillian::from_operators(space, &h, &[(2.0, c)], &[]).unwrap();
    let rho = steady_state(&l).unwrap();
    let mut vac = DMatrix::zeros(6, 6);
    vac[(0, 0)] = Complex64::new(1.0, 0.0);
    assert!(max_abs(&(rho.matrix() - vac)) < 1e-12);
}

#[test]
fn detailed_balance_thermal_state() {
    let l = build_reduced(&reduced_rates(500.0, 1000.0, 0.0), khz(1100.0), FockSpace::new(48, 1).unwrap()).unwrap();
    let rho = steady_state(&l).unwrap();
    assert!((rho.n_lib() - 1.0).abs() < 1e-6);
    // thermal: P(k) = 2^{-(k+1)} and no coherences
    let p = rho.libration_populations();
    for (k, pk) in p.iter().take(10).enumerate() {
        assert!((pk - 0.5f64.powi(k as i32 + 1)).abs() < 1e-9);
    }
    let off: f64 = (0..48).flat_map(|i| (0..48).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| rho.matrix()[(i, j)].norm()).fold(0.0, f64::max);
    assert!(off < 1e-12);
}

#[test]
fn zero_generator_is_identity_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let space = FockSpace::new(4, 2).unwrap();
    let l = Liouvillian::from_operators(space, &DMatrix::zeros(8, 8), &[], &[]).unwrap();
    let rho0 = random_density(space, &mut rng);
    let out = evolve(&l, &rho0, &[0.0, 1.0, 5.0]).unwrap();
    assert_eq!(out.len(), 3);
    for r in &out {
        assert_eq!(r.matrix(), rho0.matrix());
    }
}

#[test]
fn fock_state_amplitude_damping() {
    let a_minus = 2.0e3;
    let space = FockSpace::new(8, 1).unwrap();
    let l = build_reduced(&reduced_rates(0.0, a_minus, 0.0), khz(20.0), space).unwrap();
    let rho0 = DensityMatrix::fock(space, 3, 0).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 2e-4).collect();
    let out = evolve(&l, &rho0, &grid).unwrap();
    for (t, r) in grid.iter().zip(&out) {
        let want = 3.0 * (-a_minus * t).exp();
        assert!((r.n_lib() - want).abs() < 1e-8, "t={t}: {} vs {want}", r.n_lib());
        assert!((r.trace().re - 1.0).abs() < 1e-8);
    }
}

#[test]
fn evolution_relaxes_to_steady_state() {
    let rates = reduced_rates(100.0, 1100.0, 200.0);
    let gamma = 1000.0;
    let space = FockSpace::new(16, 1).unwrap();
    let l = build_reduced(&rates, khz(10.0), space).unwrap();
    let target = steady_state(&l).unwrap().n_lib();
    // occupation offset 0.01 decays to 0.01·e^{-10} < 1e-6
    let rho0 = DensityMatrix::thermal_libration(space, target + 0.01).unwrap();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5 / gamma).collect();
    let out = evolve(&l, &rho0, &grid).unwrap();
    for r in &out {
        assert!(r.min_eigenvalue() >= -1e-6);
        assert!((r.trace().re - 1.0).abs() < 1e-8);
    }
    assert!((out.last().unwrap().n_lib() - target).abs() < 1e-6);
}

#[test]
fn evolve_rejects_bad_grids_and_budgets() {
    let space = FockSpace::new(4, 1).unwrap();
    let l = build_reduced(&reduced_rates(0.0, 10.0, 0.0), khz(1100.0), space).unwrap();
    let rho0 = DensityMatrix::fock(space, 1, 0).unwrap();
    assert!(matches!(evolve(&l, &rho0, &[0.0, 0.0]), Err(LindbladError::InvalidInput { .. })));
    assert!(matches!(
        evolve_with_budget(&l, &rho0, &[0.0, 1.0], 1000),
        Err(LindbladError::StepUnderflow { .. })
    ));
}

fn fwhm(omega: &[f64], s: &[f64]) -> f64 {
    let (imax, smax) = s.iter().enumerate().fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let half = smax / 2.0;
    let cross = |range: Box<dyn Iterator<Item = usize>>, step: isize| -> f64 {
        for i in range {
            let j = (i as isize + step) as usize;
            if s[j] < half {
                let t = (s[i] - half) / (s[i] - s[j]);
                return omega[i] + t * (omega[j] - omega[i]);
            }
        }
        panic!("no half-maximum crossing")
    };
    cross(Box::new(imax..s.len() - 1), 1) - cross(Box::new((1..=imax).rev()), -1)
}

fn sideband_grid(center: f64, width: f64) -> Vec<f64> {
    let n = 4001;
    (0..n).map(|k| center + width * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).collect()
}

#[test]
fn thermal_sideband_ratio_and_linewidth() {
    let omega = khz(100.0);
    let (ap, am) = (500.0, 1000.0);
    let l = build_reduced(&reduced_rates(ap, am, 0.0), omega, FockSpace::new(40, 1).unwrap()).unwrap();
    let gamma = am - ap;
    let anti = emission_spectrum(&l, Sideband::AntiStokes, &sideband_grid(omega, 400.0 * gamma)).unwrap();
    let stokes = emission_spectrum(&l, Sideband::Stokes, &sideband_grid(-omega, 400.0 * gamma)).unwrap();
    assert!(anti.density.iter().chain(&stokes.density).all(|&v| v >= -1e-12));
    let ratio = anti.area() / stokes.area();
    assert!((ratio - 0.5).abs() < 0.02 * 0.5, "ratio {ratio}");
    // areas are n and n + 1 up to the Lorentzian tails outside the grid
    assert!((anti.area() - 1.0).abs() < 0.01);
    assert!((anti.area() + stokes.area() - 3.0).abs() < 0.03);
    for s in [&anti, &stokes] {
        let w = fwhm(&s.omega, &s.density);
        assert!((w - gamma).abs() < 0.05 * gamma, "{:?} width {w} vs {gamma}", s.which);
    }
}

#[test]
fn ground_state_has_no_anti_stokes_emission() {
    let omega = khz(100.0);
    let l = build_reduced(&reduced_rates(0.0, 1000.0, 0.0), omega, FockSpace::new(8, 1).unwrap()).unwrap();
    let anti = emission_spectrum(&l, Sideband::AntiStokes, &sideband_grid(omega, 1e5)).unwrap();
    let stokes = emission_spectrum(&l, Sideband::Stokes, &sideband_grid(-omega, 1e5)).unwrap();
    assert!(anti.area().abs() < 1e-6 * stokes.area());
}

#[test]
fn cutoff_escalation_converges() {
    let op = op(khz(10.0), khz(0.5));
    let conv = steady_state_converged(|s| build_two_mode(&op, s, 0.0), FockSpace::new(6, 4).unwrap(), 1e-4).unwrap();
    assert!(conv.relative_change < 1e-4);
    assert!(conv.space.n_lib() >= 6 && conv.space.n_lib() % 4 == 2);
    let rates = steady_state_occupation(&op).unwrap();
    assert!((conv.n_lib - rates.n_exact).abs() / rates.n_exact < 0.05);
}

#[test]
fn cutoff_escalation_reports_unconverged() {
    // n = 20 needs far more than 16 levels
    let rates = reduced_rates(0.0, 100.0, 2000.0);
    let r = steady_state_converged(
        |s| build_reduced(&rates, khz(10.0), s),
        FockSpace::with_max_dim(8, 1, 16).unwrap(),
        1e-4,
    );
    assert!(matches!(r, Err(LindbladError::Unconverged { .. })));
}

#[test]
fn adiabatic_elimination_agrees_to_order_g_over_kappa() {
    let kappa = khz(330.0);
    for ratio in [0.01, 0.03, 0.1] {
        let g = ratio * kappa;
        let a_minus = 4.0 * g * g / kappa;
        let op = op(g, 0.3 * a_minus);
        let two = steady_state_converged(|s| build_two_mode(&op, s, 0.0), FockSpace::new(14, 4).unwrap(), 1e-4).unwrap();
        let rates = steady_state_occupation(&op).unwrap();
        let red = steady_state_converged(
            |s| build_reduced(&rates, op.omega_alpha, s),
            FockSpace::new(14, 1).unwrap(),
            1e-4,
        )
        .unwrap();
        let rel = (two.n_lib - red.n_lib).abs() / red.n_lib;
        assert!(rel <= 4.0 * ratio, "G/κ={ratio}: two-mode {} reduced {}", two.n_lib, red.n_lib);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_preserved_for_random_generators(
        g in 0.0..5e4f64,
        gamma in 0.0..1e4f64,
        detuning in -1e7..1e7f64,
        xi in -1e4..1e4f64,
        seed in any::<u64>(),
    ) {
        let mut o = op(g, gamma);
        o.detuning = detuning;
        let space = FockSpace::new(5, 3).unwrap();
        let l = build_two_mode(&o, space, xi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(space, &mut rng);
        let d = l.apply(&rho).unwrap();
        prop_assert!(d.trace().norm() <= 1e-10 * l.norm_inf());
    }

    #[test]
    fn evolution_keeps_positivity(
        ap in 0.0..500.0f64,
        am in 600.0..3000.0f64,
        gamma in 0.0..500.0f64,
        seed in any::<u64>(),
    ) {
        let space = FockSpace::new(8, 1).unwrap();
        let l = build_reduced(&reduced_rates(ap, am, gamma), 2e4, space).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = random_density(space, &mut rng);
        let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 2.5e-4).collect();
        for r in evolve(&l, &rho0, &grid).unwrap() {
            prop_assert!(r.min_eigenvalue() >= -1e-6);
            prop_assert!((r.trace().re - 1.0).abs() <= 1e-8);
        }
    }
}
