//! Monte Carlo model of the phase-noise channel.
//!
//! A white-noise laser phase φ(t) drives the classical intracavity amplitude
//! α̇_c = −(iΔ + κ/2)α_c + iΛe^{−iφ}, which in turn exerts the torque
//! ξ(t) = 2G Re[e^{iφ}α_c] on the libration. The fluctuation spectrum of ξ
//! at the libration frequency is the phase-noise heating rate.
//!
//! # Seeds
//!
//! Trajectory `k` of an ensemble draws from ChaCha8 seeded with the master
//! seed via `seed_from_u64` and switched to stream `k`. Streams are
//! independent, so trajectories can run in any order or in parallel and the
//! ensemble is bit-reproducible from the master seed alone.
//!
//! # Spectral convention
//!
//! [`welch_psd`] is one-sided: ∫₀^{f_N} S(f) df equals the variance. A drive
//! ξ·x̂ with x̂ = b + b† heats the oscillator at the two-sided spectral
//! density ∫⟨ξ(t)ξ(0)⟩e^{iΩt}dt, i.e. half the one-sided value at f = Ω/2π.
//! [`calibrate_convention`] checks this factor on a zero-phase drive with
//! white amplitude noise, whose spectrum is known in closed form.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::rates::OperatingPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("`{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("time step {dt:e} s exceeds the stability limit {max:e} s")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("grid mismatch: {reason}")]
    GridMismatch { reason: &'static str },
    #[error("record holds {periods:.1} libration periods after the transient, need at least {min}")]
    RecordTooShort { periods: f64, min: f64 },
    #[error("insufficient statistics: {n_records} records, relative standard error {relative_error:.3}")]
    InsufficientStatistics { n_records: usize, relative_error: f64 },
}

fn invalid(field: &'static str, value: f64, reason: &'static str) -> StochasticError {
    StochasticError::InvalidInput { field, value, reason }
}

/// Sampled laser phase, `phi[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseTrajectory {
    pub dt: f64,
    pub phi: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// Classical intracavity amplitude on the same grid as the phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CavityTrajectory {
    pub dt: f64,
    pub alpha: Vec<Complex64>,
}

/// Mechanical drive ξ (rad/s). The first `transient` samples belong to the
/// cavity settling time 10/κ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveRecord {
    pub dt: f64,
    pub xi: Vec<f64>,
    pub transient: usize,
}

/// RNG for trajectory `stream` of the ensemble with `master` seed.
pub fn trajectory_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Random-walk phase with increments N(0, S·dt); `n_steps + 1` samples.
pub fn phase_trajectory(psd_s: f64, dt: f64, n_steps: usize, seed: u64) -> Result<NoiseTrajectory, StochasticError> {
    phase_trajectory_stream(psd_s, dt, n_steps, seed, 0)
}

pub fn phase_trajectory_stream(
    psd_s: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<NoiseTrajectory, StochasticError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", dt, "must be finite and > 0"));
    }
    if !(psd_s >= 0.0) || !psd_s.is_finite() {
        return Err(invalid("psd_s", psd_s, "must be finite and >= 0"));
    }
    let mut phi = Vec::with_capacity(n_steps + 1);
    phi.push(0.0);
    if psd_s == 0.0 {
        phi.resize(n_steps + 1, 0.0);
    } else {
        let normal = Normal::new(0.0, (psd_s * dt).sqrt()).expect("finite positive std");
        let mut rng = trajectory_rng(seed, stream);
        let mut acc = 0.0;
        for _ in 0..n_steps {
            acc += normal.sample(&mut rng);
            phi.push(acc);
        }
    }
    Ok(NoiseTrajectory { dt, phi, seed, stream })
}

/// Largest step the cavity integrator accepts: 0.05·min(2π/|Δ|, 2/κ).
pub fn max_cavity_step(op: &OperatingPoint<f64>) -> f64 {
    let rot = if op.detuning == 0.0 { f64::INFINITY } else { std::f64::consts::TAU / op.detuning.abs() };
    0.05 * rot.min(2.0 / op.kappa)
}

/// Deterministic fixed point iΛ/(iΔ + κ/2).
pub fn cavity_fixed_point(op: &OperatingPoint<f64>) -> Complex64 {
    Complex64::new(0.0, op.drive_lambda) / Complex64::new(op.kappa / 2.0, op.detuning)
}

/// Integrates the cavity amplitude from the deterministic fixed point.
pub fn cavity_sde(op: &OperatingPoint<f64>, noise: &NoiseTrajectory) -> Result<CavityTrajectory, StochasticError> {
    cavity_sde_from(op, noise, cavity_fixed_point(op))
}

/// Exact exponential step with the phase held at φ_k:
/// α_{k+1} = e^{−a dt} α_k + iΛ e^{−iφ_k} (1 − e^{−a dt}) / a, a = iΔ + κ/2.
pub fn cavity_sde_from(
    op: &OperatingPoint<f64>,
    noise: &NoiseTrajectory,
    alpha0: Complex64,
) -> Result<CavityTrajectory, StochasticError> {
    let phi = &noise.phi;
    integrate_cavity(op, noise.dt, phi.len(), alpha0, |k| Complex64::from_polar(1.0, -phi[k]))
}

/// Zero-phase cavity driven by Λ(1 + m_k), used to calibrate the spectral
/// convention. `modulation` has one entry per step; the output has one more.
pub fn cavity_with_amplitude_modulation(
    op: &OperatingPoint<f64>,
    dt: f64,
    modulation: &[f64],
) -> Result<CavityTrajectory, StochasticError> {
    integrate_cavity(op, dt, modulation.len() + 1, cavity_fixed_point(op), |k| {
        Complex64::new(1.0 + modulation[k], 0.0)
    })
}

fn integrate_cavity(
    op: &OperatingPoint<f64>,
    dt: f64,
    len: usize,
    alpha0: Complex64,
    drive: impl Fn(usize) -> Complex64,
) -> Result<CavityTrajectory, StochasticError> {
    op.validate().map_err(|_| invalid("operating_point", f64::NAN, "non-finite or negative field"))?;
    let max = max_cavity_step(op);
    if !(dt > 0.0) {
        return Err(invalid("dt", dt, "must be > 0"));
    }
    if dt > max {
        return Err(StochasticError::StepTooCoarse { dt, max });
    }
    let a = Complex64::new(op.kappa / 2.0, op.detuning);
    let decay = (-a * dt).exp();
    let gain = Complex64::new(0.0, op.drive_lambda) * (1.0 - decay) / a;
    let mut alpha = Vec::with_capacity(len);
    if len == 0 {
        return Ok(CavityTrajectory { dt, alpha });
    }
    let mut x = alpha0;
    alpha.push(x);
    for k in 0..len - 1 {
        x = decay * x + gain * drive(k);
        alpha.push(x);
    }
    Ok(CavityTrajectory { dt, alpha })
}

/// Number of samples in the 10/κ settling time.
pub fn transient_samples(kappa: f64, dt: f64) -> usize {
    (10.0 / (kappa * dt)).ceil() as usize
}

/// ξ_k = 2G Re[e^{iφ_k} α_k].
pub fn drive_record(
    op: &OperatingPoint<f64>,
    noise: &NoiseTrajectory,
    cav: &CavityTrajectory,
) -> Result<DriveRecord, StochasticError> {
    if noise.phi.len() != cav.alpha.len() {
        return Err(StochasticError::GridMismatch {
            reason: "phase and cavity trajectories differ in length",
        });
    }
    if noise.dt != cav.dt {
        return Err(StochasticError::GridMismatch {
            reason: "phase and cavity trajectories differ in time step",
        });
    }
    let g2 = 2.0 * op.coupling_g;
    let xi = noise
        .phi
        .iter()
        .zip(&cav.alpha)
        .map(|(&p, &a)| g2 * (Complex64::from_polar(1.0, p) * a).re)
        .collect();
    Ok(DriveRecord {
        dt: cav.dt,
        xi,
        transient: transient_samples(op.kappa, cav.dt),
    })
}

/// ξ for a zero-phase cavity trajectory.
pub fn drive_record_zero_phase(op: &OperatingPoint<f64>, cav: &CavityTrajectory) -> DriveRecord {
    let g2 = 2.0 * op.coupling_g;
    DriveRecord {
        dt: cav.dt,
        xi: cav.alpha.iter().map(|a| g2 * a.re).collect(),
        transient: transient_samples(op.kappa, cav.dt),
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / n as f64).cos()))
        .collect()
}

fn segment_starts(len: usize, seg: usize) -> impl Iterator<Item = usize> {
    let hop = (seg / 2).max(1);
    let count = if len >= seg { (len - seg) / hop + 1 } else { 0 };
    (0..count).map(move |k| k * hop)
}

/// One-sided Welch spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd {
    /// Hz.
    pub freq: Vec<f64>,
    /// Per Hz.
    pub psd: Vec<f64>,
}

/// Welch estimate with a Hann window and 50 % overlap, mean removed per
/// segment. Normalized so the integral over [0, 1/(2dt)] is the variance.
pub fn welch_psd(x: &[f64], dt: f64, segment_len: usize) -> Result<Psd, StochasticError> {
    if segment_len < 2 || segment_len > x.len() {
        return Err(invalid("segment_len", segment_len as f64, "must be in [2, record length]"));
    }
    let w = hann(segment_len);
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let nbins = segment_len / 2 + 1;
    let mut acc = vec![0.0; nbins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    for start in segment_starts(x.len(), segment_len) {
        let seg = &x[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for (b, (v, wv)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
            *b = Complex64::new((v - mean) * wv, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
    }
    let scale = dt / (wss * count as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (segment_len % 2 == 0 && k == segment_len / 2) { 1.0 } else { 2.0 };
            one_sided * a * scale
        })
        .collect();
    let freq = (0..nbins).map(|k| k as f64 / (segment_len as f64 * dt)).collect();
    Ok(Psd { freq, psd })
}

/// The [`welch_psd`] estimator evaluated at an arbitrary frequency `f` (Hz)
/// by a direct windowed DFT, so `f` need not fall on an FFT bin.
pub fn welch_at(x: &[f64], dt: f64, segment_len: usize, f: f64) -> Result<f64, StochasticError> {
    if segment_len < 2 || segment_len > x.len() {
        return Err(invalid("segment_len", segment_len as f64, "must be in [2, record length]"));
    }
    let w = hann(segment_len);
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let theta = -std::f64::consts::TAU * f * dt;
    let kernel: Vec<Complex64> = w
        .iter()
        .enumerate()
        .map(|(n, wv)| Complex64::from_polar(*wv, theta * n as f64))
        .collect();
    let mut acc = 0.0;
    let mut count = 0usize;
    for start in segment_starts(x.len(), segment_len) {
        let seg = &x[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        let s: Complex64 = seg.iter().zip(&kernel).map(|(v, k)| k * (v - mean)).sum();
        acc += s.norm_sqr();
        count += 1;
    }
    Ok(2.0 * acc * dt / (wss * count as f64))
}

/// Minimum number of drive records for [`heating_rate_from_drive`].
pub const MIN_RECORDS: usize = 100;
/// Minimum record length after the transient, in libration periods.
pub const MIN_PERIODS: f64 = 50.0;
/// Welch segment length in libration periods (reduced for shorter records,
/// never below 16).
pub const SEGMENT_PERIODS: usize = 128;
const MIN_SEGMENT_PERIODS: usize = 16;
/// Largest accepted relative standard error of the ensemble estimate.
pub const MAX_RELATIVE_ERROR: f64 = 0.2;

/// Ensemble estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// Heating rate Γ_φ (rad/s) inferred from drive records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatingEstimate {
    pub gamma_phi: f64,
    pub std_error: f64,
    pub n_records: usize,
    pub segment_periods: usize,
}

fn record_heating(record: &DriveRecord, omega_alpha: f64) -> Result<(f64, usize, f64), StochasticError> {
    let x = record.xi.get(record.transient..).unwrap_or(&[]);
    let period = std::f64::consts::TAU / omega_alpha;
    let periods = x.len() as f64 * record.dt / period;
    if periods < MIN_PERIODS {
        return Err(StochasticError::RecordTooShort {
            periods,
            min: MIN_PERIODS,
        });
    }
    let seg_periods = (periods.floor() as usize).clamp(MIN_SEGMENT_PERIODS, SEGMENT_PERIODS);
    let seg = ((seg_periods as f64 * period / record.dt).round() as usize).min(x.len());
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let spread = x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let s = welch_at(x, record.dt, seg, omega_alpha / std::f64::consts::TAU)?;
    Ok((s / 2.0, seg_periods, spread / mean.abs().max(f64::MIN_POSITIVE)))
}

/// Γ_φ from the ensemble-averaged Welch spectrum of ξ at Ω_α.
///
/// Each record must hold at least [`MIN_PERIODS`] libration periods after
/// its transient. Records without fluctuations beyond rounding (zero phase
/// noise) give exactly 0.
pub fn heating_rate_from_drive(records: &[DriveRecord], omega_alpha: f64) -> Result<HeatingEstimate, StochasticError> {
    if !(omega_alpha > 0.0) || !omega_alpha.is_finite() {
        return Err(invalid("omega_alpha", omega_alpha, "must be finite and > 0"));
    }
    if records.len() < MIN_RECORDS {
        return Err(StochasticError::InsufficientStatistics {
            n_records: records.len(),
            relative_error: f64::INFINITY,
        });
    }
    let per: Vec<(f64, usize, f64)> = records
        .par_iter()
        .map(|r| record_heating(r, omega_alpha))
        .collect::<Result<_, _>>()?;
    summarize(&per)
}

fn summarize(per: &[(f64, usize, f64)]) -> Result<HeatingEstimate, StochasticError> {
    let segment_periods = per.iter().map(|p| p.1).min().unwrap_or(0);
    // relative spread at rounding level: the drive is deterministic
    if per.iter().all(|p| p.2 < 1e-12) {
        return Ok(HeatingEstimate {
            gamma_phi: 0.0,
            std_error: 0.0,
            n_records: per.len(),
            segment_periods,
        });
    }
    let values: Vec<f64> = per.iter().map(|p| p.0).collect();
    let est = MeanEstimate::from_samples(&values);
    let rel = est.std_error / est.mean.abs();
    if !(rel <= MAX_RELATIVE_ERROR) {
        return Err(StochasticError::InsufficientStatistics {
            n_records: per.len(),
            relative_error: rel,
        });
    }
    Ok(HeatingEstimate {
        gamma_phi: est.mean,
        std_error: est.std_error,
        n_records: per.len(),
        segment_periods,
    })
}

/// Ensemble settings. The time step is `2π/(Ω_α·steps_per_period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    /// Record length after the 10/κ transient.
    pub periods: usize,
    pub steps_per_period: usize,
    pub master_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 200,
            periods: 1024,
            steps_per_period: 24,
            master_seed: 1,
        }
    }
}

impl EnsembleConfig {
    pub fn dt(&self, omega_alpha: f64) -> f64 {
        std::f64::consts::TAU / (omega_alpha * self.steps_per_period as f64)
    }

    /// Steps per trajectory including the transient.
    pub fn n_steps(&self, op: &OperatingPoint<f64>) -> usize {
        let dt = self.dt(op.omega_alpha);
        transient_samples(op.kappa, dt) + self.periods * self.steps_per_period
    }
}

/// Ensemble statistics of the phase-noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub dt: f64,
    /// ⟨|α_c|²⟩ across trajectories at the final time.
    pub ncav_ensemble: MeanEstimate,
    /// Per-trajectory time averages of |α_c|² after the transient.
    pub ncav_time_average: MeanEstimate,
    /// Per-trajectory time averages of ξ after the transient.
    pub xi_mean: MeanEstimate,
    pub heating: Option<HeatingEstimate>,
}

/// Runs `cfg.n_trajectories` independent trajectories in parallel.
/// The heating estimate is present when the ensemble meets the
/// [`heating_rate_from_drive`] requirements.
pub fn run_ensemble(op: &OperatingPoint<f64>, cfg: &EnsembleConfig) -> Result<EnsembleResult, StochasticError> {
    if cfg.n_trajectories < 2 {
        return Err(invalid("n_trajectories", cfg.n_trajectories as f64, "must be >= 2"));
    }
    let dt = cfg.dt(op.omega_alpha);
    let n_steps = cfg.n_steps(op);
    let per: Vec<(f64, f64, f64, Option<(f64, usize, f64)>)> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|k| {
            let noise = phase_trajectory_stream(op.psd_s, dt, n_steps, cfg.master_seed, k)?;
            let cav = cavity_sde(op, &noise)?;
            let rec = drive_record(op, &noise, &cav)?;
            let tail = &cav.alpha[rec.transient..];
            let snap = cav.alpha.last().map(|a| a.norm_sqr()).unwrap_or(0.0);
            let avg = tail.iter().map(|a| a.norm_sqr()).sum::<f64>() / tail.len() as f64;
            let xi_tail = &rec.xi[rec.transient..];
            let xi_avg = xi_tail.iter().sum::<f64>() / xi_tail.len() as f64;
            let heat = record_heating(&rec, op.omega_alpha).ok();
            Ok((snap, avg, xi_avg, heat))
        })
        .collect::<Result<_, StochasticError>>()?;
    let col = |f: fn(&(f64, f64, f64, Option<(f64, usize, f64)>)) -> f64| -> Vec<f64> { per.iter().map(f).collect() };
    let heating = if per.len() >= MIN_RECORDS && per.iter().all(|p| p.3.is_some()) {
        let h: Vec<(f64, usize, f64)> = per.iter().map(|p| p.3.unwrap()).collect();
        Some(summarize(&h)?)
    } else {
        None
    };
    Ok(EnsembleResult {
        dt,
        ncav_ensemble: MeanEstimate::from_samples(&col(|p| p.0)),
        ncav_time_average: MeanEstimate::from_samples(&col(|p| p.1)),
        xi_mean: MeanEstimate::from_samples(&col(|p| p.2)),
        heating,
    })
}

/// Result of the spectral-convention check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// [`heating_rate_from_drive`] on the amplitude-noise records.
    pub estimated: HeatingEstimate,
    /// Closed-form two-sided spectral density of ξ at Ω_α.
    pub analytic: f64,
}

impl Calibration {
    /// Deviation of the estimate from the closed form in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.estimated.gamma_phi - self.analytic) / self.estimated.std_error
    }
}

/// Two-sided spectral density of ξ at Ω_α for a zero-phase cavity driven by
/// Λ(1 + η), η white with ⟨η(t)η(s)⟩ = s_a δ(t − s).
///
/// Re δα_c responds to η with kernel Λ e^{−κτ/2} sin(Δτ), whose transfer
/// function at ω is (Λ/2i)[1/(κ/2 − i(Δ + ω)) − 1/(κ/2 + i(Δ − ω))].
pub fn amplitude_noise_heating(op: &OperatingPoint<f64>, s_a: f64) -> f64 {
    let hk = op.kappa / 2.0;
    let w = op.omega_alpha;
    let h = (Complex64::new(hk, -(op.detuning + w)).inv() - Complex64::new(hk, op.detuning - w).inv())
        * Complex64::new(0.0, -op.drive_lambda / 2.0);
    4.0 * op.coupling_g * op.coupling_g * s_a * h.norm_sqr()
}

/// Runs the zero-phase amplitude-noise drive through the same record and
/// spectral pipeline as the phase-noise ensemble.
pub fn calibrate_convention(op: &OperatingPoint<f64>, s_a: f64, cfg: &EnsembleConfig) -> Result<Calibration, StochasticError> {
    if !(s_a > 0.0) || !s_a.is_finite() {
        return Err(invalid("s_a", s_a, "must be finite and > 0"));
    }
    let dt = cfg.dt(op.omega_alpha);
    let n_steps = cfg.n_steps(op);
    let normal = Normal::new(0.0, (s_a / dt).sqrt()).expect("finite positive std");
    let records: Vec<DriveRecord> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(cfg.master_seed, k);
            let m: Vec<f64> = (0..n_steps).map(|_| normal.sample(&mut rng)).collect();
            let cav = cavity_with_amplitude_modulation(op, dt, &m)?;
            Ok(drive_record_zero_phase(op, &cav))
        })
        .collect::<Result<_, StochasticError>>()?;
    Ok(Calibration {
        estimated: heating_rate_from_drive(&records, op.omega_alpha)?,
        analytic: amplitude_noise_heating(op, s_a),
    })
}

/// Writes `t, φ, Re α, Im α, ξ` as CSV.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    noise: &NoiseTrajectory,
    cav: &CavityTrajectory,
    drive: &DriveRecord,
) -> std::io::Result<()> {
    if noise.phi.len() != cav.alpha.len() || cav.alpha.len() != drive.xi.len() {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "trajectory lengths differ"));
    }
    writeln!(w, "t [s],phi [rad],re_alpha [1],im_alpha [1],xi [rad/s]")?;
    for k in 0..noise.phi.len() {
        writeln!(
            w,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            k as f64 * noise.dt,
            noise.phi[k],
            cav.alpha[k].re,
            cav.alpha[k].im,
            drive.xi[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_integrates_to_variance() {
        let mut rng = trajectory_rng(5, 0);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let x: Vec<f64> = (0..1 << 14).map(|_| normal.sample(&mut rng)).collect();
        let dt = 1e-3;
        let p = welch_psd(&x, dt, 512).unwrap();
        let df = p.freq[1] - p.freq[0];
        let integral: f64 = p.psd.iter().sum::<f64>() * df;
        assert!((integral - 4.0).abs() < 0.1, "{integral}");
    }

    #[test]
    fn welch_at_matches_fft_bins() {
        let x: Vec<f64> = (0..4096).map(|k| ((k as f64) * 0.37).sin() + 0.3 * ((k * k % 17) as f64)).collect();
        let p = welch_psd(&x, 0.5, 256).unwrap();
        for k in [1, 7, 50, 127] {
            let v = welch_at(&x, 0.5, 256, p.freq[k]).unwrap();
            assert!((v - p.psd[k]).abs() <= 1e-9 * p.psd[k].abs().max(1e-12), "bin {k}");
        }
    }

    #[test]
    fn sinusoid_power_lands_on_its_bin() {
        // amplitude A gives variance A²/2, concentrated near f0
        let dt = 1.0 / 64.0;
        let f0 = 4.0;
        let x: Vec<f64> = (0..8192).map(|k| 3.0 * (std::f64::consts::TAU * f0 * k as f64 * dt).cos()).collect();
        let p = welch_psd(&x, dt, 256).unwrap();
        let df = p.freq[1];
        let k0 = (f0 / df).round() as usize;
        let near: f64 = p.psd[k0 - 2..=k0 + 2].iter().sum::<f64>() * df;
        assert!((near - 4.5).abs() < 1e-6 * 4.5);
    }

    #[test]
    fn segments_cover_record() {
        let starts: Vec<usize> = segment_starts(10, 4).collect();
        assert_eq!(starts, vec![0, 2, 4, 6]);
        assert_eq!(segment_starts(3, 4).count(), 0);
    }
}
