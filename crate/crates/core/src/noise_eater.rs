//! Laser phase-noise cancellation loop.
//!
//! A delayed self-homodyne interferometer R(Ω) = 1 − e^{−iτΩ} detects the
//! phase noise, an I/Q band-pass controller
//! H(Ω) = g e^{−iΩτ_IQ} γ_IQ Ω / (Ω_IQ² − Ω² + iγ_IQ Ω) shapes it and a phase
//! modulator M(Ω) feeds it back. The closed-loop phase-noise spectrum is
//! S^fb(Ω) = S(Ω)/|1 + M R H|².

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::rates::{steady_state_occupation, OperatingPoint, RateError};
use crate::scalar::Real;

/// Group index of standard single-mode fiber near 1550 nm.
pub const FIBER_INDEX: f64 = 1.468;
/// Length of the interferometer delay line, m.
pub const FIBER_LENGTH: f64 = 80.0;
/// Open-loop |M R| at Ω_IQ of the default modulator; g = 1 then gives 20 dB.
pub const DEFAULT_LOOP_MAGNITUDE: f64 = 9.0;
/// Default controller bandwidth γ_IQ, rad/s.
pub const DEFAULT_GAMMA_IQ: f64 = std::f64::consts::TAU * 4e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseEaterError {
    #[error("`{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("interferometer is blind at the I/Q center frequency (|R| = {magnitude})")]
    BlindInterferometer { magnitude: f64 },
    #[error(transparent)]
    Rates(#[from] RateError),
}

fn invalid<T: Real>(field: &'static str, value: T, reason: &'static str) -> NoiseEaterError {
    NoiseEaterError::InvalidInput {
        field,
        value: value.to_f64_lossy(),
        reason,
    }
}

/// Delay τ = n L / c of a fiber of the given length and group index.
pub fn fiber_delay<T: Real>(length: T, index: T) -> T {
    index * length / T::lit(299_792_458.0)
}

/// Default interferometer delay: 80 m of fiber at n = 1.468.
pub fn default_fiber_delay<T: Real>() -> T {
    fiber_delay(T::lit(FIBER_LENGTH), T::lit(FIBER_INDEX))
}

/// Phase-modulator transfer function.
#[derive(Clone)]
pub enum Modulator<T> {
    Constant(Complex<T>),
    Function(Arc<dyn Fn(T) -> Complex<T> + Send + Sync>),
}

impl<T: Real> Modulator<T> {
    pub fn at(&self, omega: T) -> Complex<T> {
        match self {
            Modulator::Constant(m) => *m,
            Modulator::Function(f) => f(omega),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Modulator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulator::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Modulator::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackParams<T> {
    /// Interferometer delay, s.
    pub tau: T,
    pub gain_g: T,
    /// rad/s
    pub gamma_iq: T,
    /// rad/s
    pub omega_iq: T,
    /// Controller delay, s.
    pub tau_iq: T,
    pub modulator: Modulator<T>,
}

impl<T: Real> FeedbackParams<T> {
    /// Loop with the default modulator and the controller delay that makes
    /// M R H real and positive at Ω_IQ.
    pub fn new(tau: T, gain_g: T, gamma_iq: T, omega_iq: T) -> Result<Self, NoiseEaterError> {
        let mut fb = Self {
            tau,
            gain_g,
            gamma_iq,
            omega_iq,
            tau_iq: T::zero(),
            modulator: Modulator::Constant(Complex::new(T::one(), T::zero())),
        };
        fb.validate()?;
        let r = interferometer_response(tau, omega_iq).norm();
        if !(r > T::lit(1e-6)) {
            return Err(NoiseEaterError::BlindInterferometer {
                magnitude: r.to_f64_lossy(),
            });
        }
        fb.modulator = Modulator::Constant(Complex::new(T::lit(DEFAULT_LOOP_MAGNITUDE) / r, T::zero()));
        fb.tau_iq = fb.aligned_tau_iq();
        Ok(fb)
    }

    /// Default fiber delay and controller bandwidth, centered on `omega_iq`.
    pub fn with_defaults(gain_g: T, omega_iq: T) -> Result<Self, NoiseEaterError> {
        Self::new(default_fiber_delay(), gain_g, T::lit(DEFAULT_GAMMA_IQ), omega_iq)
    }

    /// Replaces the modulator and re-aligns the controller delay.
    pub fn with_modulator(mut self, modulator: Modulator<T>) -> Self {
        self.modulator = modulator;
        self.tau_iq = self.aligned_tau_iq();
        self
    }

    pub fn with_gain(mut self, gain_g: T) -> Self {
        self.gain_g = gain_g;
        self
    }

    pub fn with_tau_iq(mut self, tau_iq: T) -> Self {
        self.tau_iq = tau_iq;
        self
    }

    pub fn validate(&self) -> Result<(), NoiseEaterError> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(invalid("tau", self.tau, "must be finite and > 0"));
        }
        if !(self.gain_g >= T::zero()) || !self.gain_g.is_finite() {
            return Err(invalid("gain_g", self.gain_g, "must be finite and >= 0"));
        }
        if !(self.gamma_iq > T::zero()) || !self.gamma_iq.is_finite() {
            return Err(invalid("gamma_iq", self.gamma_iq, "must be finite and > 0"));
        }
        if !(self.omega_iq > T::zero()) || !self.omega_iq.is_finite() {
            return Err(invalid("omega_iq", self.omega_iq, "must be finite and > 0"));
        }
        if !self.tau_iq.is_finite() {
            return Err(invalid("tau_iq", self.tau_iq, "must be finite"));
        }
        Ok(())
    }

    /// Smallest τ_IQ ≥ 0 with arg(M R H)(Ω_IQ) = 0. At Ω_IQ the band-pass
    /// factor is −i, so the delay must absorb arg(−i M R).
    fn aligned_tau_iq(&self) -> T {
        let w = self.omega_iq;
        let mr = self.modulator.at(w) * interferometer_response(self.tau, w);
        let theta = (mr * Complex::new(T::zero(), -T::one())).arg();
        let theta = if theta < T::zero() { theta + T::two_pi() } else { theta };
        theta / w
    }
}

/// R(Ω) = 1 − e^{−iτΩ}.
pub fn interferometer_response<T: Real>(tau: T, omega: T) -> Complex<T> {
    let x = tau * omega;
    Complex::new(T::one() - x.cos(), x.sin())
}

/// H(Ω) = g e^{−iΩτ_IQ} γ_IQ Ω / (Ω_IQ² − Ω² + iγ_IQ Ω).
pub fn controller_response<T: Real>(fb: &FeedbackParams<T>, omega: T) -> Complex<T> {
    let band = Complex::new(fb.gamma_iq * omega, T::zero())
        / Complex::new(fb.omega_iq * fb.omega_iq - omega * omega, fb.gamma_iq * omega);
    let delay = Complex::from_polar(T::one(), -omega * fb.tau_iq);
    band * delay * fb.gain_g
}

/// Open-loop transfer M R H.
pub fn loop_gain<T: Real>(fb: &FeedbackParams<T>, omega: T) -> Complex<T> {
    fb.modulator.at(omega) * interferometer_response(fb.tau, omega) * controller_response(fb, omega)
}

/// Power suppression 1/|1 + M R H|².
pub fn suppression<T: Real>(fb: &FeedbackParams<T>, omega: T) -> T {
    let d = Complex::new(T::one(), T::zero()) + loop_gain(fb, omega);
    T::one() / d.norm_sqr()
}

/// S^fb(Ω) = S(Ω)/|1 + M R H|², S in rad²/s.
pub fn closed_loop_psd<T: Real>(fb: &FeedbackParams<T>, s_open: T, omega: T) -> Result<T, NoiseEaterError> {
    if !(s_open >= T::zero()) || !s_open.is_finite() {
        return Err(invalid("s_open", s_open, "must be finite and >= 0"));
    }
    Ok(s_open * suppression(fb, omega))
}

/// Closed-loop phase-noise intensity seen by the libration at Ω_α.
pub fn effective_psd_at_libration<T: Real>(
    fb: &FeedbackParams<T>,
    s_open: T,
    omega_alpha: T,
) -> Result<T, NoiseEaterError> {
    closed_loop_psd(fb, s_open, omega_alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainScanRow {
    pub gain_g: f64,
    /// rad²/s
    pub s_fb: f64,
    /// rad/s
    pub gamma_phi: f64,
    pub n_ss: f64,
}

/// Steady-state occupation against loop gain. `op.psd_s` is ignored; the
/// open-loop intensity `s_open` is filtered by the loop at Ω_α.
pub fn gain_scan(
    fb: &FeedbackParams<f64>,
    op: &OperatingPoint<f64>,
    s_open: f64,
    gains: &[f64],
) -> Result<Vec<GainScanRow>, NoiseEaterError> {
    gains
        .iter()
        .map(|&g| {
            let fb = fb.clone().with_gain(g);
            fb.validate()?;
            let s_fb = effective_psd_at_libration(&fb, s_open, op.omega_alpha)?;
            let rates = steady_state_occupation(&OperatingPoint { psd_s: s_fb, ..*op })?;
            Ok(GainScanRow {
                gain_g: g,
                s_fb,
                gamma_phi: rates.gamma_phi,
                n_ss: rates.n_ss,
            })
        })
        .collect()
}

pub fn write_gain_scan_csv<W: Write>(rows: &[GainScanRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "g [1],S_fb [rad^2/s],Gamma_phi [rad/s],n_ss [1]")?;
    for r in rows {
        writeln!(w, "{:.8e},{:.8e},{:.8e},{:.8e}", r.gain_g, r.s_fb, r.gamma_phi, r.n_ss)?;
    }
    Ok(())
}
