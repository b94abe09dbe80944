//! Closed-form cooling and heating rates of the adiabatically eliminated
//! libration–cavity system, and the resulting steady-state occupation.

use serde::Serialize;
use thiserror::Error;

use crate::params::{DerivedQuantities, ExperimentParams};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("operating point field `{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no finite occupation: cooling rate A- = {a_minus} does not exceed heating rate A+ = {a_plus}")]
    DivergentOccupation { a_plus: f64, a_minus: f64 },
    #[error("no finite occupation: coupling G is zero")]
    ZeroCoupling,
}

/// Inputs of the rate formulas. Every rate and frequency is in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint<T> {
    pub omega_alpha: T,
    pub kappa: T,
    pub detuning: T,
    pub coupling_g: T,
    pub recoil_gamma_ba: T,
    /// Phase-noise intensity S, rad²/s.
    pub psd_s: T,
    pub drive_lambda: T,
}

impl<T: Real> OperatingPoint<T> {
    pub fn from_derived(params: &ExperimentParams<T>, derived: &DerivedQuantities<T>) -> Self {
        Self {
            omega_alpha: derived.omega_alpha,
            kappa: params.cavity.linewidth_kappa,
            detuning: params.cavity.detuning_delta,
            coupling_g: derived.coupling_g,
            recoil_gamma_ba: derived.recoil_gamma_ba,
            psd_s: params.phase_noise.psd_s,
            drive_lambda: derived.drive_lambda,
        }
    }

    /// Drive Λ that yields the steady-state cavity occupation `ncav` at this detuning.
    pub fn lambda_for_ncav(ncav: T, detuning: T, kappa: T) -> T {
        let hk = kappa / T::lit(2.0);
        (ncav * (detuning * detuning + hk * hk)).sqrt()
    }

    pub fn validate(&self) -> Result<(), RateError> {
        let check = |field: &'static str, v: T, strict: bool| -> Result<(), RateError> {
            let ok = v.is_finite() && if strict { v > T::zero() } else { v >= T::zero() };
            if ok {
                Ok(())
            } else {
                Err(RateError::InvalidInput {
                    field,
                    value: v.to_f64_lossy(),
                    reason: if strict { "must be finite and > 0" } else { "must be finite and >= 0" },
                })
            }
        };
        check("omega_alpha", self.omega_alpha, true)?;
        check("kappa", self.kappa, true)?;
        if !self.detuning.is_finite() {
            return Err(RateError::InvalidInput {
                field: "detuning",
                value: self.detuning.to_f64_lossy(),
                reason: "must be finite",
            });
        }
        check("coupling_g", self.coupling_g, false)?;
        check("recoil_gamma_ba", self.recoil_gamma_ba, false)?;
        check("psd_s", self.psd_s, false)?;
        check("drive_lambda", self.drive_lambda, false)?;
        Ok(())
    }

    fn half_kappa_sq(&self) -> T {
        let hk = self.kappa / T::lit(2.0);
        hk * hk
    }

    /// Steady-state cavity occupation in the weak-noise limit, Λ²/(Δ² + (κ/2)²).
    pub fn ncav(&self) -> T {
        self.drive_lambda * self.drive_lambda / (self.detuning * self.detuning + self.half_kappa_sq())
    }

    /// Mean cavity occupation under phase diffusion of strength S at any S: the cavity
    /// Lorentzian convolved with the drive line, Λ²(κ+S)/κ / (Δ² + ((κ+S)/2)²).
    pub fn ncav_phase_diffused(&self) -> T {
        let w = self.kappa + self.psd_s;
        let hw = w / T::lit(2.0);
        self.drive_lambda * self.drive_lambda * (w / self.kappa) / (self.detuning * self.detuning + hw * hw)
    }

    /// True when S exceeds κ/10, one decade below the S ≪ κ validity bound.
    pub fn weak_noise_violated(&self) -> bool {
        self.psd_s > self.kappa / T::lit(10.0)
    }
}

/// Adiabatic-elimination rates A± = G²κ / [(Ω ± Δ)² + (κ/2)²].
pub fn sideband_rates<T: Real>(op: &OperatingPoint<T>) -> Result<(T, T), RateError> {
    op.validate()?;
    let g2k = op.coupling_g * op.coupling_g * op.kappa;
    let hk2 = op.half_kappa_sq();
    let plus = op.omega_alpha + op.detuning;
    let minus = op.omega_alpha - op.detuning;
    Ok((g2k / (plus * plus + hk2), g2k / (minus * minus + hk2)))
}

/// Signed total rate γ = A₊ − A₋ (negative means cooling).
pub fn cooling_rate<T: Real>(op: &OperatingPoint<T>) -> Result<T, RateError> {
    let (ap, am) = sideband_rates(op)?;
    Ok(ap - am)
}

/// The A₊ ≪ A₋ approximation γ ≈ −A₋.
pub fn cooling_rate_approx<T: Real>(op: &OperatingPoint<T>) -> Result<T, RateError> {
    Ok(-sideband_rates(op)?.1)
}

/// Phase-noise heating rate Γ_φ in the weak-noise limit.
///
/// This equals the two-sided spectral density of the stochastic drive
/// ξ(t) = 2G Re[e^{iφ}α_c] at the libration frequency.
pub fn phase_noise_heating<T: Real>(op: &OperatingPoint<T>) -> Result<T, RateError> {
    op.validate()?;
    let shape = phase_noise_shape(op);
    Ok(T::lit(4.0) * op.coupling_g * op.coupling_g * op.ncav() * op.psd_s * shape
        / ((op.omega_alpha - op.detuning).powi(2) + op.half_kappa_sq()))
}

/// {[(κ/2)² − Δ²]² + (Ωκ/2)²} / ([Δ² + (κ/2)²][(Δ + Ω)² + (κ/2)²]), shared by Γ_φ and n_φ.
fn phase_noise_shape<T: Real>(op: &OperatingPoint<T>) -> T {
    let hk2 = op.half_kappa_sq();
    let d2 = op.detuning * op.detuning;
    let w_hk = op.omega_alpha * op.kappa / T::lit(2.0);
    let num = (hk2 - d2).powi(2) + w_hk * w_hk;
    num / ((d2 + hk2) * ((op.detuning + op.omega_alpha).powi(2) + hk2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupationStatus {
    Finite,
    /// A₋ ≤ A₊: the mode is heated by the cavity.
    Divergent,
    /// G = 0: no optical damping.
    ZeroCoupling,
}

/// All rates and occupations at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSet<T> {
    pub recoil_gamma_ba: T,
    pub a_plus: T,
    pub a_minus: T,
    pub gamma_cool: T,
    pub gamma_phi: T,
    pub ncav: T,
    /// Backaction-limited term of the closed-form occupation.
    pub n0: T,
    /// Phase-noise term of the closed-form occupation.
    pub n_phi: T,
    pub n_ss: T,
    /// Full rate balance (Γ_BA + Γ_φ + A₊)/(A₋ − A₊), kept for oracle comparisons.
    pub n_exact: T,
    pub status: OccupationStatus,
    /// Set when S > κ/10 and the weak-noise formulas are being stretched.
    pub weak_noise_warning: bool,
}

impl<T: Real> RateSet<T> {
    /// Converts a non-finite status into the matching error.
    pub fn finite(&self) -> Result<&Self, RateError> {
        match self.status {
            OccupationStatus::Finite => Ok(self),
            OccupationStatus::ZeroCoupling => Err(RateError::ZeroCoupling),
            OccupationStatus::Divergent => Err(RateError::DivergentOccupation {
                a_plus: self.a_plus.to_f64_lossy(),
                a_minus: self.a_minus.to_f64_lossy(),
            }),
        }
    }
}

/// Steady-state occupation n = n0 + n_φ and all intermediate rates.
///
/// Heating regions (A₋ ≤ A₊) and G = 0 are not errors: the occupations are
/// set to +∞ and `status` says why. Use [`RateSet::finite`] to turn them into
/// [`RateError`]s.
pub fn steady_state_occupation<T: Real>(op: &OperatingPoint<T>) -> Result<RateSet<T>, RateError> {
    let (a_plus, a_minus) = sideband_rates(op)?;
    let gamma_phi = phase_noise_heating(op)?;
    let ncav = op.ncav();
    let inf = T::infinity();

    let status = if op.coupling_g == T::zero() {
        OccupationStatus::ZeroCoupling
    } else if a_minus <= a_plus {
        OccupationStatus::Divergent
    } else {
        OccupationStatus::Finite
    };

    let (n0, n_phi, n_exact) = match status {
        OccupationStatus::Finite => {
            let hk2 = op.half_kappa_sq();
            let n0 = op.recoil_gamma_ba * ((op.detuning - op.omega_alpha).powi(2) + hk2)
                / (op.coupling_g * op.coupling_g * op.kappa);
            let n_phi = T::lit(4.0) * ncav * op.psd_s * phase_noise_shape(op) / op.kappa;
            let n_exact = (op.recoil_gamma_ba + gamma_phi + a_plus) / (a_minus - a_plus);
            (n0, n_phi, n_exact)
        }
        _ => (inf, inf, inf),
    };

    Ok(RateSet {
        recoil_gamma_ba: op.recoil_gamma_ba,
        a_plus,
        a_minus,
        gamma_cool: a_plus - a_minus,
        gamma_phi,
        ncav,
        n0,
        n_phi,
        n_ss: n0 + n_phi,
        n_exact,
        status,
        weak_noise_warning: op.weak_noise_violated(),
    })
}

/// Thermal heating by residual gas, Γ_gas = γ_α k_B T / (ħ Ω_α).
pub fn gas_heating_rate<T: Real>(gamma_alpha: T, temperature: T, omega_alpha: T) -> Result<T, RateError> {
    let bad = |field, v: T, reason| RateError::InvalidInput {
        field,
        value: v.to_f64_lossy(),
        reason,
    };
    if !(gamma_alpha >= T::zero()) || !gamma_alpha.is_finite() {
        return Err(bad("gamma_alpha", gamma_alpha, "must be finite and >= 0"));
    }
    if !(temperature >= T::zero()) || !temperature.is_finite() {
        return Err(bad("temperature", temperature, "must be finite and >= 0"));
    }
    if !(omega_alpha > T::zero()) || !omega_alpha.is_finite() {
        return Err(bad("omega_alpha", omega_alpha, "must be finite and > 0"));
    }
    let k = crate::params::PhysicalConstants::<T>::codata();
    // kB/ħ ≈ 1.3e11 keeps f32 in range
    Ok(gamma_alpha * (k.kb() / k.hbar()) * temperature / omega_alpha)
}
