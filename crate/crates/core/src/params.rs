//! Physical inputs of the model and the quantities derived from them.
//!
//! All frequencies and rates are angular (rad/s) inside this crate. Conversion
//! to the `/2π` Hz values used in reports happens at the I/O boundary
//! ([`crate::config`], [`crate::io`]).

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("`{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("`{field}` = {value} is out of range: {reason}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("degenerate input `{field}`: {reason}")]
    Degenerate {
        field: &'static str,
        reason: &'static str,
    },
}

/// CODATA 2018 values. Not user-settable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    hbar: T,
    c: T,
    eps0: T,
    kb: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn codata() -> Self {
        Self {
            hbar: T::lit(1.054_571_817e-34),
            c: T::lit(299_792_458.0),
            eps0: T::lit(8.854_187_812_8e-12),
            kb: T::lit(1.380_649e-23),
        }
    }

    /// Reduced Planck constant, J·s.
    pub fn hbar(&self) -> T {
        self.hbar
    }

    /// Speed of light, m/s.
    pub fn c(&self) -> T {
        self.c
    }

    /// Vacuum permittivity, F/m.
    pub fn eps0(&self) -> T {
        self.eps0
    }

    /// Boltzmann constant, J/K.
    pub fn kb(&self) -> T {
        self.kb
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TweezerParams<T> {
    /// W
    pub power: T,
    /// m
    pub waist: T,
    /// m
    pub wavelength: T,
}

impl<T: Real> TweezerParams<T> {
    /// Optical angular frequency 2πc/λ.
    pub fn omega_tw(&self) -> T {
        T::two_pi() * PhysicalConstants::<T>::codata().c() / self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityParams<T> {
    /// m
    pub waist: T,
    /// m
    pub length: T,
    /// Energy decay rate κ, rad/s.
    pub linewidth_kappa: T,
    /// Cavity minus tweezer frequency Δ, rad/s.
    pub detuning_delta: T,
    /// Standing-wave phase k·y_eq: 0 at the node, π/2 at the antinode.
    pub phase_phi: T,
    /// Dimensionless scattering imperfection that drives the cavity.
    pub drive_epsilon: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleParams<T> {
    /// kg·m²
    pub moment_of_inertia: T,
    /// α_Y − α_X, C·m²/V
    pub delta_alpha: T,
    /// C·m²/V
    pub alpha_y: T,
    /// mbar
    pub pressure: T,
    /// K
    pub temperature: T,
}

/// White phase-noise intensity: ⟨⟨φ̇(t)φ̇(s)⟩⟩ = S δ(t−s), S in rad²/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseNoiseParams<T> {
    pub psd_s: T,
}

impl<T: Real> PhaseNoiseParams<T> {
    pub fn from_rad2_per_s(s: T) -> Self {
        Self { psd_s: s }
    }

    /// S[rad²/s] = (2π)² · S[Hz²/Hz].
    pub fn from_hz2_per_hz(s_hz: T) -> Self {
        let tp = T::two_pi();
        Self { psd_s: tp * tp * s_hz }
    }

    /// From the amplitude √S/(2π) quoted in Hz/√Hz.
    pub fn from_hz_per_sqrt_hz(amplitude: T) -> Self {
        Self::from_hz2_per_hz(amplitude * amplitude)
    }

    pub fn hz2_per_hz(&self) -> T {
        let tp = T::two_pi();
        self.psd_s / (tp * tp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentParams<T> {
    pub tweezer: TweezerParams<T>,
    pub cavity: CavityParams<T>,
    pub particle: ParticleParams<T>,
    pub phase_noise: PhaseNoiseParams<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities<T> {
    /// Tweezer field amplitude E0, V/m.
    pub field_e0: T,
    /// Zero-point cavity field E_c, V/m.
    pub zp_field_ec: T,
    /// m³
    pub mode_volume_vc: T,
    /// rad/s
    pub omega_alpha: T,
    /// rad
    pub alpha_zpf: T,
    /// |G|, rad/s
    pub coupling_g: T,
    /// rad/s
    pub recoil_gamma_ba: T,
    /// rad/s
    pub drive_lambda: T,
    pub ncav_ss: T,
}

fn finite<T: Real>(field: &'static str, v: T) -> Result<T, ParamsError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParamsError::NonFinite {
            field,
            value: v.to_f64_lossy(),
        })
    }
}

fn positive<T: Real>(field: &'static str, v: T) -> Result<T, ParamsError> {
    let v = finite(field, v)?;
    if v > T::zero() {
        Ok(v)
    } else {
        Err(ParamsError::OutOfRange {
            field,
            value: v.to_f64_lossy(),
            reason: "must be > 0",
        })
    }
}

fn non_negative<T: Real>(field: &'static str, v: T) -> Result<T, ParamsError> {
    let v = finite(field, v)?;
    if v >= T::zero() {
        Ok(v)
    } else {
        Err(ParamsError::OutOfRange {
            field,
            value: v.to_f64_lossy(),
            reason: "must be >= 0",
        })
    }
}

impl<T: Real> ExperimentParams<T> {
    /// Checks every component invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let tw = &self.tweezer;
        positive("tweezer.power", tw.power)?;
        positive("tweezer.waist", tw.waist)?;
        positive("tweezer.wavelength", tw.wavelength)?;

        let cav = &self.cavity;
        positive("cavity.waist", cav.waist)?;
        positive("cavity.length", cav.length)?;
        positive("cavity.linewidth_kappa", cav.linewidth_kappa)?;
        finite("cavity.detuning_delta", cav.detuning_delta)?;
        let phi = non_negative("cavity.phase_phi", cav.phase_phi)?;
        if phi > T::FRAC_PI_2() {
            return Err(ParamsError::OutOfRange {
                field: "cavity.phase_phi",
                value: phi.to_f64_lossy(),
                reason: "must lie in [0, pi/2]",
            });
        }
        non_negative("cavity.drive_epsilon", cav.drive_epsilon)?;

        let p = &self.particle;
        positive("particle.moment_of_inertia", p.moment_of_inertia)?;
        let da = finite("particle.delta_alpha", p.delta_alpha)?;
        if da == T::zero() {
            return Err(ParamsError::Degenerate {
                field: "particle.delta_alpha",
                reason: "zero polarizability difference gives zero trap stiffness",
            });
        }
        positive("particle.delta_alpha", da)?;
        let ay = positive("particle.alpha_y", p.alpha_y)?;
        if da > ay {
            return Err(ParamsError::OutOfRange {
                field: "particle.delta_alpha",
                value: da.to_f64_lossy(),
                reason: "must not exceed alpha_y",
            });
        }
        non_negative("particle.pressure", p.pressure)?;
        positive("particle.temperature", p.temperature)?;

        non_negative("phase_noise.psd_s", self.phase_noise.psd_s)?;
        Ok(())
    }
}

/// Evaluates every derived quantity of the parameter table.
///
/// Products are grouped so that no intermediate leaves the `f32` exponent
/// range: Δα·E0·α_zpf/ħ and α_Y·E0/ħ are O(1e4..1e10) while their factors
/// span 1e-34..1e7.
pub fn derive<T: Real>(params: &ExperimentParams<T>) -> Result<DerivedQuantities<T>, ParamsError> {
    params.validate()?;
    let k = PhysicalConstants::<T>::codata();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let pi = T::PI();

    let tw = &params.tweezer;
    let cav = &params.cavity;
    let part = &params.particle;

    let omega_tw = tw.omega_tw();
    // E0 = sqrt(4P / (π ε0 c w²)); group ε0·c ≈ 2.7e-3 first.
    let field_e0 = (four * tw.power / (pi * (k.eps0() * k.c()) * tw.waist * tw.waist)).sqrt();

    let half_waist = cav.waist / two;
    let mode_volume_vc = pi * half_waist * half_waist * cav.length;
    // ω_tw in place of ω_c; the two differ by Δ/ω_tw ~ 1e-9.
    let zp_field_ec = ((k.hbar() * omega_tw) / (two * k.eps0() * mode_volume_vc)).sqrt();

    // Ω² = Δα E0² / 2I
    let stiffness = (part.delta_alpha * field_e0) * field_e0;
    let omega_alpha = (stiffness / (two * part.moment_of_inertia)).sqrt();
    if !(omega_alpha > T::zero()) || !omega_alpha.is_finite() {
        return Err(ParamsError::Degenerate {
            field: "particle.delta_alpha",
            reason: "libration frequency evaluates to zero",
        });
    }
    let alpha_zpf = (k.hbar() / (two * part.moment_of_inertia * omega_alpha)).sqrt();
    if !alpha_zpf.is_finite() {
        return Err(ParamsError::Degenerate {
            field: "particle.moment_of_inertia",
            reason: "zero-point angle is not finite",
        });
    }

    // Δα·α_zpf·E0/ħ: libration-field coupling per unit cavity field, 1/(V/m·s)
    let lib_coupling = part.delta_alpha / k.hbar() * field_e0 * alpha_zpf;
    let sin_phi = cav.phase_phi.sin();
    let coupling_g = (lib_coupling * zp_field_ec * sin_phi / two).abs();

    // Γ_BA = (Δα E0 α_zpf)² ω³ / (12π ħ c³ ε0) = (Δα E0 α_zpf/ħ)² · ħ ω³ / (12π c³ ε0)
    let omega_over_c = omega_tw / k.c();
    let radiation = k.hbar() * omega_over_c * omega_over_c * omega_over_c
        / (T::lit(12.0) * pi * k.eps0());
    let recoil_gamma_ba = lib_coupling * lib_coupling * radiation;

    let drive_lambda = part.alpha_y / k.hbar() * field_e0 * zp_field_ec * cav.drive_epsilon * sin_phi / two;
    let half_kappa = cav.linewidth_kappa / two;
    let ncav_ss = drive_lambda * drive_lambda
        / (cav.detuning_delta * cav.detuning_delta + half_kappa * half_kappa);

    Ok(DerivedQuantities {
        field_e0,
        zp_field_ec,
        mode_volume_vc,
        omega_alpha,
        alpha_zpf,
        coupling_g,
        recoil_gamma_ba,
        drive_lambda,
        ncav_ss,
    })
}

/// Moment of inertia from the thermal spread σ (Hz) of a spinning particle's
/// rotation rate: I = k_B T / (2πσ)².
pub fn moment_of_inertia_from_rotation<T: Real>(sigma_rot_hz: T, temperature: T) -> Result<T, ParamsError> {
    let sigma = positive("sigma_rot", sigma_rot_hz)?;
    let temp = positive("temperature", temperature)?;
    let w = T::two_pi() * sigma;
    Ok(PhysicalConstants::<T>::codata().kb() * temp / (w * w))
}

/// Purity (2n+1)⁻¹ of a thermal state with mean occupation `n`.
pub fn purity<T: Real>(n: T) -> Result<T, ParamsError> {
    let n = non_negative("n", n)?;
    Ok(T::one() / (T::lit(2.0) * n + T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::hz_to_rad;

    pub(crate) fn particle1() -> ExperimentParams<f64> {
        ExperimentParams {
            tweezer: TweezerParams {
                power: 1.2,
                waist: 0.85e-6,
                wavelength: 1550e-9,
            },
            cavity: CavityParams {
                waist: 48e-6,
                length: 6.4e-3,
                linewidth_kappa: hz_to_rad(330e3),
                detuning_delta: hz_to_rad(1.1e6),
                phase_phi: std::f64::consts::FRAC_PI_2,
                drive_epsilon: 0.1,
            },
            particle: ParticleParams {
                moment_of_inertia: 3.9e-32,
                delta_alpha: 4.7e-33,
                alpha_y: 2.0e-32,
                pressure: 5e-9,
                temperature: 300.0,
            },
            phase_noise: PhaseNoiseParams::from_hz_per_sqrt_hz(0.16),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn particle1_table_values() {
        let d = derive(&particle1()).unwrap();
        assert!(rel(d.field_e0, 2.8e7) < 0.05);
        assert!(rel(d.zp_field_ec, 24.3) < 0.05);
        assert!(rel(d.alpha_zpf, 14e-6) < 0.05);
        assert!(rel(d.omega_alpha / std::f64::consts::TAU, 1.1e6) < 0.05);
        assert!(rel(d.coupling_g / std::f64::consts::TAU, 35e3) < 0.05);
        assert!(rel(d.recoil_gamma_ba / std::f64::consts::TAU, 1.0e3) < 0.05);
    }

    #[test]
    fn zero_point_and_stiffness_identities() {
        let p = particle1();
        let d = derive(&p).unwrap();
        let hbar = PhysicalConstants::<f64>::codata().hbar();
        let i = p.particle.moment_of_inertia;
        let lhs = d.alpha_zpf * d.alpha_zpf * 2.0 * i * d.omega_alpha;
        assert!(rel(lhs, hbar) < 1e-12);
        let stiff = d.omega_alpha * d.omega_alpha * 2.0 * i;
        assert!(rel(stiff, p.particle.delta_alpha * d.field_e0 * d.field_e0) < 1e-12);
    }

    #[test]
    fn node_kills_coupling_and_drive() {
        let mut p = particle1();
        p.cavity.phase_phi = 0.0;
        let d = derive(&p).unwrap();
        assert_eq!(d.coupling_g, 0.0);
        assert_eq!(d.ncav_ss, 0.0);
        assert_eq!(d.drive_lambda, 0.0);
    }

    #[test]
    fn zero_polarizability_difference_is_degenerate() {
        let mut p = particle1();
        p.particle.delta_alpha = 0.0;
        match derive(&p) {
            Err(ParamsError::Degenerate { field, .. }) => assert_eq!(field, "particle.delta_alpha"),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let mut p = particle1();
        p.tweezer.waist = f64::NAN;
        let e = derive(&p).unwrap_err();
        assert!(e.to_string().contains("tweezer.waist"));

        let mut p = particle1();
        p.cavity.phase_phi = 2.0;
        assert!(derive(&p).unwrap_err().to_string().contains("cavity.phase_phi"));

        let mut p = particle1();
        p.particle.delta_alpha = 3e-32;
        assert!(derive(&p).unwrap_err().to_string().contains("delta_alpha"));
    }

    #[test]
    fn f32_matches_f64() {
        let p = particle1();
        let p32 = ExperimentParams {
            tweezer: TweezerParams {
                power: 1.2f32,
                waist: 0.85e-6,
                wavelength: 1550e-9,
            },
            cavity: CavityParams {
                waist: 48e-6,
                length: 6.4e-3,
                linewidth_kappa: p.cavity.linewidth_kappa as f32,
                detuning_delta: p.cavity.detuning_delta as f32,
                phase_phi: std::f32::consts::FRAC_PI_2,
                drive_epsilon: 0.1,
            },
            particle: ParticleParams {
                moment_of_inertia: 3.9e-32,
                delta_alpha: 4.7e-33,
                alpha_y: 2.0e-32,
                pressure: 5e-9,
                temperature: 300.0,
            },
            phase_noise: PhaseNoiseParams::from_hz_per_sqrt_hz(0.16f32),
        };
        let a = derive(&p).unwrap();
        let b = derive(&p32).unwrap();
        for (x, y) in [
            (a.field_e0, b.field_e0 as f64),
            (a.zp_field_ec, b.zp_field_ec as f64),
            (a.omega_alpha, b.omega_alpha as f64),
            (a.alpha_zpf, b.alpha_zpf as f64),
            (a.coupling_g, b.coupling_g as f64),
            (a.recoil_gamma_ba, b.recoil_gamma_ba as f64),
            (a.drive_lambda, b.drive_lambda as f64),
            (a.ncav_ss, b.ncav_ss as f64),
        ] {
            assert!(rel(y, x) < 1e-4, "{x} vs {y}");
        }
    }

    #[test]
    fn moment_of_inertia_examples() {
        let i = moment_of_inertia_from_rotation(52e3, 300.0).unwrap();
        // direct constant folding: kB*300/(2π*52000)^2
        let direct = 1.380649e-23 * 300.0 / (2.0 * std::f64::consts::PI * 52000.0_f64).powi(2);
        assert!(rel(i, direct) < 1e-14);
        assert!(rel(i, 3.88e-32) < 1e-3);
        let i2 = moment_of_inertia_from_rotation(104e3, 300.0).unwrap();
        assert!(rel(i2, i / 4.0) < 1e-14);
        assert!(moment_of_inertia_from_rotation(0.0, 300.0).is_err());
        assert!(moment_of_inertia_from_rotation(52e3, -1.0).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(0.0).unwrap(), 1.0);
        assert_eq!(purity(0.5).unwrap(), 0.5);
        assert!((purity(0.04f64).unwrap() - 0.926).abs() < 1e-3);
        assert!(purity(-0.1).is_err());
    }

    #[test]
    fn psd_unit_conversions() {
        let a = PhaseNoiseParams::from_hz_per_sqrt_hz(0.16f64);
        let b = PhaseNoiseParams::from_hz2_per_hz(0.0256f64);
        assert!(rel(a.psd_s, b.psd_s) < 1e-12);
        assert!(rel(a.psd_s, 0.0256 * 4.0 * std::f64::consts::PI.powi(2)) < 1e-12);
        assert!(rel(b.hz2_per_hz(), 0.0256) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn coupling_drive_monotone_in_phase(a in 0.0f64..1.5, b in 0.0f64..1.5) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let mut p = particle1();
                p.cavity.phase_phi = lo;
                let dlo = derive(&p).unwrap();
                p.cavity.phase_phi = hi;
                let dhi = derive(&p).unwrap();
                prop_assert!(dlo.coupling_g <= dhi.coupling_g);
                prop_assert!(dlo.drive_lambda <= dhi.drive_lambda);
                prop_assert!(dlo.ncav_ss <= dhi.ncav_ss);
            }

            #[test]
            fn derived_identities_hold(i in 5e-33f64..1e-31, da_frac in 0.05f64..1.0, power in 0.1f64..3.0) {
                let mut p = particle1();
                p.particle.moment_of_inertia = i;
                p.particle.delta_alpha = da_frac * p.particle.alpha_y;
                p.tweezer.power = power;
                let d = derive(&p).unwrap();
                let hbar = PhysicalConstants::<f64>::codata().hbar();
                prop_assert!(rel(d.alpha_zpf.powi(2) * 2.0 * i * d.omega_alpha, hbar) < 1e-12);
                prop_assert!(rel(d.omega_alpha.powi(2) * 2.0 * i, p.particle.delta_alpha * d.field_e0.powi(2)) < 1e-12);
            }
        }
    }
}
