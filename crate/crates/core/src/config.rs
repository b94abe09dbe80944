//! JSON parameter files and the bundled presets.
//!
//! Files use ordinary frequencies in Hz; conversion to rad/s happens here.
//! A user file is merged field by field over a preset, then checked
//! against the schema, which rejects unknown fields.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::ModelParams;
use crate::noise_eater::{fiber_delay, interferometer_response, FeedbackParams, Modulator, NoiseEaterError};
use crate::params::{
    CavityParams, ExperimentParams, ParamsError, ParticleParams, PhaseNoiseParams, TweezerParams,
};
use crate::scalar::hz_to_rad;

const PRESETS: [(&str, &str); 2] = [
    ("particle1", include_str!("../presets/particle1.json")),
    ("particle2", include_str!("../presets/particle2.json")),
];
const CHECKSUMS: &str = include_str!("../presets/SHA256SUMS");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{0}` (available: particle1, particle2)")]
    UnknownPreset(String),
    #[error("{source_name}: {message}")]
    Schema { source_name: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("preset `{name}` does not match its checksum")]
    Checksum { name: String },
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamsError),
    #[error("invalid feedback parameters: {0}")]
    Feedback(#[from] NoiseEaterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdUnit {
    /// S itself, rad²/s.
    Rad2PerS,
    /// S/(2π)², Hz²/Hz.
    Hz2PerHz,
    /// √S/(2π), Hz/√Hz.
    HzPerSqrtHz,
}

/// Phase-noise level with a mandatory unit tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggedPsd {
    pub value: f64,
    pub unit: PsdUnit,
}

impl TaggedPsd {
    /// S in rad²/s.
    pub fn rad2_per_s(&self) -> f64 {
        match self.unit {
            PsdUnit::Rad2PerS => PhaseNoiseParams::from_rad2_per_s(self.value).psd_s,
            PsdUnit::Hz2PerHz => PhaseNoiseParams::from_hz2_per_hz(self.value).psd_s,
            PsdUnit::HzPerSqrtHz => PhaseNoiseParams::from_hz_per_sqrt_hz(self.value).psd_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweezerConfig {
    pub power_w: f64,
    pub waist_m: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub waist_m: f64,
    pub length_m: f64,
    pub linewidth_kappa_hz: f64,
    pub detuning_delta_hz: f64,
    pub phase_phi_rad: f64,
    pub drive_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub moment_of_inertia_kg_m2: f64,
    pub delta_alpha_c_m2_per_v: f64,
    pub alpha_y_c_m2_per_v: f64,
    pub pressure_mbar: f64,
    pub temperature_k: f64,
}

/// Values obtained by fitting measured data rather than from first principles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedConfig {
    pub libration_hz: f64,
    /// G₀/2π at the antinode.
    pub coupling_g0_hz: f64,
    pub recoil_gamma_ba_hz: f64,
    /// Cavity photons at the antinode.
    pub ncav0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub gamma_iq_hz: f64,
    /// Defaults to the libration frequency.
    #[serde(default)]
    pub omega_iq_hz: Option<f64>,
    pub fiber_length_m: f64,
    pub fiber_index: f64,
    /// |M R| at the I/Q center frequency.
    pub loop_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    pub name: String,
    #[serde(default)]
    pub notes: Vec<String>,
    pub tweezer: TweezerConfig,
    pub cavity: CavityConfig,
    pub particle: ParticleConfig,
    /// Open-loop phase noise at the libration frequency.
    pub phase_noise: TaggedPsd,
    /// Closed-loop level quoted at unit gain, kept for reference only.
    #[serde(default)]
    pub phase_noise_unit_gain: Option<TaggedPsd>,
    pub fitted: FittedConfig,
    pub feedback: FeedbackConfig,
    /// Detection efficiency η, carried as metadata.
    #[serde(default)]
    pub detection_efficiency: Option<f64>,
}

/// Names of the bundled presets.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

fn preset_text(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

/// Compares every bundled preset with the shipped SHA-256 list.
pub fn verify_presets() -> Result<(), ConfigError> {
    for (name, text) in PRESETS {
        let file = format!("{name}.json");
        let want = CHECKSUMS
            .lines()
            .find_map(|l| {
                let mut it = l.split_whitespace();
                let hash = it.next()?;
                (it.next()? == file).then_some(hash)
            })
            .ok_or_else(|| ConfigError::Checksum { name: name.to_string() })?;
        let got: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        if got != want {
            return Err(ConfigError::Checksum { name: name.to_string() });
        }
    }
    Ok(())
}

fn parse_value(text: &str, source_name: &str) -> Result<Value, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Schema {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })
}

/// Recursively overlays `top` on `base`; objects merge, anything else replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunParams {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        Self::from_value(parse_value(preset_text(name)?, name)?, name)
    }

    /// Parses a complete parameter file.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        Self::from_value(parse_value(text, source_name)?, source_name)
    }

    /// Loads a preset, a user file, or a user file merged over a preset.
    pub fn load(preset: Option<&str>, params_file: Option<&Path>) -> Result<Self, ConfigError> {
        let user = match params_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Some((parse_value(&text, &path.display().to_string())?, path.display().to_string()))
            }
            None => None,
        };
        match (preset, user) {
            (Some(name), None) => Self::preset(name),
            (None, Some((value, src))) => Self::from_value(value, &src),
            (Some(name), Some((value, src))) => {
                let mut base = parse_value(preset_text(name)?, name)?;
                merge(&mut base, value);
                Self::from_value(base, &format!("{src} over preset {name}"))
            }
            (None, None) => Self::preset("particle1"),
        }
    }

    fn from_value(value: Value, source_name: &str) -> Result<Self, ConfigError> {
        let p: Self = serde_json::from_value(value).map_err(|e| ConfigError::Schema {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        p.experiment_params().validate()?;
        p.model_params().validate().map_err(|e| ConfigError::Schema {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        Ok(p)
    }

    /// First-principles inputs in rad/s.
    pub fn experiment_params(&self) -> ExperimentParams<f64> {
        ExperimentParams {
            tweezer: TweezerParams {
                power: self.tweezer.power_w,
                waist: self.tweezer.waist_m,
                wavelength: self.tweezer.wavelength_m,
            },
            cavity: CavityParams {
                waist: self.cavity.waist_m,
                length: self.cavity.length_m,
                linewidth_kappa: hz_to_rad(self.cavity.linewidth_kappa_hz),
                detuning_delta: hz_to_rad(self.cavity.detuning_delta_hz),
                phase_phi: self.cavity.phase_phi_rad,
                drive_epsilon: self.cavity.drive_epsilon,
            },
            particle: ParticleParams {
                moment_of_inertia: self.particle.moment_of_inertia_kg_m2,
                delta_alpha: self.particle.delta_alpha_c_m2_per_v,
                alpha_y: self.particle.alpha_y_c_m2_per_v,
                pressure: self.particle.pressure_mbar,
                temperature: self.particle.temperature_k,
            },
            phase_noise: PhaseNoiseParams::from_rad2_per_s(self.phase_noise.rad2_per_s()),
        }
    }

    /// Fitted rate-model parameters in rad/s.
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            omega_alpha: hz_to_rad(self.fitted.libration_hz),
            kappa: hz_to_rad(self.cavity.linewidth_kappa_hz),
            detuning: hz_to_rad(self.cavity.detuning_delta_hz),
            coupling_g0: hz_to_rad(self.fitted.coupling_g0_hz),
            recoil_gamma_ba: hz_to_rad(self.fitted.recoil_gamma_ba_hz),
            ncav0: self.fitted.ncav0,
            psd_s: self.phase_noise.rad2_per_s(),
            phase_phi: self.cavity.phase_phi_rad,
        }
    }

    /// Noise-eater loop at gain `gain_g`, τ_IQ aligned at Ω_IQ.
    pub fn feedback_params(&self, gain_g: f64) -> Result<FeedbackParams<f64>, ConfigError> {
        let fb = &self.feedback;
        let tau = fiber_delay(fb.fiber_length_m, fb.fiber_index);
        let omega_iq = hz_to_rad(fb.omega_iq_hz.unwrap_or(self.fitted.libration_hz));
        let base = FeedbackParams::new(tau, gain_g, hz_to_rad(fb.gamma_iq_hz), omega_iq)?;
        if !(fb.loop_magnitude > 0.0) || !fb.loop_magnitude.is_finite() {
            return Err(NoiseEaterError::InvalidInput {
                field: "feedback.loop_magnitude",
                value: fb.loop_magnitude,
                reason: "must be finite and > 0",
            }
            .into());
        }
        let m = fb.loop_magnitude / interferometer_response(tau, omega_iq).norm();
        Ok(base.with_modulator(Modulator::Constant(num_complex::Complex64::new(m, 0.0))))
    }
}
