//! Cavity cooling of the librational mode of a levitated nanoparticle.
//!
//! The crate evaluates the closed-form rate and occupation formulas of the
//! coherent-scattering cooling model and checks them against two independent
//! oracles: a Lindblad master-equation solver on truncated Fock spaces
//! ([`lindblad`]) and a Monte Carlo simulation of the phase-noise driven
//! cavity ([`stochastic`]). Sideband thermometry, the phase-noise feedback
//! loop and the parameter-extraction fits live in [`thermometry`],
//! [`noise_eater`] and [`analysis`].
//!
//! Closed-form modules are generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the scalar to `f64`, which is what the oracles and the CLI use.

pub mod scalar;
pub mod params;
pub mod rates;
pub mod lindblad;
pub mod stochastic;
pub mod fit;
pub mod thermometry;
pub mod noise_eater;
pub mod analysis;
pub mod config;
pub mod io;

pub use scalar::{hz_to_rad, rad_to_hz, Real};

pub type ExperimentParams = params::ExperimentParams<f64>;
pub type ExperimentParamsF32 = params::ExperimentParams<f32>;
pub type DerivedQuantities = params::DerivedQuantities<f64>;
pub type DerivedQuantitiesF32 = params::DerivedQuantities<f32>;
pub type OperatingPoint = rates::OperatingPoint<f64>;
pub type OperatingPointF32 = rates::OperatingPoint<f32>;
pub type RateSet = rates::RateSet<f64>;
pub type RateSetF32 = rates::RateSet<f32>;
