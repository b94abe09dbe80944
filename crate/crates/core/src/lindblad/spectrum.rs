use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::steady_state;
use super::superop::Liouvillian;
use super::{DensityMatrix, LindbladError};

/// Motional sideband of the scattered light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    /// Phonon created, scattered at −Ω_α; weight ∝ n + 1.
    Stokes,
    /// Phonon absorbed, scattered at +Ω_α; weight ∝ n.
    #[serde(rename = "antistokes")]
    AntiStokes,
}

/// Emission spectrum on an angular-frequency grid.
///
/// `density` is per unit dω/2π, so the area ∫ S dω/2π equals ⟨b†b⟩ for the
/// anti-Stokes and ⟨bb†⟩ for the Stokes sideband, and the two add to 2n + 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionSpectrum {
    pub which: Sideband,
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
}

impl EmissionSpectrum {
    /// Trapezoidal area in dω/2π.
    pub fn area(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(w, s)| 0.5 * (s[0] + s[1]) * (w[1] - w[0]))
            .sum::<f64>()
            / std::f64::consts::TAU
    }
}

/// Sideband spectra from the quantum regression rule.
///
/// With the convention S(ω) = ∫ C(t) e^{−iωt} dt, the anti-Stokes correlation
/// C(t) = ⟨b†(t) b(0)⟩ oscillates as e^{+iΩt} and peaks at +Ω_α, and the
/// Stokes correlation ⟨b(t) b†(0)⟩ peaks at −Ω_α. Each grid point costs one
/// banded factorization of L − iω; points are evaluated in parallel.
pub fn emission_spectrum(l: &Liouvillian, which: Sideband, omega_grid: &[f64]) -> Result<EmissionSpectrum, LindbladError> {
    if let Some(w) = omega_grid.iter().find(|w| !w.is_finite()) {
        return Err(LindbladError::InvalidInput {
            field: "omega_grid".into(),
            value: *w,
            reason: "must be finite",
        });
    }
    let rho = steady_state(l)?;
    let space = l.space();
    let b = space.b();
    let bd = b.adjoint();
    // C(t) = Tr[left · e^{Lt}(right ρ)]
    let (left, right) = match which {
        Sideband::AntiStokes => (bd, b),
        Sideband::Stokes => (b.clone(), bd),
    };
    let seed = DensityMatrix::from_raw(space, &right * rho.matrix())?.to_vec();
    let norm = l.norm_inf();

    let density = omega_grid
        .par_iter()
        .map(|&w| {
            let lu = l
                .band(Complex64::new(0.0, -w), false)?
                .factor(1e-14 * norm)
                .map_err(|_| LindbladError::SingularFrequency { omega: w })?;
            let mut y: Vec<Complex64> = seed.iter().map(|v| -v).collect();
            lu.solve_in_place(&mut y);
            let ym: DMatrix<Complex64> = DensityMatrix::from_vec(space, &y).matrix().clone();
            Ok(2.0 * (&left * ym).trace().re)
        })
        .collect::<Result<Vec<f64>, LindbladError>>()?;

    Ok(EmissionSpectrum {
        which,
        omega: omega_grid.to_vec(),
        density,
    })
}
