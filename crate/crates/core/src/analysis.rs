//! Parameter scans and parameter-extraction fits built on the rate model.
//!
//! Inputs are in rad/s. The cavity drive Λ is held fixed along a detuning
//! scan, so the cavity occupation follows Λ²/(Δ² + (κ/2)²) and equals `ncav0`
//! at the reference detuning. Along a position scan G = G₀ sin φ and
//! n_cav = N₀ sin² φ.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{levenberg_marquardt, FitStatus, LmOptions, LmResult};
use crate::noise_eater::{effective_psd_at_libration, FeedbackParams, NoiseEaterError};
use crate::rates::{steady_state_occupation, RateError};
use crate::{OperatingPoint, RateSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("`{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("empty grid")]
    EmptyGrid,
    #[error("need at least {min} data points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("fit `{model}` did not converge")]
    NotConverged { model: &'static str },
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error(transparent)]
    NoiseEater(#[from] NoiseEaterError),
}

fn invalid(field: &'static str, value: f64, reason: &'static str) -> AnalysisError {
    AnalysisError::InvalidInput { field, value, reason }
}

/// Rate-model parameters for scans, all rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub omega_alpha: f64,
    pub kappa: f64,
    /// Reference detuning Δ at which the cavity holds `ncav0` photons.
    pub detuning: f64,
    /// Coupling at the antinode, G = G₀ sin φ.
    pub coupling_g0: f64,
    pub recoil_gamma_ba: f64,
    /// Cavity occupation at the antinode and the reference detuning.
    pub ncav0: f64,
    /// Open-loop phase-noise intensity S, rad²/s.
    pub psd_s: f64,
    /// Standing-wave phase k·y_eq.
    pub phase_phi: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let fields = [
            ("omega_alpha", self.omega_alpha, true),
            ("kappa", self.kappa, true),
            ("detuning", self.detuning, false),
            ("coupling_g0", self.coupling_g0, false),
            ("recoil_gamma_ba", self.recoil_gamma_ba, false),
            ("ncav0", self.ncav0, false),
            ("psd_s", self.psd_s, false),
        ];
        for (name, v, strict) in fields {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return Err(invalid(name, v, if strict { "must be finite and > 0" } else { "must be finite and >= 0" }));
            }
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.phase_phi) {
            return Err(invalid("phase_phi", self.phase_phi, "must lie in [0, pi/2]"));
        }
        Ok(())
    }

    /// Operating point at phase φ, detuning Δ and phase-noise intensity S.
    pub fn operating_point_at(&self, phi: f64, detuning: f64, psd_s: f64) -> OperatingPoint {
        let s = phi.sin();
        OperatingPoint {
            omega_alpha: self.omega_alpha,
            kappa: self.kappa,
            detuning,
            coupling_g: self.coupling_g0 * s,
            recoil_gamma_ba: self.recoil_gamma_ba,
            psd_s,
            drive_lambda: OperatingPoint::lambda_for_ncav(self.ncav0 * s * s, self.detuning, self.kappa),
        }
    }

    pub fn operating_point(&self) -> OperatingPoint {
        self.operating_point_at(self.phase_phi, self.detuning, self.psd_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanMetadata {
    pub params: ModelParams,
    pub gain_g: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub variable_name: &'static str,
    pub variable_unit: &'static str,
    pub values: Vec<f64>,
    pub rates: Vec<RateSet>,
    /// Closed-form occupation n0 + n_φ; +∞ where the mode is not cooled.
    pub n_ss: Vec<f64>,
    /// Phase-noise intensity used at each point, rad²/s.
    pub psd_s: Vec<f64>,
    pub metadata: ScanMetadata,
}

impl ScanResult {
    /// Index of the smallest finite occupation.
    pub fn argmin(&self) -> Option<usize> {
        self.n_ss
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
    }
}

fn check_grid(grid: &[f64], field: &'static str, lo: f64, hi: f64, lo_open: bool) -> Result<(), AnalysisError> {
    if grid.is_empty() {
        return Err(AnalysisError::EmptyGrid);
    }
    for &v in grid {
        let above = if lo_open { v > lo } else { v >= lo };
        if !v.is_finite() || !above || v > hi {
            return Err(invalid(field, v, "outside the allowed scan range"));
        }
    }
    Ok(())
}

fn scan(
    variable_name: &'static str,
    variable_unit: &'static str,
    values: &[f64],
    metadata: ScanMetadata,
    point: impl Fn(f64) -> Result<OperatingPoint, AnalysisError> + Sync,
) -> Result<ScanResult, AnalysisError> {
    let rates = values
        .par_iter()
        .map(|&v| Ok(steady_state_occupation(&point(v)?)?))
        .collect::<Result<Vec<RateSet>, AnalysisError>>()?;
    let psd_s = values.iter().map(|&v| point(v).map(|op| op.psd_s)).collect::<Result<_, _>>()?;
    Ok(ScanResult {
        variable_name,
        variable_unit,
        values: values.to_vec(),
        n_ss: rates.iter().map(|r| r.n_ss).collect(),
        rates,
        psd_s,
        metadata,
    })
}

/// Occupation against cavity detuning Δ ∈ (0, 3Ω_α] at the parameters' phase.
pub fn detuning_scan(params: &ModelParams, delta_grid: &[f64]) -> Result<ScanResult, AnalysisError> {
    params.validate()?;
    check_grid(delta_grid, "delta", 0.0, 3.0 * params.omega_alpha, true)?;
    let meta = ScanMetadata {
        params: *params,
        gain_g: None,
        seed: None,
    };
    scan("delta", "rad/s", delta_grid, meta, |d| {
        Ok(params.operating_point_at(params.phase_phi, d, params.psd_s))
    })
}

/// Occupation against standing-wave phase k·y ∈ [0, π/2] with the phase
/// noise filtered by the loop `fb` at Ω_α. φ = 0 rows carry
/// [`OccupationStatus::ZeroCoupling`](crate::rates::OccupationStatus) and +∞.
pub fn position_scan_with(
    params: &ModelParams,
    ky_grid: &[f64],
    fb: &FeedbackParams<f64>,
) -> Result<ScanResult, AnalysisError> {
    params.validate()?;
    fb.validate()?;
    check_grid(ky_grid, "ky", 0.0, std::f64::consts::FRAC_PI_2, false)?;
    let s = effective_psd_at_libration(fb, params.psd_s, params.omega_alpha)?;
    let meta = ScanMetadata {
        params: *params,
        gain_g: Some(fb.gain_g),
        seed: None,
    };
    scan("ky", "rad", ky_grid, meta, |phi| Ok(params.operating_point_at(phi, params.detuning, s)))
}

/// [`position_scan_with`] using the default loop centered on Ω_α.
pub fn position_scan(params: &ModelParams, ky_grid: &[f64], gain_g: f64) -> Result<ScanResult, AnalysisError> {
    let fb = FeedbackParams::with_defaults(gain_g, params.omega_alpha)?;
    position_scan_with(params, ky_grid, &fb)
}

/// Occupation against loop gain at the parameters' phase and detuning.
pub fn gain_scan(params: &ModelParams, gains: &[f64], fb: &FeedbackParams<f64>) -> Result<ScanResult, AnalysisError> {
    params.validate()?;
    check_grid(gains, "gain_g", 0.0, f64::MAX, false)?;
    let meta = ScanMetadata {
        params: *params,
        gain_g: None,
        seed: None,
    };
    scan("gain_g", "1", gains, meta, |g| {
        let s = effective_psd_at_libration(&fb.clone().with_gain(g), params.psd_s, params.omega_alpha)?;
        Ok(params.operating_point_at(params.phase_phi, params.detuning, s))
    })
}

/// Detuning of minimum occupation in [lo, hi] by golden-section search.
pub fn optimal_detuning(params: &ModelParams, lo: f64, hi: f64, tol: f64) -> Result<f64, AnalysisError> {
    params.validate()?;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("hi", hi, "need 0 < lo < hi"));
    }
    let n = |d: f64| -> Result<f64, AnalysisError> {
        let r = steady_state_occupation(&params.operating_point_at(params.phase_phi, d, params.psd_s))?;
        Ok(if r.n_ss.is_finite() { r.n_ss } else { f64::MAX })
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (n(c)?, n(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = n(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = n(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitParameter {
    pub name: &'static str,
    pub unit: &'static str,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub model_name: &'static str,
    pub parameters: Vec<FitParameter>,
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    pub status: FitStatus,
    /// True when σ come from supplied point errors, false when they are
    /// rescaled by the reduced χ².
    pub absolute_sigma: bool,
}

impl FitReport {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

/// One observation with an optional standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: Option<f64>,
}

impl DataPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, sigma: None }
    }

    pub fn with_sigma(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma: Some(sigma) }
    }
}

/// Weights and σ mode for a data set: all points carry σ, or none do.
fn weights(data: &[DataPoint]) -> Result<(Vec<f64>, bool), AnalysisError> {
    let with = data.iter().filter(|d| d.sigma.is_some()).count();
    if with == 0 {
        return Ok((vec![1.0; data.len()], false));
    }
    if with != data.len() {
        return Err(invalid("sigma", with as f64, "give a sigma for every point or for none"));
    }
    let mut w = Vec::with_capacity(data.len());
    for d in data {
        let s = d.sigma.unwrap();
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("sigma", s, "must be finite and > 0"));
        }
        w.push(1.0 / s);
    }
    Ok((w, true))
}

fn check_data(data: &[DataPoint], min: usize) -> Result<(), AnalysisError> {
    if data.len() < min {
        return Err(AnalysisError::TooFewPoints { min, got: data.len() });
    }
    for d in data {
        if !d.x.is_finite() || !d.y.is_finite() {
            return Err(invalid("data", if d.x.is_finite() { d.y } else { d.x }, "must be finite"));
        }
    }
    Ok(())
}

fn report(
    model_name: &'static str,
    names: &[(&'static str, &'static str)],
    lm: &LmResult,
    absolute: bool,
) -> Result<FitReport, AnalysisError> {
    if lm.status == FitStatus::MaxIter {
        return Err(AnalysisError::NotConverged { model: model_name });
    }
    let scale = if absolute { 1.0 } else { lm.reduced_chi2() };
    let sig = lm.sigmas(scale);
    Ok(FitReport {
        model_name,
        parameters: names
            .iter()
            .zip(lm.params.iter().zip(&sig))
            .map(|(&(name, unit), (&value, &sigma))| FitParameter {
                name,
                unit,
                value,
                sigma: if lm.status == FitStatus::Degenerate { f64::INFINITY } else { sigma },
            })
            .collect(),
        residual_norm: lm.chi2.sqrt(),
        reduced_chi2: lm.reduced_chi2(),
        dof: lm.dof,
        status: lm.status,
        absolute_sigma: absolute,
    })
}

/// Cavity frequencies held fixed in the extraction fits, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityFixed {
    pub kappa: f64,
    pub delta: f64,
    pub omega_alpha: f64,
}

impl CavityFixed {
    fn validate(&self) -> Result<(), AnalysisError> {
        for (name, v) in [("kappa", self.kappa), ("omega_alpha", self.omega_alpha)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, v, "must be finite and > 0"));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", self.delta, "must be finite"));
        }
        Ok(())
    }

    /// (A₋ − A₊)/G² for this cavity.
    fn damping_per_g2(&self) -> f64 {
        let hk2 = (self.kappa / 2.0).powi(2);
        self.kappa * (1.0 / ((self.omega_alpha - self.delta).powi(2) + hk2)
            - 1.0 / ((self.omega_alpha + self.delta).powi(2) + hk2))
    }
}

/// Fits G₀ in γ_opt(ky) = |A₋ − A₊| with G = G₀ sin(ky). Points are
/// (ky [rad], γ_opt [rad/s]).
pub fn extract_coupling(data: &[DataPoint], fixed: &CavityFixed) -> Result<FitReport, AnalysisError> {
    check_data(data, 4)?;
    fixed.validate()?;
    let (w, absolute) = weights(data)?;
    let k = fixed.damping_per_g2().abs();
    let model = |g0: f64, ky: f64| g0 * g0 * ky.sin().powi(2) * k;
    let residuals = |p: &[f64]| {
        data.iter()
            .zip(&w)
            .map(|(d, w)| (model(p[0], d.x) - d.y) * w)
            .collect::<Vec<_>>()
    };
    // γ ∝ G₀²: initialise from the mean ratio over informative points
    let informative: Vec<&DataPoint> = data.iter().filter(|d| d.x.sin().abs() > 1e-6).collect();
    if informative.is_empty() || k == 0.0 {
        // every point sits at a node (or the cavity gives no damping): G₀ drops out
        let chi2 = residuals(&[0.0]).iter().map(|r| r * r).sum();
        let lm = LmResult {
            params: vec![0.0],
            covariance: DMatrix::from_element(1, 1, f64::INFINITY),
            chi2,
            dof: data.len() - 1,
            iterations: 0,
            status: FitStatus::Degenerate,
            gradient_cosine: f64::NAN,
        };
        return report("optical_damping", &[("coupling_g0", "rad/s")], &lm, absolute);
    }
    let r: f64 = informative.iter().map(|d| d.y.max(0.0) / d.x.sin().powi(2)).sum::<f64>() / informative.len() as f64;
    let g0 = (r / k).sqrt();
    let scale = [if g0 > 0.0 { g0 } else { fixed.kappa }];
    let lm = levenberg_marquardt(residuals, &[g0.max(1e-3 * scale[0])], &scale, &LmOptions::default());
    let mut rep = report("optical_damping", &[("coupling_g0", "rad/s")], &lm, absolute)?;
    rep.parameters[0].value = rep.parameters[0].value.abs();
    Ok(rep)
}

/// Fixed inputs of [`extract_heating`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatingFixed {
    pub coupling_g0: f64,
    pub cavity: CavityFixed,
    /// rad²/s
    pub psd_s: f64,
}

/// Fits Γ_BA and N₀ in n(ky) = n0 + n_φ with G = G₀ sin(ky) and
/// n_cav = N₀ sin²(ky). Points are (ky [rad], n).
pub fn extract_heating(data: &[DataPoint], fixed: &HeatingFixed) -> Result<FitReport, AnalysisError> {
    check_data(data, 5)?;
    fixed.cavity.validate()?;
    if !(fixed.coupling_g0 > 0.0) || !(fixed.psd_s >= 0.0) {
        return Err(invalid("coupling_g0", fixed.coupling_g0, "need G0 > 0 and S >= 0"));
    }
    let (w, absolute) = weights(data)?;
    let c = &fixed.cavity;
    let base = |ky: f64, gamma_ba: f64, n0: f64| {
        let s = ky.sin();
        OperatingPoint {
            omega_alpha: c.omega_alpha,
            kappa: c.kappa,
            detuning: c.delta,
            coupling_g: fixed.coupling_g0 * s,
            recoil_gamma_ba: gamma_ba,
            psd_s: fixed.psd_s,
            drive_lambda: OperatingPoint::lambda_for_ncav(n0.max(0.0) * s * s, c.delta, c.kappa),
        }
    };
    // both terms are linear in the parameters: n = Γ_BA·u(ky) + N₀·v(ky)
    let u: Vec<f64> = data
        .iter()
        .map(|d| steady_state_occupation(&base(d.x, 1.0, 0.0)).map(|r| r.n0))
        .collect::<Result<_, _>>()?;
    let v: Vec<f64> = data
        .iter()
        .map(|d| steady_state_occupation(&base(d.x, 0.0, 1.0)).map(|r| r.n_phi))
        .collect::<Result<_, _>>()?;
    if u.iter().chain(&v).any(|x| !x.is_finite()) {
        return Err(invalid("ky", 0.0, "points at the node carry no cooling"));
    }
    let residuals = |p: &[f64]| {
        (0..data.len())
            .map(|i| (p[0] * u[i] + p[1] * v[i] - data[i].y) * w[i])
            .collect::<Vec<_>>()
    };
    let (p0, scale) = heating_start(data, &u, &v, &w);
    let lm = levenberg_marquardt(residuals, &p0, &scale, &LmOptions::default());
    report(
        "occupation_vs_position",
        &[("recoil_gamma_ba", "rad/s"), ("ncav0", "1")],
        &lm,
        absolute,
    )
}

/// Weighted linear least-squares start for (Γ_BA, N₀), falling back to a
/// one-parameter start when the N₀ column is empty.
fn heating_start(data: &[DataPoint], u: &[f64], v: &[f64], w: &[f64]) -> ([f64; 2], [f64; 2]) {
    let a = DMatrix::from_fn(data.len(), 2, |i, j| if j == 0 { u[i] * w[i] } else { v[i] * w[i] });
    let b = nalgebra::DVector::from_iterator(data.len(), data.iter().zip(w).map(|(d, w)| d.y * w));
    let svd = a.clone().svd(true, true);
    let p = svd.solve(&b, 1e-12).map(|x| [x[0], x[1]]).unwrap_or([0.0, 0.0]);
    let uu: f64 = u.iter().zip(w).map(|(u, w)| (u * w).powi(2)).sum();
    let ub: f64 = u.iter().zip(data).zip(w).map(|((u, d), w)| u * d.y * w * w).sum();
    let g_only = if uu > 0.0 { ub / uu } else { 1.0 };
    let g = if p[0] > 0.0 { p[0] } else { g_only.abs().max(1e-12) };
    let n = if p[1] > 0.0 { p[1] } else { 0.0 };
    ([g, n], [g.abs().max(1e-12), n.abs().max(1.0)])
}

/// Zero-intercept linear fit γ = b·p of damping against pressure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasDampingFit {
    pub report: FitReport,
    /// rad/s per mbar
    pub slope: f64,
    pub slope_sigma: f64,
}

impl GasDampingFit {
    /// Damping rate extrapolated to `pressure` (mbar), rad/s.
    pub fn gamma_at(&self, pressure: f64) -> f64 {
        self.slope * pressure
    }
}

/// Points are (pressure [mbar], γ [rad/s]).
pub fn gas_damping_fit(data: &[DataPoint]) -> Result<GasDampingFit, AnalysisError> {
    check_data(data, 3)?;
    let (w, absolute) = weights(data)?;
    let sxx: f64 = data.iter().zip(&w).map(|(d, w)| (d.x * w).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("pressure", 0.0, "all pressures are zero"));
    }
    let sxy: f64 = data.iter().zip(&w).map(|(d, w)| d.x * d.y * w * w).sum();
    let slope = sxy / sxx;
    let chi2: f64 = data.iter().zip(&w).map(|(d, w)| ((d.y - slope * d.x) * w).powi(2)).sum();
    let dof = data.len() - 1;
    let var = if absolute { 1.0 / sxx } else { chi2 / dof as f64 / sxx };
    let slope_sigma = var.sqrt();
    Ok(GasDampingFit {
        report: FitReport {
            model_name: "gas_damping",
            parameters: vec![FitParameter {
                name: "slope",
                unit: "rad/s/mbar",
                value: slope,
                sigma: slope_sigma,
            }],
            residual_norm: chi2.sqrt(),
            reduced_chi2: chi2 / dof as f64,
            dof,
            status: FitStatus::Converged,
            absolute_sigma: absolute,
        },
        slope,
        slope_sigma,
    })
}

/// Slopes divided by the smallest one.
pub fn relative_slopes(slopes: &[f64]) -> Vec<f64> {
    let min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    slopes.iter().map(|s| s / min).collect()
}

/// Solution of dn/dt = −γ n + Γ from n(0) = n0:
/// n(t) = n0 + (Γ − γ n0)(1 − e^{−γt})/γ, which reduces to n0 + Γt at γ = 0.
pub fn transient_occupation(n0: f64, gamma_opt: f64, gamma_total: f64, t_grid: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(invalid("n0", n0, "must be finite and >= 0"));
    }
    if !(gamma_opt >= 0.0) || !gamma_opt.is_finite() {
        return Err(invalid("gamma_opt", gamma_opt, "must be finite and >= 0"));
    }
    if !(gamma_total >= 0.0) || !gamma_total.is_finite() {
        return Err(invalid("gamma_total", gamma_total, "must be finite and >= 0"));
    }
    let slope = initial_slope(n0, gamma_opt, gamma_total);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let growth = if gamma_opt == 0.0 { t } else { -(-gamma_opt * t).exp_m1() / gamma_opt };
            n0 + slope * growth
        })
        .collect())
}

/// dn/dt at t = 0, Γ − γ n0.
pub fn initial_slope(n0: f64, gamma_opt: f64, gamma_total: f64) -> f64 {
    gamma_total - gamma_opt * n0
}
