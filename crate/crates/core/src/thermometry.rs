//! Sideband thermometry: Lorentzian synthesis and fitting, asymmetry
//! inversion, detector-response correction and detection calibration.
//!
//! Spectra are in arbitrary units per Hz. A sideband area is therefore in
//! units, and for an ideal detector the Stokes and anti-Stokes areas are
//! n + 1 and n in the same units.
//!
//! The detector response enters only as the responsivity ratio
//! q = c₋/c₊. Sideband areas are modelled as a_S ∝ n + 1 and a_aS ∝ q·n, so
//! the naive occupation n_inf = a/(1 − a), a = a_aS/a_S, is undone exactly by
//! [`correct_detector_response`], n = n_inf / (q(n_inf + 1) − n_inf).

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{levenberg_marquardt, FitStatus, LmOptions};
use crate::lindblad::{EmissionSpectrum, Sideband};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermometryError {
    #[error("`{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("nonphysical asymmetry: anti-Stokes area {a_as} is not below Stokes area {a_s}")]
    NonphysicalAsymmetry { a_as: f64, a_s: f64 },
    #[error("detector correction undefined: denominator {denominator} <= 0")]
    CorrectionUndefined { denominator: f64 },
    #[error("fit window holds {points} points, need at least {min}")]
    WindowTooSmall { points: usize, min: usize },
    #[error("fit window is flat: no peak above the floor")]
    FlatWindow,
    #[error("fit window contains several peaks at {peaks_hz:?} Hz")]
    AmbiguousPeaks { peaks_hz: Vec<f64> },
    #[error("single Lorentzian does not describe the window: largest residual is {fraction:.3} of the peak height")]
    ModelMismatch { fraction: f64 },
    #[error("Lorentzian fit did not converge ({status:?})")]
    NotConverged { status: FitStatus },
    #[error("spectrum I/O: {0}")]
    Io(String),
}

fn invalid(field: &'static str, value: f64, reason: &'static str) -> ThermometryError {
    ThermometryError::InvalidInput { field, value, reason }
}

/// n = a/(1 − a) with a = a_aS/a_S.
pub fn occupation_from_asymmetry<T: Real>(a_as: T, a_s: T) -> Result<T, ThermometryError> {
    if !(a_as >= T::zero()) || !a_as.is_finite() {
        return Err(invalid("a_as", a_as.to_f64_lossy(), "must be finite and >= 0"));
    }
    if !(a_s > T::zero()) || !a_s.is_finite() {
        return Err(invalid("a_s", a_s.to_f64_lossy(), "must be finite and > 0"));
    }
    if a_as >= a_s {
        return Err(ThermometryError::NonphysicalAsymmetry {
            a_as: a_as.to_f64_lossy(),
            a_s: a_s.to_f64_lossy(),
        });
    }
    let a = a_as / a_s;
    Ok(a / (T::one() - a))
}

/// Responsivity ratio c₋/c₊ of the detection chain at the Stokes and
/// anti-Stokes frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse<T> {
    c_ratio: T,
}

impl<T: Real> DetectorResponse<T> {
    pub fn new(c_ratio: T) -> Result<Self, ThermometryError> {
        if !(c_ratio > T::zero()) || !c_ratio.is_finite() {
            return Err(invalid("c_ratio", c_ratio.to_f64_lossy(), "must be finite and > 0"));
        }
        Ok(Self { c_ratio })
    }

    pub fn flat() -> Self {
        Self { c_ratio: T::one() }
    }

    pub fn c_ratio(&self) -> T {
        self.c_ratio
    }
}

/// True occupation from the naive asymmetry estimate.
pub fn correct_detector_response<T: Real>(n_inf: T, resp: DetectorResponse<T>) -> Result<T, ThermometryError> {
    if !(n_inf >= T::zero()) || !n_inf.is_finite() {
        return Err(invalid("n_inf", n_inf.to_f64_lossy(), "must be finite and >= 0"));
    }
    let denominator = resp.c_ratio * (n_inf + T::one()) - n_inf;
    if !(denominator > T::zero()) {
        return Err(ThermometryError::CorrectionUndefined {
            denominator: denominator.to_f64_lossy(),
        });
    }
    Ok(n_inf / denominator)
}

/// Measured sideband areas (Stokes, anti-Stokes) for true occupation `n`.
pub fn sideband_areas<T: Real>(n: T, resp: DetectorResponse<T>) -> (T, T) {
    (n + T::one(), resp.c_ratio * n)
}

/// Detection calibration factor C_n = (2n + 1)/area, occupation per area.
pub fn calibration_factor<T: Real>(n_ref: T, area: T) -> Result<T, ThermometryError> {
    if !(n_ref >= T::zero()) || !n_ref.is_finite() {
        return Err(invalid("n_ref", n_ref.to_f64_lossy(), "must be finite and >= 0"));
    }
    if !(area > T::zero()) || !area.is_finite() {
        return Err(invalid("area", area.to_f64_lossy(), "must be finite and > 0"));
    }
    Ok((T::lit(2.0) * n_ref + T::one()) / area)
}

/// Power spectrum on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz, strictly increasing.
    pub freq: Vec<f64>,
    /// Arbitrary units per Hz, non-negative.
    pub psd: Vec<f64>,
    pub noise_floor: f64,
}

impl Spectrum {
    pub fn new(freq: Vec<f64>, psd: Vec<f64>, noise_floor: f64) -> Result<Self, ThermometryError> {
        let s = Self { freq, psd, noise_floor };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ThermometryError> {
        if self.freq.len() != self.psd.len() {
            return Err(invalid("psd", self.psd.len() as f64, "length differs from freq"));
        }
        if let Some(w) = self.freq.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(invalid("freq", w[1], "must be strictly increasing"));
        }
        if let Some(v) = self.freq.iter().find(|v| !v.is_finite()) {
            return Err(invalid("freq", *v, "must be finite"));
        }
        if let Some(v) = self.psd.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(invalid("psd", *v, "must be finite and >= 0"));
        }
        if !(self.noise_floor >= 0.0) || !self.noise_floor.is_finite() {
            return Err(invalid("noise_floor", self.noise_floor, "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Adds Gaussian noise of standard deviation `sigma` to every point.
    /// Fails if a point would turn negative.
    pub fn with_noise<R: Rng>(&self, sigma: f64, rng: &mut R) -> Result<Self, ThermometryError> {
        let normal = Normal::new(0.0, sigma).map_err(|_| invalid("sigma", sigma, "must be finite and >= 0"))?;
        let psd = self.psd.iter().map(|v| v + normal.sample(rng)).collect();
        Self::new(self.freq.clone(), psd, self.noise_floor)
    }

    /// Two-column CSV, `freq [Hz],psd [arb/Hz]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq [Hz],psd [arb/Hz]")?;
        for (f, p) in self.freq.iter().zip(&self.psd) {
            writeln!(w, "{f:.8e},{p:.8e}")?;
        }
        Ok(())
    }

    /// Reads two-column CSV. A non-numeric first line is taken as a header.
    pub fn read_csv<R: BufRead>(r: R, noise_floor: f64) -> Result<Self, ThermometryError> {
        let mut freq = Vec::new();
        let mut psd = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| ThermometryError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(ThermometryError::Io(format!("line {}: expected 2 columns, found {}", k + 1, cols.len())));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(f), Ok(p)) => {
                    freq.push(f);
                    psd.push(p);
                }
                _ if k == 0 => continue,
                _ => return Err(ThermometryError::Io(format!("line {}: not a number", k + 1))),
            }
        }
        Self::new(freq, psd, noise_floor)
    }
}

impl From<&EmissionSpectrum> for Spectrum {
    /// ω → ω/2π; the density is already per Hz. Round-off negatives are clipped.
    fn from(s: &EmissionSpectrum) -> Self {
        Self {
            freq: s.omega.iter().map(|w| w / std::f64::consts::TAU).collect(),
            psd: s.density.iter().map(|v| v.max(0.0)).collect(),
            noise_floor: 0.0,
        }
    }
}

/// Grid density for [`synthesize_sidebands`].
pub const POINTS_PER_LINEWIDTH: f64 = 20.0;
const MAX_SYNTH_POINTS: usize = 2_000_000;

/// Lorentzian with the given area, FWHM and center, all in Hz.
pub fn lorentzian(f: f64, center: f64, fwhm: f64, area: f64) -> f64 {
    let hw = fwhm / 2.0;
    area / std::f64::consts::PI * hw / ((f - center).powi(2) + hw * hw)
}

/// Stokes line at −Ω_α/2π with area n + 1 and anti-Stokes line at +Ω_α/2π
/// with area (c₋/c₊)·n, common FWHM γ_opt/2π, on a flat floor. The grid spans
/// ±(Ω_α + 10γ_opt)/2π with 20 points per linewidth.
pub fn synthesize_sidebands(
    n: f64,
    gamma_opt: f64,
    omega_alpha: f64,
    noise_floor: f64,
    resp: DetectorResponse<f64>,
) -> Result<Spectrum, ThermometryError> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(invalid("n", n, "must be finite and >= 0"));
    }
    if !(gamma_opt > 0.0) || !gamma_opt.is_finite() {
        return Err(invalid("gamma_opt", gamma_opt, "must be finite and > 0"));
    }
    if !(omega_alpha > 0.0) || !omega_alpha.is_finite() {
        return Err(invalid("omega_alpha", omega_alpha, "must be finite and > 0"));
    }
    let tau = std::f64::consts::TAU;
    let (fw, f0) = (gamma_opt / tau, omega_alpha / tau);
    let half_span = f0 + 10.0 * fw;
    let points = ((2.0 * half_span / (fw / POINTS_PER_LINEWIDTH)).ceil() as usize + 1).max(3);
    if points > MAX_SYNTH_POINTS {
        return Err(invalid("gamma_opt", gamma_opt, "linewidth too narrow for the synthesis grid"));
    }
    let (a_s, a_as) = sideband_areas(n, resp);
    let step = 2.0 * half_span / (points - 1) as f64;
    let freq: Vec<f64> = (0..points).map(|k| -half_span + step * k as f64).collect();
    let psd = freq
        .iter()
        .map(|&f| noise_floor + lorentzian(f, -f0, fw, a_s) + lorentzian(f, f0, fw, a_as))
        .collect();
    Spectrum::new(freq, psd, noise_floor)
}

/// Lorentzian fit parameters. Covariance order is (center, fwhm, area, offset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub area: f64,
    pub offset: f64,
    pub covariance: [[f64; 4]; 4],
    pub status: FitStatus,
    pub points: usize,
    pub reduced_chi2: f64,
}

impl LorentzianFit {
    pub fn area_sigma(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

/// Minimum number of grid points inside a fit window.
pub const MIN_WINDOW_POINTS: usize = 20;
/// Smoothed post-fit residual, relative to the fitted peak height, beyond
/// which the window is reported as not described by one Lorentzian. A 5σ
/// noise allowance is added.
pub const MAX_RESIDUAL_FRACTION: f64 = 0.1;

/// Point-noise standard deviation from the median absolute first difference.
fn noise_sigma(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    1.4826 * d[d.len() / 2] / std::f64::consts::SQRT_2
}

fn moving_average(y: &[f64], k: usize) -> Vec<f64> {
    let half = k / 2;
    (0..y.len())
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half + 1).min(y.len()));
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Smoothing kernel in grid points, a fraction of the line width.
fn smoothing_points(fwhm_points: f64, fraction: f64) -> usize {
    ((fwhm_points * fraction) as usize).max(1)
}

/// Maxima of the smoothed excess over the floor that reach a quarter of the
/// highest one and are separated from it by a valley below half their own
/// height. Both criteria carry a 5σ margin on the smoothed noise `noise`.
fn distinct_peaks(f: &[f64], smooth: &[f64], floor: f64, noise: f64, k: usize) -> Vec<f64> {
    let margin = 5.0 * noise;
    let h: Vec<f64> = smooth.iter().map(|v| v - floor).collect();
    let (imax, hmax) = h.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let mut peaks = vec![f[imax]];
    // the smoothed series is noisier where the kernel is cut by the window edge
    let edge = (k / 2).max(1);
    for i in edge..h.len() - edge {
        if i == imax || !(h[i] >= h[i - 1] && h[i] > h[i + 1]) || h[i] < (0.25 * hmax).max(margin) {
            continue;
        }
        let (lo, hi) = if i < imax { (i, imax) } else { (imax, i) };
        let valley = h[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
        if valley < 0.5 * h[i] && h[i] - valley > margin {
            peaks.push(f[i]);
        }
    }
    peaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    peaks.dedup();
    peaks
}

/// Fits `offset + Lorentzian` to the points with `lo ≤ f ≤ hi`.
///
/// Initial values: center at the window maximum, area from the trapezoidal
/// integral above the floor, width from the second moment of the excess.
/// Uncertainties are scaled by the reduced χ² since point errors are not
/// supplied.
pub fn fit_lorentzian(spec: &Spectrum, window: (f64, f64)) -> Result<LorentzianFit, ThermometryError> {
    let (lo, hi) = window;
    let idx: Vec<usize> = (0..spec.len()).filter(|&i| spec.freq[i] >= lo && spec.freq[i] <= hi).collect();
    if idx.len() < MIN_WINDOW_POINTS {
        return Err(ThermometryError::WindowTooSmall {
            points: idx.len(),
            min: MIN_WINDOW_POINTS,
        });
    }
    let f: Vec<f64> = idx.iter().map(|&i| spec.freq[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| spec.psd[i]).collect();

    let percentile = |v: &[f64], q: f64| {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[((sorted.len() - 1) as f64 * q) as usize]
    };
    let (rough_floor, peak) = (percentile(&y, 0.1), percentile(&y, 1.0));
    if !(peak - rough_floor > 1e-12 * peak.abs()) {
        return Err(ThermometryError::FlatWindow);
    }
    let above_half = y.iter().filter(|&&v| v - rough_floor > 0.5 * (peak - rough_floor)).count();
    let k = smoothing_points(above_half as f64, 0.5);
    let smooth = moving_average(&y, k);
    let smooth_noise = noise_sigma(&y) / (k as f64).sqrt();
    // the 10th percentile of Gaussian noise lies 1.28σ below its mean
    let floor = (percentile(&smooth, 0.1) + 1.2816 * smooth_noise).min(percentile(&smooth, 0.5));
    let peaks = distinct_peaks(&f, &smooth, floor, smooth_noise, k);
    if peaks.len() > 1 {
        return Err(ThermometryError::AmbiguousPeaks { peaks_hz: peaks });
    }

    let imax = smooth.iter().enumerate().fold(0, |a, (i, &v)| if v > smooth[a] { i } else { a });
    let c0 = f[imax];
    let excess: Vec<f64> = smooth.iter().map(|v| (v - floor).max(0.0)).collect();
    let area0: f64 = f.windows(2).zip(excess.windows(2)).map(|(w, e)| 0.5 * (e[0] + e[1]) * (w[1] - w[0])).sum();
    let m2: f64 = f
        .windows(2)
        .zip(excess.windows(2))
        .map(|(w, e)| 0.5 * (e[0] * (w[0] - c0).powi(2) + e[1] * (w[1] - c0).powi(2)) * (w[1] - w[0]))
        .sum::<f64>()
        / area0.max(f64::MIN_POSITIVE);
    let df = (f[f.len() - 1] - f[0]) / (f.len() - 1) as f64;
    // a Lorentzian truncated at ±W has second moment ≈ W·fwhm/π
    let half_window = (hi - lo) / 2.0;
    let fwhm0 = (std::f64::consts::PI * m2 / half_window).clamp(2.0 * df, hi - lo);

    let model = |p: &[f64], x: f64| p[3] + lorentzian(x, p[0], p[1].abs(), p[2]);
    let residuals = |p: &[f64]| f.iter().zip(&y).map(|(&x, &v)| model(p, x) - v).collect::<Vec<_>>();
    let scale = [fwhm0, fwhm0, area0.abs().max(f64::MIN_POSITIVE), (peak - floor).abs()];
    let lm = levenberg_marquardt(residuals, &[c0, fwhm0, area0, floor], &scale, &LmOptions::default());
    if lm.status == FitStatus::MaxIter {
        return Err(ThermometryError::NotConverged { status: lm.status });
    }
    let p = &lm.params;
    let height = lorentzian(p[0], p[0], p[1].abs(), p[2]).abs();
    let raw: Vec<f64> = f.iter().zip(&y).map(|(&x, &v)| model(p, x) - v).collect();
    let k = smoothing_points(p[1].abs() / df, 0.25);
    let worst = moving_average(&raw, k).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let allowance = 5.0 * noise_sigma(&y) / (k as f64).sqrt();
    if height > 0.0 && worst > MAX_RESIDUAL_FRACTION * height + allowance {
        return Err(ThermometryError::ModelMismatch { fraction: worst / height });
    }
    let s2 = lm.reduced_chi2();
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = lm.covariance[(i, j)] * s2;
        }
    }
    Ok(LorentzianFit {
        center: p[0],
        fwhm: p[1].abs(),
        area: p[2],
        offset: p[3],
        covariance,
        status: lm.status,
        points: f.len(),
        reduced_chi2: s2,
    })
}

/// Occupation and its standard error from fitted sidebands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidebandOccupation {
    pub n_inf: f64,
    pub n: f64,
    pub sigma_n: f64,
    pub a_stokes: f64,
    pub a_anti_stokes: f64,
}

/// Fits both sidebands in windows of ±`half_width_hz` around ∓Ω_α/2π,
/// inverts the asymmetry and applies the detector correction. The
/// uncertainty propagates the two (independent) area variances.
pub fn occupation_from_spectrum(
    spec: &Spectrum,
    omega_alpha: f64,
    half_width_hz: f64,
    resp: DetectorResponse<f64>,
) -> Result<SidebandOccupation, ThermometryError> {
    let f0 = omega_alpha / std::f64::consts::TAU;
    let stokes = fit_lorentzian(spec, (-f0 - half_width_hz, -f0 + half_width_hz))?;
    let anti = fit_lorentzian(spec, (f0 - half_width_hz, f0 + half_width_hz))?;
    sideband_occupation(&stokes, &anti, resp)
}

pub fn sideband_occupation(
    stokes: &LorentzianFit,
    anti: &LorentzianFit,
    resp: DetectorResponse<f64>,
) -> Result<SidebandOccupation, ThermometryError> {
    let (a_s, a_as) = (stokes.area, anti.area.max(0.0));
    let n_inf = occupation_from_asymmetry(a_as, a_s)?;
    let n = correct_detector_response(n_inf, resp)?;
    // n as a function of r = a_aS/a_S: n = r/(q − r), dn/dr = q/(q − r)²
    let q = resp.c_ratio();
    let r = a_as / a_s;
    let dn_dr = q / (q - r).powi(2);
    let sigma_r = r * ((anti.area_sigma() / a_as.max(f64::MIN_POSITIVE)).powi(2) + (stokes.area_sigma() / a_s).powi(2)).sqrt();
    let sigma_r = if a_as > 0.0 { sigma_r } else { anti.area_sigma() / a_s };
    Ok(SidebandOccupation {
        n_inf,
        n,
        sigma_n: dn_dr * sigma_r,
        a_stokes: a_s,
        a_anti_stokes: a_as,
    })
}

/// Stokes or anti-Stokes line location for a libration frequency, in Hz.
pub fn sideband_center_hz(which: Sideband, omega_alpha: f64) -> f64 {
    let f0 = omega_alpha / std::f64::consts::TAU;
    match which {
        Sideband::Stokes => -f0,
        Sideband::AntiStokes => f0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymmetry_examples() {
        assert_eq!(occupation_from_asymmetry(0.0, 1.0).unwrap(), 0.0);
        assert!((occupation_from_asymmetry(1.0, 3.0).unwrap() - 0.5f64).abs() < 1e-15);
        let n: f64 = occupation_from_asymmetry(0.0385, 1.0).unwrap();
        assert!((n - 0.040).abs() < 5e-4);
        assert!(matches!(
            occupation_from_asymmetry(1.0, 1.0),
            Err(ThermometryError::NonphysicalAsymmetry { .. })
        ));
        let n32: f32 = occupation_from_asymmetry(1.0f32, 3.0).unwrap();
        assert!((n32 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn flat_detector_is_identity() {
        for n in [0.0, 0.1, 0.5, 3.0] {
            assert_eq!(correct_detector_response(n, DetectorResponse::flat()).unwrap(), n);
        }
    }

    #[test]
    fn correction_undefined_when_denominator_vanishes() {
        let r = DetectorResponse::new(0.5).unwrap();
        // 0.5·(n+1) − n ≤ 0 for n ≥ 1
        assert!(matches!(
            correct_detector_response(1.0, r),
            Err(ThermometryError::CorrectionUndefined { .. })
        ));
        assert!(DetectorResponse::new(0.0).is_err());
    }

    #[test]
    fn calibration_examples() {
        assert_eq!(calibration_factor(0.0, 1.0).unwrap(), 1.0);
        assert!(calibration_factor(0.0, 0.0).is_err());
        // an area of 1.67e-16 A² at n = 0.5 formats as 6e15 per A²
        let c = calibration_factor(0.5, 2.0 / 6e15).unwrap();
        assert_eq!(format!("{c:.0e}"), "6e15");
    }

    #[test]
    fn peak_height_over_floor() {
        let s = synthesize_sidebands(1.0, std::f64::consts::TAU * 27e3, std::f64::consts::TAU * 1.1e6, 0.3, DetectorResponse::flat())
            .unwrap();
        let f0 = 1.1e6;
        let k = s.freq.iter().enumerate().min_by(|a, b| (a.1 - f0).abs().partial_cmp(&(b.1 - f0).abs()).unwrap()).unwrap().0;
        let want = 1.0 / (std::f64::consts::PI * 27e3 / 2.0);
        assert!(((s.psd[k] - 0.3) - want).abs() < 1e-3 * want);
    }

    #[test]
    fn csv_round_trip() {
        let s = Spectrum::new(vec![-1.0, 0.5, 2.0], vec![0.1, 2.5e-7, 3.0], 0.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Spectrum::read_csv(buf.as_slice(), 0.0).unwrap();
        assert_eq!(back.freq.len(), 3);
        for (a, b) in back.psd.iter().zip(&s.psd) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
        assert!(Spectrum::read_csv("1,2\n0,3\n".as_bytes(), 0.0).is_err());
    }
}
