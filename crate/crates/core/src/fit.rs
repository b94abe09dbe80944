//! Levenberg–Marquardt least squares with central-difference Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    /// Normal matrix singular at the optimum: some parameter combination is
    /// not identified by the data.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Jacobian step relative to `|p| + scale`.
    pub rel_step: f64,
    /// Largest cosine between the residual vector and any Jacobian column.
    pub grad_tol: f64,
    /// Relative parameter change below which iteration stops.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_step: 1e-6,
            grad_tol: 1e-8,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ of the weighted residuals. Multiply by `reduced_chi2()` when
    /// the residuals were not divided by known standard deviations.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub status: FitStatus,
    pub gradient_cosine: f64,
}

impl LmResult {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }

    /// Standard deviations from the diagonal of `covariance · scale`.
    pub fn sigmas(&self, scale: f64) -> Vec<f64> {
        (0..self.params.len()).map(|i| (self.covariance[(i, i)] * scale).max(0.0).sqrt()).collect()
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Numeric Jacobian of the residuals by central differences.
pub fn jacobian<F>(residuals: &F, p: &[f64], scale: &[f64], rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = residuals(p).len();
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = rel_step * (p[k].abs() + scale[k]);
        q[k] = p[k] + h;
        let up = residuals(&q);
        q[k] = p[k] - h;
        let down = residuals(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    j
}

fn gradient_cosine(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = j.transpose() * r;
    (0..j.ncols())
        .map(|k| {
            let cn = j.column(k).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[k].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// True when ‖r‖ is at the rounding level of the model values, estimated
/// as max_k ‖J_k‖·(|p_k| + scale_k). The gradient direction is then noise.
fn roundoff_limited(j: &DMatrix<f64>, r: &DVector<f64>, p: &[f64], scale: &[f64]) -> bool {
    let model = (0..j.ncols())
        .map(|k| j.column(k).norm() * (p[k].abs() + scale[k]))
        .fold(0.0, f64::max);
    r.norm() <= 1e3 * f64::EPSILON * model
}

/// Minimizes Σ rᵢ(p)². `scale` sets the Jacobian step for parameters near
/// zero and should be a typical magnitude of each parameter.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], scale: &[f64], opts: &LmOptions) -> LmResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert_eq!(p0.len(), scale.len(), "one scale per parameter");
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = DVector::from_vec(residuals(&p));
    let m = r.len();
    let mut chi2 = sum_sq(r.as_slice());
    let mut lambda = 1e-3;
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;
    let mut j = jacobian(&residuals, &p, scale, opts.rel_step);

    for it in 0..opts.max_iter {
        iterations = it + 1;
        if chi2 == 0.0 || gradient_cosine(&j, &r) <= opts.grad_tol || roundoff_limited(&j, &r, &p, scale) {
            status = FitStatus::Converged;
            break;
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        let mut tiny_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                let d = jtj[(k, k)].max(1e-300);
                a[(k, k)] += lambda * d;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
            let rel = delta
                .iter()
                .zip(&p)
                .zip(scale)
                .map(|((d, x), s)| d.abs() / (x.abs() + s))
                .fold(0.0, f64::max);
            let r_trial = residuals(&trial);
            let chi2_trial = sum_sq(&r_trial);
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                p = trial;
                r = DVector::from_vec(r_trial);
                let improvement = chi2 - chi2_trial;
                chi2 = chi2_trial;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                tiny_step = rel <= opts.step_tol || improvement <= 1e-15 * chi2;
                break;
            }
            lambda *= 4.0;
            if rel <= opts.step_tol {
                tiny_step = true;
                break;
            }
        }
        if accepted {
            j = jacobian(&residuals, &p, scale, opts.rel_step);
        }
        if tiny_step || !accepted {
            status = if gradient_cosine(&j, &r) <= opts.grad_tol.sqrt() || roundoff_limited(&j, &r, &p, scale) {
                FitStatus::Converged
            } else {
                FitStatus::MaxIter
            };
            break;
        }
    }

    let jtj = j.transpose() * &j;
    let covariance = match invert_spd(&jtj) {
        Some(c) => c,
        None => {
            status = FitStatus::Degenerate;
            DMatrix::from_element(n, n, f64::INFINITY)
        }
    };
    LmResult {
        params: p,
        covariance,
        chi2,
        dof: m.saturating_sub(n),
        iterations,
        status,
        gradient_cosine: gradient_cosine(&j, &r),
    }
}

/// Inverse of a symmetric positive-definite matrix, `None` when it is
/// singular to working precision (condition number above ~1e14 after
/// diagonal equilibration).
pub fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|k| a[(k, k)]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let eq = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let eig = eq.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-14 * hi) {
        return None;
    }
    let inv = eq.cholesky()?.inverse();
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * s[i] * s[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_exactly() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.2).collect();
        let res = |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y).collect::<Vec<_>>();
        let fit = levenberg_marquardt(res, &[1.0, 0.5, 0.0], &[1.0, 1.0, 1.0], &LmOptions::default());
        assert_eq!(fit.status, FitStatus::Converged);
        for (got, want) in fit.params.iter().zip([2.5, 1.3, 0.2]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn linear_fit_covariance_matches_closed_form() {
        // y = a x with unit sigmas: var(a) = 1/Σx²
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.1, 1.9, 3.2, 3.9];
        let res = |p: &[f64]| x.iter().zip(&y).map(|(x, y)| p[0] * x - y).collect::<Vec<_>>();
        let fit = levenberg_marquardt(res, &[0.0], &[1.0], &LmOptions::default());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((fit.params[0] - sxy / sxx).abs() < 1e-10);
        assert!((fit.covariance[(0, 0)] - 1.0 / sxx).abs() < 1e-8);
        assert_eq!(fit.dof, 3);
    }

    #[test]
    fn unidentified_parameter_is_degenerate() {
        // only the product p0·p1 enters
        let x = [1.0, 2.0, 3.0];
        let res = |p: &[f64]| x.iter().map(|x| p[0] * p[1] * x - 2.0 * x).collect::<Vec<_>>();
        let fit = levenberg_marquardt(res, &[1.0, 1.0], &[1.0, 1.0], &LmOptions::default());
        assert_eq!(fit.status, FitStatus::Degenerate);
    }
}
