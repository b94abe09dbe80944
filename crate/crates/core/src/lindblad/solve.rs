use num_complex::Complex64;
use serde::Serialize;

use super::superop::Liouvillian;
use super::{DensityMatrix, FockSpace, LindbladError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative pivot size below which the generator is treated as having a
/// degenerate null space.
const NULL_PIVOT_TOL: f64 = 1e-12;
/// Steady-state residual bound relative to ‖L‖∞.
const RESIDUAL_TOL: f64 = 1e-10;

/// Solves L ρ = 0 with Tr ρ = 1.
///
/// The ρ[0,0] component is pinned to one and the remaining N² − 1 equations
/// (the row for ρ[0,0] is implied by trace preservation) are solved by banded
/// LU; the result is then trace normalized and Hermitized. This requires the
/// steady state to populate |0⟩⊗|0⟩, which holds for every damped
/// oscillator model here.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix, LindbladError> {
    if let Some(s) = l.stability() {
        if s.net_damping <= 0.0 && s.heating > 0.0 {
            return Err(LindbladError::NoNormalizableSteadyState {
                net_damping: s.net_damping,
                heating: s.heating,
            });
        }
    }
    let norm = l.norm_inf();
    let n = l.dim();
    let space = l.space();
    if n == 1 {
        return Ok(DensityMatrix::from_vec(space, &[Complex64::new(1.0, 0.0)]));
    }

    let mut rhs = vec![ZERO; n - 1];
    for (r, c, v) in l.csr().triplets() {
        if c == 0 && r > 0 {
            rhs[r - 1] = -v;
        }
    }
    let lu = l
        .band(ZERO, true)?
        .factor(NULL_PIVOT_TOL * norm.max(f64::MIN_POSITIVE))
        .map_err(|p| LindbladError::NonUniqueSteadyState {
            column: p.column + 1,
            pivot: p.magnitude,
        })?;
    lu.solve_in_place(&mut rhs);

    let mut v = Vec::with_capacity(n);
    v.push(Complex64::new(1.0, 0.0));
    v.extend(rhs);
    let mut rho = DensityMatrix::from_vec(space, &v);
    rho.hermitize_and_normalize();

    let residual = residual_norm(l, &rho);
    let bound = RESIDUAL_TOL * norm;
    if !(residual <= bound) {
        return Err(LindbladError::ResidualTooLarge { residual, bound });
    }
    Ok(rho)
}

fn residual_norm(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    let x = rho.to_vec();
    let mut y = vec![ZERO; x.len()];
    l.csr().matvec(&x, &mut y);
    y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Steady state accepted under the cutoff-convergence rule.
#[derive(Debug, Clone)]
pub struct ConvergedSteadyState {
    pub rho: DensityMatrix,
    pub space: FockSpace,
    pub n_lib: f64,
    /// |⟨b†b⟩(N_b + 4) − ⟨b†b⟩(N_b)| / ⟨b†b⟩(N_b).
    pub relative_change: f64,
    pub summary: SteadyStateSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateSummary {
    pub n_lib_cutoff: usize,
    pub n_cav_cutoff: usize,
    pub n_lib: f64,
    pub n_cav: f64,
    pub relative_change: f64,
    pub top_level_population: f64,
}

/// Solves at `start`, then raises N_b by 4 until ⟨b†b⟩ changes by less than
/// `rel_tol` relative. The state at the smaller accepted cutoff is returned.
/// Fails with [`LindbladError::Unconverged`] when the dimension limit is
/// reached first.
pub fn steady_state_converged<F>(build: F, start: FockSpace, rel_tol: f64) -> Result<ConvergedSteadyState, LindbladError>
where
    F: Fn(FockSpace) -> Result<Liouvillian, LindbladError>,
{
    let mut space = start;
    let mut rho = steady_state(&build(space)?)?;
    loop {
        let n = rho.n_lib();
        let next = match space.with_n_lib(space.n_lib() + 4) {
            Ok(s) => s,
            Err(_) => {
                return Err(LindbladError::Unconverged {
                    n_lib: space.n_lib(),
                    relative_change: f64::NAN,
                })
            }
        };
        let rho_next = steady_state(&build(next)?)?;
        let change = (rho_next.n_lib() - n).abs();
        let rel = if n > 0.0 { change / n } else { change };
        if change <= rel_tol * n + 1e-14 {
            let summary = SteadyStateSummary {
                n_lib_cutoff: space.n_lib(),
                n_cav_cutoff: space.n_cav(),
                n_lib: n,
                n_cav: rho.n_cav(),
                relative_change: rel,
                top_level_population: rho.top_libration_population(),
            };
            return Ok(ConvergedSteadyState {
                rho,
                space,
                n_lib: n,
                relative_change: rel,
                summary,
            });
        }
        space = next;
        rho = rho_next;
    }
}

/// Maximum number of RK4 steps [`evolve`] will take.
pub const DEFAULT_STEP_BUDGET: u64 = 20_000_000;

/// Propagates ρ0 over `t_grid` (seconds, increasing; ρ0 is the state at
/// `t_grid[0]`) with classical RK4 at a step no larger than 1/(20‖L‖∞).
pub fn evolve(l: &Liouvillian, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<Vec<DensityMatrix>, LindbladError> {
    evolve_with_budget(l, rho0, t_grid, DEFAULT_STEP_BUDGET)
}

pub fn evolve_with_budget(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    budget: u64,
) -> Result<Vec<DensityMatrix>, LindbladError> {
    if rho0.space() != l.space() {
        return Err(LindbladError::DimensionMismatch {
            expected: l.space().dim(),
            got: rho0.dim(),
        });
    }
    for (k, w) in t_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(LindbladError::InvalidInput {
                field: format!("t_grid[{}]", k + 1),
                value: w[1],
                reason: "time grid must be strictly increasing",
            });
        }
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return Err(LindbladError::InvalidInput {
            field: "t_grid".into(),
            value: *t,
            reason: "must be finite",
        });
    }
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }

    let norm = l.norm_inf();
    let dt_max = if norm > 0.0 { 1.0 / (20.0 * norm) } else { f64::INFINITY };
    let steps: Vec<u64> = t_grid
        .windows(2)
        .map(|w| if norm > 0.0 { ((w[1] - w[0]) / dt_max).ceil().max(1.0) as u64 } else { 0 })
        .collect();
    let required: u64 = steps.iter().sum();
    if required > budget {
        return Err(LindbladError::StepUnderflow { required, budget });
    }
    for (w, &s) in t_grid.windows(2).zip(&steps) {
        // a step that no longer advances t in floating point
        if s > 0 && w[0] + (w[1] - w[0]) / s as f64 == w[0] {
            return Err(LindbladError::StepUnderflow { required, budget });
        }
    }

    let n = l.dim();
    let csr = l.csr();
    let mut y = rho0.to_vec();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(rho0.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    for (w, &s) in t_grid.windows(2).zip(&steps) {
        if s > 0 {
            let h = (w[1] - w[0]) / s as f64;
            for _ in 0..s {
                csr.matvec(&y, &mut k1);
                for i in 0..n {
                    tmp[i] = y[i] + k1[i] * (h / 2.0);
                }
                csr.matvec(&tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + k2[i] * (h / 2.0);
                }
                csr.matvec(&tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + k3[i] * h;
                }
                csr.matvec(&tmp, &mut k4);
                for i in 0..n {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
            }
        }
        out.push(DensityMatrix::from_vec(l.space(), &y));
    }
    Ok(out)
}
