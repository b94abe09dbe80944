//! Master-equation oracle on truncated Fock spaces.
//!
//! Two generators are provided: the full libration–cavity model
//! ([`build_two_mode`]) and the libration-only equation left after the cavity
//! has been adiabatically eliminated ([`build_reduced`]). Both are assembled
//! as sparse superoperators acting on the column-stacked density matrix and
//! solved with a banded LU, which keeps the two-mode problem at the default
//! cutoffs (N_b = 14, N_c = 4) well under a second.
//!
//! The composite Hilbert index is `c + N_c·b` (cavity fastest) and the
//! superoperator index of `ρ[i, j]` is `c_l + N_c·c_r + N_c²·(b_l + N_b·b_r)`.
//! Grouping the left and right cavity indices keeps the bandwidth near
//! `N_c²·N_b`.

mod banded;
mod solve;
mod spectrum;
mod superop;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use solve::{
    evolve, evolve_with_budget, steady_state, steady_state_converged, ConvergedSteadyState, SteadyStateSummary,
    DEFAULT_STEP_BUDGET,
};
pub use spectrum::{emission_spectrum, EmissionSpectrum, Sideband};
pub use superop::{build_reduced, build_two_mode, Liouvillian, LiouvillianTerms};

pub const DEFAULT_MAX_DIM: usize = 256;
/// Default libration cutoff; auto-escalated by [`steady_state_converged`].
pub const DEFAULT_N_LIB: usize = 14;
pub const DEFAULT_N_CAV: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LindbladError {
    #[error("cutoff `{field}` = {value} is too small (minimum {min})")]
    CutoffTooSmall {
        field: &'static str,
        value: usize,
        min: usize,
    },
    #[error("Hilbert space dimension {dim} exceeds the configured maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("`{field}` = {value} is invalid: {reason}")]
    InvalidInput {
        field: String,
        value: f64,
        reason: &'static str,
    },
    #[error("operator or state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("steady state is not unique (pivot {pivot:e} at column {column})")]
    NonUniqueSteadyState { column: usize, pivot: f64 },
    #[error("no normalizable steady state: net damping {net_damping:e} with heating {heating:e}")]
    NoNormalizableSteadyState { net_damping: f64, heating: f64 },
    #[error("steady-state residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
    #[error("steady state unconverged in the libration cutoff: N_b = {n_lib}, relative change {relative_change:e}")]
    Unconverged { n_lib: usize, relative_change: f64 },
    #[error("step-size underflow: {required} steps needed, budget is {budget}")]
    StepUnderflow { required: u64, budget: u64 },
    #[error("band storage of {elements} elements exceeds the memory budget")]
    MemoryBudget { elements: usize },
    #[error("frequency {omega} rad/s is a zero mode of the generator")]
    SingularFrequency { omega: f64 },
}

/// Truncation of the libration (`b`) and cavity (`c`) modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FockSpace {
    n_lib: usize,
    n_cav: usize,
    max_dim: usize,
}

impl FockSpace {
    /// `n_cav = 1` is the libration-only space.
    pub fn new(n_lib: usize, n_cav: usize) -> Result<Self, LindbladError> {
        Self::with_max_dim(n_lib, n_cav, DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(n_lib: usize, n_cav: usize, max_dim: usize) -> Result<Self, LindbladError> {
        if n_lib < 2 {
            return Err(LindbladError::CutoffTooSmall {
                field: "n_lib",
                value: n_lib,
                min: 2,
            });
        }
        if n_cav < 1 {
            return Err(LindbladError::CutoffTooSmall {
                field: "n_cav",
                value: n_cav,
                min: 1,
            });
        }
        let dim = n_lib * n_cav;
        if dim > max_dim {
            return Err(LindbladError::DimensionTooLarge { dim, max: max_dim });
        }
        Ok(Self { n_lib, n_cav, max_dim })
    }

    pub fn n_lib(&self) -> usize {
        self.n_lib
    }

    pub fn n_cav(&self) -> usize {
        self.n_cav
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn dim(&self) -> usize {
        self.n_lib * self.n_cav
    }

    pub fn with_n_lib(&self, n_lib: usize) -> Result<Self, LindbladError> {
        Self::with_max_dim(n_lib, self.n_cav, self.max_dim)
    }

    /// Composite index of |b⟩⊗|c⟩.
    #[inline]
    pub fn index(&self, b: usize, c: usize) -> usize {
        c + self.n_cav * b
    }

    #[inline]
    pub(crate) fn split(&self, i: usize) -> (usize, usize) {
        (i / self.n_cav, i % self.n_cav)
    }

    /// Superoperator index of ρ[i, j].
    #[inline]
    pub(crate) fn sup(&self, i: usize, j: usize) -> usize {
        let (bl, cl) = self.split(i);
        let (br, cr) = self.split(j);
        let nc = self.n_cav;
        cl + nc * cr + nc * nc * (bl + self.n_lib * br)
    }

    #[inline]
    pub(crate) fn unsup(&self, k: usize) -> (usize, usize) {
        let nc = self.n_cav;
        let cl = k % nc;
        let cr = (k / nc) % nc;
        let rest = k / (nc * nc);
        let bl = rest % self.n_lib;
        let br = rest / self.n_lib;
        (self.index(bl, cl), self.index(br, cr))
    }

    /// Libration lowering operator b ⊗ 1.
    pub fn b(&self) -> DMatrix<Complex64> {
        lowering(self.n_lib).kronecker(&DMatrix::identity(self.n_cav, self.n_cav))
    }

    /// Cavity lowering operator 1 ⊗ c.
    pub fn c(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.n_lib, self.n_lib).kronecker(&lowering(self.n_cav))
    }

    pub fn identity(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.dim(), self.dim())
    }
}

/// Truncated annihilation operator on `n` levels.
pub fn lowering(n: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Density matrix on a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    rho: DMatrix<Complex64>,
}

/// Tolerances checked by [`DensityMatrix::validate`].
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Validated constructor.
    pub fn new(space: FockSpace, rho: DMatrix<Complex64>) -> Result<Self, LindbladError> {
        let d = Self::from_raw(space, rho)?;
        d.validate()?;
        Ok(d)
    }

    pub(crate) fn from_raw(space: FockSpace, rho: DMatrix<Complex64>) -> Result<Self, LindbladError> {
        let n = space.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(LindbladError::DimensionMismatch {
                expected: n,
                got: rho.nrows().max(rho.ncols()),
            });
        }
        Ok(Self { space, rho })
    }

    /// Pure Fock state |b⟩⊗|c⟩.
    pub fn fock(space: FockSpace, b: usize, c: usize) -> Result<Self, LindbladError> {
        if b >= space.n_lib() || c >= space.n_cav() {
            return Err(LindbladError::InvalidInput {
                field: "fock".into(),
                value: (b.max(c)) as f64,
                reason: "level outside the truncated space",
            });
        }
        let n = space.dim();
        let mut rho = DMatrix::zeros(n, n);
        let i = space.index(b, c);
        rho[(i, i)] = Complex64::new(1.0, 0.0);
        Ok(Self { space, rho })
    }

    /// Thermal libration state with mean occupation `n` (renormalized after
    /// truncation) times the cavity vacuum.
    pub fn thermal_libration(space: FockSpace, n: f64) -> Result<Self, LindbladError> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(LindbladError::InvalidInput {
                field: "n".into(),
                value: n,
                reason: "must be finite and >= 0",
            });
        }
        let ratio = n / (n + 1.0);
        let weights: Vec<f64> = (0..space.n_lib()).map(|k| ratio.powi(k as i32)).collect();
        let z: f64 = weights.iter().sum();
        let dim = space.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for (k, w) in weights.iter().enumerate() {
            let i = space.index(k, 0);
            rho[(i, i)] = Complex64::new(w / z, 0.0);
        }
        Ok(Self { space, rho })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Tr(ρ A).
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Result<Complex64, LindbladError> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(LindbladError::DimensionMismatch {
                expected: self.dim(),
                got: op.nrows(),
            });
        }
        Ok((&self.rho * op).trace())
    }

    /// ⟨b†b⟩.
    pub fn n_lib(&self) -> f64 {
        (0..self.dim()).map(|i| self.space.split(i).0 as f64 * self.rho[(i, i)].re).sum()
    }

    /// ⟨c†c⟩.
    pub fn n_cav(&self) -> f64 {
        (0..self.dim()).map(|i| self.space.split(i).1 as f64 * self.rho[(i, i)].re).sum()
    }

    /// Population of the highest libration level, summed over the cavity.
    pub fn top_libration_population(&self) -> f64 {
        let top = self.space.n_lib() - 1;
        (0..self.space.n_cav())
            .map(|c| {
                let i = self.space.index(top, c);
                self.rho[(i, i)].re
            })
            .sum()
    }

    /// Libration populations P(b), traced over the cavity.
    pub fn libration_populations(&self) -> Vec<f64> {
        (0..self.space.n_lib())
            .map(|b| {
                (0..self.space.n_cav())
                    .map(|c| {
                        let i = self.space.index(b, c);
                        self.rho[(i, i)].re
                    })
                    .sum()
            })
            .collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return Err(LindbladError::InvalidInput {
                field: "rho".into(),
                value: herm,
                reason: "not Hermitian",
            });
        }
        let tr = self.trace();
        if !((tr - 1.0).norm() <= TRACE_TOL) {
            return Err(LindbladError::InvalidInput {
                field: "rho".into(),
                value: tr.re,
                reason: "trace is not 1",
            });
        }
        let lam = self.min_eigenvalue();
        if !(lam >= -POSITIVITY_TOL) {
            return Err(LindbladError::InvalidInput {
                field: "rho".into(),
                value: lam,
                reason: "negative eigenvalue",
            });
        }
        Ok(())
    }

    pub(crate) fn to_vec(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut v = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n {
                v[self.space.sup(i, j)] = self.rho[(i, j)];
            }
        }
        v
    }

    pub(crate) fn from_vec(space: FockSpace, v: &[Complex64]) -> Self {
        let n = space.dim();
        let mut rho = DMatrix::zeros(n, n);
        for (k, &x) in v.iter().enumerate() {
            let (i, j) = space.unsup(k);
            rho[(i, j)] = x;
        }
        Self { space, rho }
    }

    pub(crate) fn hermitize_and_normalize(&mut self) {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = h.trace().re;
        self.rho = h / Complex64::new(tr, 0.0);
    }
}
