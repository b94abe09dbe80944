use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::banded::BandMatrix;
use super::{DensityMatrix, FockSpace, LindbladError};
use crate::rates::{self, OperatingPoint, RateSet};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which physical terms a generator contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LiouvillianTerms {
    pub hamiltonian: bool,
    pub cavity_decay: bool,
    pub recoil_dephasing: bool,
    /// Thermal jump operators A₊D[b†] + A₋D[b].
    pub thermal: bool,
}

/// Net libration damping and heating, known for the physical builders.
/// Used to refuse generators without a normalizable steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stability {
    pub net_damping: f64,
    pub heating: f64,
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl Csr {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, Complex64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        // drop exact cancellations, e.g. diagonal terms of commutators
        let mut out = Self {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::with_capacity(indices.len()),
            data: Vec::with_capacity(data.len()),
        };
        for r in 0..n {
            for k in indptr[r]..indptr[r + 1] {
                if data[k] != ZERO {
                    out.indices.push(indices[k]);
                    out.data.push(data[k]);
                }
            }
            out.indptr[r + 1] = out.indices.len();
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.n {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| self.data[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k])))
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }
}

/// Lindblad generator acting on vectorized density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    space: FockSpace,
    matrix: Csr,
    terms: LiouvillianTerms,
    stability: Option<Stability>,
}

/// Upper bound on band-storage elements before a solve is refused (about 1 GB).
pub(crate) const BAND_ELEMENT_BUDGET: usize = 64_000_000;

impl Liouvillian {
    /// General generator −i[H,·] + Σ γ_k D[L_k] − Σ (Γ_k/2)[X_k,[X_k,·]].
    ///
    /// `jumps` are `(rate, L)` pairs and `dephasing` are `(rate, X)` pairs,
    /// with `X` Hermitian. All operators are `space.dim()` square.
    pub fn from_operators(
        space: FockSpace,
        hamiltonian: &DMatrix<Complex64>,
        jumps: &[(f64, DMatrix<Complex64>)],
        dephasing: &[(f64, DMatrix<Complex64>)],
    ) -> Result<Self, LindbladError> {
        let check_op = |m: &DMatrix<Complex64>| -> Result<(), LindbladError> {
            if m.nrows() != space.dim() || m.ncols() != space.dim() {
                return Err(LindbladError::DimensionMismatch {
                    expected: space.dim(),
                    got: m.nrows().max(m.ncols()),
                });
            }
            if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(LindbladError::InvalidInput {
                    field: "operator".into(),
                    value: f64::NAN,
                    reason: "non-finite entry",
                });
            }
            Ok(())
        };
        check_op(hamiltonian)?;
        for (k, (rate, op)) in jumps.iter().chain(dephasing).enumerate() {
            check_op(op)?;
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(LindbladError::InvalidInput {
                    field: format!("rate[{k}]"),
                    value: *rate,
                    reason: "must be finite and >= 0",
                });
            }
        }
        let mut b = SuperBuilder::new(space);
        b.hamiltonian(hamiltonian);
        for (rate, op) in jumps {
            b.dissipator(*rate, op);
        }
        for (rate, op) in dephasing {
            b.double_commutator(*rate / 2.0, op);
        }
        let terms = LiouvillianTerms {
            hamiltonian: hamiltonian.iter().any(|v| *v != ZERO),
            thermal: !jumps.is_empty(),
            recoil_dephasing: !dephasing.is_empty(),
            cavity_decay: false,
        };
        Ok(b.finish(terms, None))
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Superoperator dimension N².
    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn terms(&self) -> LiouvillianTerms {
        self.terms
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn norm_inf(&self) -> f64 {
        self.matrix.norm_inf()
    }

    pub(crate) fn csr(&self) -> &Csr {
        &self.matrix
    }

    pub(crate) fn stability(&self) -> Option<Stability> {
        self.stability
    }

    /// dρ/dt = L ρ as a matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DMatrix<Complex64>, LindbladError> {
        if rho.space() != self.space {
            return Err(LindbladError::DimensionMismatch {
                expected: self.space.dim(),
                got: rho.dim(),
            });
        }
        let x = rho.to_vec();
        let mut y = vec![ZERO; x.len()];
        self.matrix.matvec(&x, &mut y);
        Ok(DensityMatrix::from_vec(self.space, &y).matrix().clone())
    }

    /// Largest |Σ_i L[(i,i), k]| over columns: zero for a trace-preserving generator.
    pub fn trace_preservation_error(&self) -> f64 {
        let n = self.space.dim();
        let mut diag_row = vec![false; self.dim()];
        for i in 0..n {
            diag_row[self.space.sup(i, i)] = true;
        }
        let mut col_sums = vec![ZERO; self.dim()];
        for (r, c, v) in self.matrix.triplets() {
            if diag_row[r] {
                col_sums[c] += v;
            }
        }
        col_sums.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Band matrix of L + shift·1, optionally without the first row and column.
    pub(crate) fn band(&self, shift: Complex64, drop_first: bool) -> Result<BandMatrix, LindbladError> {
        let off = usize::from(drop_first);
        let n = self.dim() - off;
        let mut t: Vec<(usize, usize, Complex64)> = self
            .matrix
            .triplets()
            .filter(|&(r, c, _)| r >= off && c >= off)
            .map(|(r, c, v)| (r - off, c - off, v))
            .collect();
        if shift != ZERO {
            t.extend((0..n).map(|k| (k, k, shift)));
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for &(r, c, _) in &t {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let elements = (2 * kl + ku + 1) * n;
        if elements > BAND_ELEMENT_BUDGET {
            return Err(LindbladError::MemoryBudget { elements });
        }
        Ok(BandMatrix::from_triplets(n, &t))
    }
}

struct SuperBuilder {
    space: FockSpace,
    triplets: Vec<(usize, usize, Complex64)>,
    identity: Vec<(usize, usize, Complex64)>,
}

fn nonzeros(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

impl SuperBuilder {
    fn new(space: FockSpace) -> Self {
        let identity = (0..space.dim()).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect();
        Self {
            space,
            triplets: Vec::new(),
            identity,
        }
    }

    /// Adds coef · A ρ B.
    fn sandwich(&mut self, coef: Complex64, a: &[(usize, usize, Complex64)], b: &[(usize, usize, Complex64)]) {
        if coef == ZERO {
            return;
        }
        for &(i, k, av) in a {
            for &(l, j, bv) in b {
                let row = self.space.sup(i, j);
                let col = self.space.sup(k, l);
                self.triplets.push((row, col, coef * av * bv));
            }
        }
    }

    fn hamiltonian(&mut self, h: &DMatrix<Complex64>) {
        let hn = nonzeros(h);
        let id = self.identity.clone();
        self.sandwich(Complex64::new(0.0, -1.0), &hn, &id);
        self.sandwich(Complex64::new(0.0, 1.0), &id, &hn);
    }

    /// rate · (a ρ a† − ½{a†a, ρ}).
    fn dissipator(&mut self, rate: f64, a: &DMatrix<Complex64>) {
        if rate == 0.0 {
            return;
        }
        let ad = a.adjoint();
        let ada = nonzeros(&(&ad * a));
        let (an, adn) = (nonzeros(a), nonzeros(&ad));
        let id = self.identity.clone();
        self.sandwich(Complex64::new(rate, 0.0), &an, &adn);
        self.sandwich(Complex64::new(-rate / 2.0, 0.0), &ada, &id);
        self.sandwich(Complex64::new(-rate / 2.0, 0.0), &id, &ada);
    }

    /// −g [x, [x, ρ]] = −g (x²ρ − 2xρx + ρx²).
    fn double_commutator(&mut self, g: f64, x: &DMatrix<Complex64>) {
        if g == 0.0 {
            return;
        }
        let xn = nonzeros(x);
        let x2 = nonzeros(&(x * x));
        let id = self.identity.clone();
        self.sandwich(Complex64::new(-g, 0.0), &x2, &id);
        self.sandwich(Complex64::new(2.0 * g, 0.0), &xn, &xn);
        self.sandwich(Complex64::new(-g, 0.0), &id, &x2);
    }

    fn finish(self, terms: LiouvillianTerms, stability: Option<Stability>) -> Liouvillian {
        let n = self.space.dim();
        Liouvillian {
            space: self.space,
            matrix: Csr::from_triplets(n * n, self.triplets),
            terms,
            stability,
        }
    }
}

fn invalid(field: &str, value: f64, reason: &'static str) -> LindbladError {
    LindbladError::InvalidInput {
        field: field.to_string(),
        value,
        reason,
    }
}

/// Full libration–cavity generator in the displaced frame.
///
/// H = Ω b†b + ξ x + Δ c†c + G x (c + c†) with x = b + b†, cavity decay
/// κ D[c], and x-dephasing at Γ_BA + Γ_φ: the phase-noise drive enters only
/// through its averaged heating rate.
///
/// The cavity decay uses the full energy decay rate κ. With that choice the
/// mean field obeys dα/dt = −(iΔ + κ/2)α and adiabatic elimination reproduces
/// the sideband rates of [`rates::sideband_rates`].
pub fn build_two_mode(op: &OperatingPoint<f64>, space: FockSpace, xi_drive: f64) -> Result<Liouvillian, LindbladError> {
    if space.n_cav() < 2 {
        return Err(LindbladError::CutoffTooSmall {
            field: "n_cav",
            value: space.n_cav(),
            min: 2,
        });
    }
    op.validate().map_err(rate_error)?;
    if !xi_drive.is_finite() {
        return Err(invalid("xi_drive", xi_drive, "must be finite"));
    }
    let gamma_phi = rates::phase_noise_heating(op).map_err(rate_error)?;
    let (a_plus, a_minus) = rates::sideband_rates(op).map_err(rate_error)?;

    let b = space.b();
    let c = space.c();
    let x = &b + b.adjoint();
    let cx = &c + c.adjoint();
    let re = |v: f64| Complex64::new(v, 0.0);
    let h = b.adjoint() * &b * re(op.omega_alpha)
        + &x * re(xi_drive)
        + c.adjoint() * &c * re(op.detuning)
        + &x * &cx * re(op.coupling_g);

    let dephasing = op.recoil_gamma_ba + gamma_phi;
    let mut sb = SuperBuilder::new(space);
    sb.hamiltonian(&h);
    sb.dissipator(op.kappa, &c);
    sb.double_commutator(dephasing / 2.0, &x);
    let terms = LiouvillianTerms {
        hamiltonian: true,
        cavity_decay: true,
        recoil_dephasing: dephasing > 0.0,
        thermal: false,
    };
    let stability = Stability {
        net_damping: a_minus - a_plus,
        heating: dephasing,
    };
    Ok(sb.finish(terms, Some(stability)))
}

/// Libration-only generator after adiabatic elimination:
/// −i[Ω b†b, ·] − ((Γ_BA + Γ_φ)/2)[x,[x,·]] + A₊D[b†] + A₋D[b].
pub fn build_reduced(rates: &RateSet<f64>, omega_alpha: f64, space: FockSpace) -> Result<Liouvillian, LindbladError> {
    if space.n_cav() != 1 {
        return Err(invalid("n_cav", space.n_cav() as f64, "reduced equation needs n_cav = 1"));
    }
    let fields = [
        ("omega_alpha", omega_alpha),
        ("recoil_gamma_ba", rates.recoil_gamma_ba),
        ("gamma_phi", rates.gamma_phi),
        ("a_plus", rates.a_plus),
        ("a_minus", rates.a_minus),
    ];
    for (name, v) in fields {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(name, v, "must be finite and >= 0"));
        }
    }
    let b = space.b();
    let x = &b + b.adjoint();
    let h = b.adjoint() * &b * Complex64::new(omega_alpha, 0.0);
    let dephasing = rates.recoil_gamma_ba + rates.gamma_phi;

    let mut sb = SuperBuilder::new(space);
    sb.hamiltonian(&h);
    sb.double_commutator(dephasing / 2.0, &x);
    sb.dissipator(rates.a_plus, &b.adjoint());
    sb.dissipator(rates.a_minus, &b);
    let terms = LiouvillianTerms {
        hamiltonian: omega_alpha != 0.0,
        cavity_decay: false,
        recoil_dephasing: dephasing > 0.0,
        thermal: rates.a_plus > 0.0 || rates.a_minus > 0.0,
    };
    let stability = Stability {
        net_damping: rates.a_minus - rates.a_plus,
        heating: dephasing + rates.a_plus,
    };
    Ok(sb.finish(terms, Some(stability)))
}

fn rate_error(e: rates::RateError) -> LindbladError {
    match e {
        rates::RateError::InvalidInput { field, value, reason } => invalid(field, value, reason),
        _ => invalid("operating_point", f64::NAN, "rates could not be evaluated"),
    }
}
