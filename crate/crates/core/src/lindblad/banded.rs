//! Banded LU with partial pivoting for complex matrices.
//!
//! Liouvillians of a few coupled oscillators are sparse with a bandwidth of a
//! few hundred once the vectorized density matrix is ordered mode by mode, so
//! a band factorization is orders of magnitude cheaper than a dense one. The
//! storage and elimination order follow LAPACK's `gbtf2`/`gbtrs`.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SingularPivot {
    pub column: usize,
    pub magnitude: f64,
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, plus `kl`
/// extra rows of headroom for pivoting fill-in.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut kl = 0;
        let mut ku = 0;
        for &(r, c, _) in triplets {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let ldab = 2 * kl + ku + 1;
        let mut m = Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![Complex64::new(0.0, 0.0); ldab * n],
        };
        for &(r, c, v) in triplets {
            let i = m.idx(r, c);
            m.ab[i] += v;
        }
        m
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        // A[r][c] lives at AB[kl + ku + r - c, c]
        self.kl + self.ku + r + c * self.ldab - c
    }

    /// Factorizes in place. Pivots with magnitude at or below `pivot_tol` are
    /// reported as singular.
    pub fn factor(mut self, pivot_tol: f64) -> Result<BandLu, SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for i in 0..=km {
                let v = self.ab[self.idx(j + i, j)].norm();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best <= pivot_tol {
                return Err(SingularPivot {
                    column: j,
                    magnitude: best,
                });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[self.idx(j, j)];
                for i in 1..=km {
                    let k = self.idx(j + i, j);
                    self.ab[k] *= inv;
                }
                for c in (j + 1)..=ju {
                    let pivot_row = self.ab[self.idx(j, c)];
                    if pivot_row == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    // A[j+i][c] and A[j+i][j] are contiguous in i
                    let col_base = self.idx(j + 1, c);
                    let l_base = self.idx(j + 1, j);
                    for i in 0..km {
                        let l = self.ab[l_base + i];
                        self.ab[col_base + i] -= l * pivot_row;
                    }
                }
            }
        }
        Ok(BandLu {
            m: self,
            ipiv,
            kv,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
    kv: usize,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let lm = m.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != Complex64::new(0.0, 0.0) {
                let base = m.idx(j + 1, j);
                for i in 0..lm {
                    b[j + 1 + i] -= m.ab[base + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.ab[m.idx(j, j)];
            let bj = b[j];
            let top = j.saturating_sub(self.kv);
            for i in top..j {
                b[i] -= m.ab[m.idx(i, j)] * bj;
            }
        }
    }
}
