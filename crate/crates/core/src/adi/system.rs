//! Quasi-tridiagonal complex systems: tridiagonal except for one extra entry
//! in the first row (column 2) and one in the last row (column `n - 3`).

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative residual accepted after each solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiTridiagonalSystem {
    /// `sub[k]` multiplies `x[k - 1]` in row `k`; `sub[0]` is unused.
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    /// `sup[k]` multiplies `x[k + 1]` in row `k`; `sup[n - 1]` is unused.
    pub sup: Vec<Complex64>,
    /// Row 0, column 2.
    pub first_extra: Complex64,
    /// Row `n - 1`, column `n - 3`.
    pub last_extra: Complex64,
    pub rhs: Vec<Complex64>,
}

impl QuasiTridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for the stored matrix.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let mut acc = self.diag[k] * x[k];
                if k > 0 {
                    acc += self.sub[k] * x[k - 1];
                }
                if k + 1 < n {
                    acc += self.sup[k] * x[k + 1];
                }
                if k == 0 && n > 2 {
                    acc += self.first_extra * x[2];
                }
                if k == n - 1 && n > 2 {
                    acc += self.last_extra * x[n - 3];
                }
                acc
            })
            .collect()
    }

    /// Row-major dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.len();
        let mut a = vec![vec![ZERO; n]; n];
        for k in 0..n {
            a[k][k] = self.diag[k];
            if k > 0 {
                a[k][k - 1] = self.sub[k];
            }
            if k + 1 < n {
                a[k][k + 1] = self.sup[k];
            }
        }
        if n > 2 {
            a[0][2] += self.first_extra;
            a[n - 1][n - 3] += self.last_extra;
        }
        a
    }

    /// `max |A x - b| / max |b|`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[Complex64]) -> f64 {
        let ax = self.apply(x);
        let res = ax.iter().zip(&self.rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        let scale = self.rhs.iter().fold(0.0f64, |m, b| m.max(b.norm()));
        if scale > 0.0 {
            res / scale
        } else {
            res
        }
    }

    /// `max |A x - rhs|` for an arbitrary right-hand side, without allocating.
    pub fn residual_against(&self, x: &[Complex64], rhs: &[Complex64]) -> f64 {
        let n = x.len();
        let mut worst = 0.0f64;
        for k in 0..n {
            let mut acc = self.diag[k] * x[k];
            if k > 0 {
                acc += self.sub[k] * x[k - 1];
            }
            if k + 1 < n {
                acc += self.sup[k] * x[k + 1];
            }
            if k == 0 && n > 2 {
                acc += self.first_extra * x[2];
            }
            if k == n - 1 && n > 2 {
                acc += self.last_extra * x[n - 3];
            }
            worst = worst.max((acc - rhs[k]).norm_sqr());
        }
        worst.sqrt()
    }

    pub fn factorize(&self) -> Result<Factorized> {
        Factorized::new(&self.sub, &self.diag, &self.sup, self.first_extra, self.last_extra)
    }

    /// Solves the system and checks the residual.
    pub fn solve(&self) -> Result<Vec<Complex64>> {
        let f = self.factorize()?;
        let mut x = self.rhs.clone();
        f.solve_in_place(&mut x);
        let residual = self.relative_residual(&x);
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::Residual { residual });
        }
        Ok(x)
    }
}

/// Thomas factors of a quasi-tridiagonal matrix. The two corner entries are
/// removed by one row operation each (row 0 minus a multiple of row 1, last
/// row minus a multiple of row `n - 2`); the multipliers are kept so the same
/// operations can be replayed on every right-hand side.
#[derive(Debug, Clone)]
pub struct Factorized {
    n: usize,
    sub: Vec<Complex64>,
    /// Reciprocal of the eliminated pivots.
    inv_pivot: Vec<Complex64>,
    /// Modified super-diagonal `c'_k`.
    upper: Vec<Complex64>,
    first_mult: Complex64,
    last_mult: Complex64,
}

impl Factorized {
    pub fn new(
        sub: &[Complex64],
        diag: &[Complex64],
        sup: &[Complex64],
        first_extra: Complex64,
        last_extra: Complex64,
    ) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() != n || sup.len() != n {
            return Err(Error::Config(format!("band lengths {} / {} / {} do not match", sub.len(), n, sup.len())));
        }
        let mut sub = sub.to_vec();
        let mut diag = diag.to_vec();
        let mut sup = sup.to_vec();
        let mut first_mult = ZERO;
        let mut last_mult = ZERO;
        if n > 2 {
            if first_extra != ZERO {
                if sup[1] == ZERO {
                    return Err(Error::Singular { row: 1 });
                }
                first_mult = first_extra / sup[1];
                diag[0] -= first_mult * sub[1];
                sup[0] -= first_mult * diag[1];
            }
            if last_extra != ZERO {
                if sub[n - 2] == ZERO {
                    return Err(Error::Singular { row: n - 2 });
                }
                last_mult = last_extra / sub[n - 2];
                sub[n - 1] -= last_mult * diag[n - 2];
                diag[n - 1] -= last_mult * sup[n - 2];
            }
        } else if first_extra != ZERO || last_extra != ZERO {
            return Err(Error::Config("corner entries need at least 3 rows".into()));
        }

        let mut inv_pivot = vec![ZERO; n];
        let mut upper = vec![ZERO; n];
        for k in 0..n {
            let pivot = if k == 0 { diag[0] } else { diag[k] - sub[k] * upper[k - 1] };
            if pivot == ZERO || !pivot.re.is_finite() || !pivot.im.is_finite() {
                return Err(Error::Singular { row: k });
            }
            inv_pivot[k] = pivot.inv();
            if k + 1 < n {
                upper[k] = sup[k] * inv_pivot[k];
            }
        }
        Ok(Factorized { n, sub, inv_pivot, upper, first_mult, last_mult })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Overwrites `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        if n > 2 {
            if self.first_mult != ZERO {
                b[0] -= self.first_mult * b[1];
            }
            if self.last_mult != ZERO {
                b[n - 1] -= self.last_mult * b[n - 2];
            }
        }
        b[0] *= self.inv_pivot[0];
        for k in 1..n {
            b[k] = (b[k] - self.sub[k] * b[k - 1]) * self.inv_pivot[k];
        }
        for k in (0..n - 1).rev() {
            b[k] = b[k] - self.upper[k] * b[k + 1];
        }
    }
}
