//! Hundsdorfer-Verwer ADI with zero Dirichlet edges.
//!
//! The operator is split as `A0 + A1 + A2`: `A1` is the `r`-direction plus the
//! reaction term, `A2` the `v`-direction with the real part of its drift, and
//! `A0` collects the mixed derivative and the imaginary (frequency-driven)
//! `v`-drift. `A0` is always explicit. With `theta = 1/2 + sqrt(3)/6` the
//! scheme stays stable where Peaceman-Rachford with an explicit mixed term
//! does not (large `dt / (dr dv)`).
//!
//! The edge rows are identities with zero right-hand side, so each line
//! reduces to a tridiagonal system on its interior nodes. The `r`-lines are
//! strided in memory and are swept together, one `r` node at a time.

use num_complex::Complex64;

use super::coeffs::CoefficientSet;
use super::grid::{ComplexField, Grid2D};
use super::system::RESIDUAL_TOL;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn hv_theta() -> f64 {
    0.5 + 3f64.sqrt() / 6.0
}

/// Per-node stencil weights of one direction, on `(k - stride, k, k + stride)`.
#[derive(Debug, Clone)]
struct Weights<T> {
    lo: Vec<T>,
    mid: Vec<T>,
    hi: Vec<T>,
}

/// Thomas factors of `I - theta dt A` for every line of one direction, stored
/// per node.
#[derive(Debug, Clone)]
struct Factors {
    sub: Vec<Complex64>,
    diag: Vec<Complex64>,
    sup: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    upper: Vec<Complex64>,
}

pub struct HvStepper {
    grid: Grid2D,
    dt: f64,
    theta: f64,
    r: Weights<Complex64>,
    v: Weights<f64>,
    /// `cross / (4 dr dv)`.
    mixed: Vec<f64>,
    /// `Im(mu_v) / (2 dv)`, applied as `i * mixed_v * (f[j+1] - f[j-1])`.
    mixed_v: Vec<f64>,
    r_factors: Factors,
    v_factors: Factors,
}

impl HvStepper {
    pub fn new(grid: &Grid2D, coeffs: CoefficientSet, dt: f64) -> Result<Self> {
        if coeffs.n != grid.n {
            return Err(Error::Grid(format!("coefficients for n = {} on a grid with n = {}", coeffs.n, grid.n)));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt = {dt} must be positive")));
        }
        let n = grid.n;
        let m = n * n;
        let (dr, dv) = (grid.dr, grid.dv);
        let mut r = Weights { lo: vec![ZERO; m], mid: vec![ZERO; m], hi: vec![ZERO; m] };
        let mut v = Weights { lo: vec![0.0; m], mid: vec![0.0; m], hi: vec![0.0; m] };
        let mut mixed = vec![0.0; m];
        let mut mixed_v = vec![0.0; m];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let (mu, s) = (coeffs.mu_r[k], coeffs.sigma_r[k] / (dr * dr));
                r.lo[k] = s - mu / (2.0 * dr);
                r.mid[k] = coeffs.alpha[k] - 2.0 * s;
                r.hi[k] = s + mu / (2.0 * dr);
                let (mu, s) = (coeffs.mu_v[k].re, coeffs.sigma_v[k] / (dv * dv));
                v.lo[k] = s - mu / (2.0 * dv);
                v.mid[k] = -2.0 * s;
                v.hi[k] = s + mu / (2.0 * dv);
                mixed[k] = coeffs.cross[k] / (4.0 * dr * dv);
                mixed_v[k] = coeffs.mu_v[k].im / (2.0 * dv);
            }
        }
        let theta = hv_theta();
        let s = theta * dt;
        let implicit = |lo: &dyn Fn(usize) -> Complex64, mid: &dyn Fn(usize) -> Complex64, hi: &dyn Fn(usize) -> Complex64| {
            let mut f = Factors {
                sub: vec![ZERO; m],
                diag: vec![ZERO; m],
                sup: vec![ZERO; m],
                inv_pivot: vec![ZERO; m],
                upper: vec![ZERO; m],
            };
            for k in 0..m {
                f.sub[k] = -s * lo(k);
                f.diag[k] = 1.0 - s * mid(k);
                f.sup[k] = -s * hi(k);
            }
            f
        };
        let mut r_factors = implicit(&|k| r.lo[k], &|k| r.mid[k], &|k| r.hi[k]);
        let mut v_factors =
            implicit(&|k| v.lo[k].into(), &|k| v.mid[k].into(), &|k| v.hi[k].into());
        // r-lines: line j, position i, node i * n + j
        factorize(&mut r_factors, n, |line, pos| pos * n + line)?;
        factorize(&mut v_factors, n, |line, pos| line * n + pos)?;
        Ok(HvStepper { grid: grid.clone(), dt, theta, r, v, mixed, mixed_v, r_factors, v_factors })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// `A1 f`, `A2 f` and the full `A f` on interior nodes (edges zero).
    fn apply_all(&self, f: &ComplexField, a1: &mut [Complex64], a2: &mut [Complex64], full: &mut [Complex64]) {
        let n = self.grid.n;
        let x = &f.values;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let r = self.r.lo[k] * x[k - n] + self.r.mid[k] * x[k] + self.r.hi[k] * x[k + n];
                let v = x[k - 1] * self.v.lo[k] + x[k] * self.v.mid[k] + x[k + 1] * self.v.hi[k];
                let d_rv = x[k + n + 1] - x[k - n + 1] - x[k + n - 1] + x[k - n - 1];
                let d_v = x[k + 1] - x[k - 1];
                let m = d_rv * self.mixed[k] + Complex64::new(-d_v.im, d_v.re) * self.mixed_v[k];
                a1[k] = r;
                a2[k] = v;
                full[k] = r + v + m;
            }
        }
    }

    /// One step; `explicit` adds terms to the explicit part (jump integral),
    /// evaluated on `U` and on the predictor.
    pub fn step_with<F>(&self, u: &ComplexField, mut explicit: F) -> Result<ComplexField>
    where
        F: FnMut(&ComplexField) -> Option<ComplexField>,
    {
        let n = self.grid.n;
        let m = n * n;
        let (dt, sdt) = (self.dt, self.theta * self.dt);
        let mut a1 = vec![ZERO; m];
        let mut a2 = vec![ZERO; m];
        let mut f_u = vec![ZERO; m];
        let mut scratch = Scratch::new(n);

        self.apply_all(u, &mut a1, &mut a2, &mut f_u);
        add_interior(&mut f_u, n, explicit(u));

        // predictor: Y0 = U + dt F(U), then one implicit correction per direction
        let mut y0 = u.values.clone();
        let mut y = ComplexField::zeros(n);
        for k in 0..m {
            y0[k] += dt * f_u[k];
            y.values[k] = y0[k] - sdt * a1[k];
        }
        self.solve_r(&mut y.values, &mut scratch)?;
        for k in 0..m {
            y.values[k] -= sdt * a2[k];
        }
        self.solve_v(&mut y.values, &mut scratch)?;

        // corrector around the predicted state
        let mut f_y = vec![ZERO; m];
        self.apply_all(&y, &mut a1, &mut a2, &mut f_y);
        add_interior(&mut f_y, n, explicit(&y));
        let mut z = ComplexField::zeros(n);
        for k in 0..m {
            z.values[k] = y0[k] + 0.5 * dt * (f_y[k] - f_u[k]) - sdt * a1[k];
        }
        self.solve_r(&mut z.values, &mut scratch)?;
        for k in 0..m {
            z.values[k] -= sdt * a2[k];
        }
        self.solve_v(&mut z.values, &mut scratch)?;
        Ok(z)
    }

    pub fn step(&self, u: &ComplexField) -> Result<ComplexField> {
        self.step_with(u, |_| None)
    }

    /// All `r`-lines at once; the sweep runs over `i` with `j` innermost.
    fn solve_r(&self, b: &mut [Complex64], s: &mut Scratch) -> Result<()> {
        let n = self.grid.n;
        let f = &self.r_factors;
        s.rhs.copy_from_slice(b);
        zero_edges(b, n);
        for j in 0..n {
            b[n + j] = b[n + j] * f.inv_pivot[n + j];
        }
        for i in 2..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                b[k] = (b[k] - f.sub[k] * b[k - n]) * f.inv_pivot[k];
            }
        }
        for i in (1..n - 2).rev() {
            for j in 1..n - 1 {
                let k = i * n + j;
                b[k] -= f.upper[k] * b[k + n];
            }
        }
        zero_edges(b, n);
        // residual per line
        s.worst.iter_mut().for_each(|w| *w = 0.0);
        s.scale.iter_mut().for_each(|w| *w = 0.0);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let ax = f.sub[k] * b[k - n] + f.diag[k] * b[k] + f.sup[k] * b[k + n];
                s.worst[j] = s.worst[j].max((ax - s.rhs[k]).norm_sqr());
                s.scale[j] = s.scale[j].max(s.rhs[k].norm_sqr());
            }
        }
        check_residuals(&s.worst, &s.scale)
    }

    fn solve_v(&self, b: &mut [Complex64], s: &mut Scratch) -> Result<()> {
        let n = self.grid.n;
        let f = &self.v_factors;
        s.rhs.copy_from_slice(b);
        zero_edges(b, n);
        for i in 1..n - 1 {
            let row = i * n;
            b[row + 1] *= f.inv_pivot[row + 1];
            for k in row + 2..row + n - 1 {
                b[k] = (b[k] - f.sub[k] * b[k - 1]) * f.inv_pivot[k];
            }
            for k in (row + 1..row + n - 2).rev() {
                b[k] = b[k] - f.upper[k] * b[k + 1];
            }
            let (mut worst, mut scale) = (0.0f64, 0.0f64);
            for k in row + 1..row + n - 1 {
                let ax = f.sub[k] * b[k - 1] + f.diag[k] * b[k] + f.sup[k] * b[k + 1];
                worst = worst.max((ax - s.rhs[k]).norm_sqr());
                scale = scale.max(s.rhs[k].norm_sqr());
            }
            s.worst[i] = worst;
            s.scale[i] = scale;
        }
        s.worst[0] = 0.0;
        s.worst[n - 1] = 0.0;
        check_residuals(&s.worst, &s.scale)
    }
}

struct Scratch {
    rhs: Vec<Complex64>,
    worst: Vec<f64>,
    scale: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { rhs: vec![ZERO; n * n], worst: vec![0.0; n], scale: vec![0.0; n] }
    }
}

/// Thomas elimination on the interior `1..n-1` of every line. The edge rows
/// are identities with zero data, so they drop out of the interior system.
fn factorize(f: &mut Factors, n: usize, node: impl Fn(usize, usize) -> usize) -> Result<()> {
    for line in 1..n - 1 {
        let mut prev_upper = ZERO;
        for pos in 1..n - 1 {
            let k = node(line, pos);
            let piv = if pos == 1 { f.diag[k] } else { f.diag[k] - f.sub[k] * prev_upper };
            if !(piv.norm() > 0.0 && piv.is_finite()) {
                return Err(Error::Singular { row: pos });
            }
            f.inv_pivot[k] = piv.inv();
            f.upper[k] = if pos < n - 2 { f.sup[k] * f.inv_pivot[k] } else { ZERO };
            prev_upper = f.upper[k];
        }
    }
    Ok(())
}

/// Both slices hold squared norms.
fn check_residuals(worst: &[f64], scale: &[f64]) -> Result<()> {
    for (w, s) in worst.iter().zip(scale) {
        if *s > 0.0 && !(*w <= RESIDUAL_TOL * RESIDUAL_TOL * s) {
            return Err(Error::Residual { residual: (w / s).sqrt() });
        }
    }
    Ok(())
}

fn zero_edges(b: &mut [Complex64], n: usize) {
    for k in 0..n {
        b[k] = ZERO;
        b[(n - 1) * n + k] = ZERO;
        b[k * n] = ZERO;
        b[k * n + n - 1] = ZERO;
    }
}

fn add_interior(f: &mut [Complex64], n: usize, extra: Option<ComplexField>) {
    if let Some(e) = extra {
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                f[i * n + j] += e.values[i * n + j];
            }
        }
    }
}
