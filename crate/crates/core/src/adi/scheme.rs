//! Peaceman-Rachford half-steps: implicit in `r` with the `v`-direction and
//! mixed terms explicit, then implicit in `v` with the `r`-direction and mixed
//! terms explicit. The reaction coefficient is implicit in both halves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coeffs::CoefficientSet;
use super::grid::{ComplexField, Grid2D};
use super::system::{Factorized, QuasiTridiagonalSystem, RESIDUAL_TOL};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// How the edge rows of each half-step system are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRows {
    /// `f = 0` on all four edges.
    #[default]
    Dirichlet,
    /// First-order one-sided difference equations on the edge rows.
    OneSided,
}

impl std::str::FromStr for BoundaryRows {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(BoundaryRows::Dirichlet),
            "one_sided" | "one-sided" => Ok(BoundaryRows::OneSided),
            other => Err(Error::Config(format!("unknown boundary scheme `{other}`"))),
        }
    }
}

/// Which axis a half-step treats implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    R,
    V,
}

/// Nodes and divisor of a first difference at `k` on an axis of length `n`.
#[inline]
fn first_stencil(k: usize, n: usize, h: f64) -> (usize, usize, f64) {
    if k == 0 {
        (1, 0, h)
    } else if k == n - 1 {
        (n - 1, n - 2, h)
    } else {
        (k + 1, k - 1, 2.0 * h)
    }
}

/// Centre of the three-point second difference used at `k`.
#[inline]
fn second_centre(k: usize, n: usize) -> usize {
    k.clamp(1, n - 2)
}

/// Drift and diffusion along one axis applied to `f` at `(i, j)`, one-sided on
/// the edges.
#[inline]
fn axis_terms(f: &ComplexField, grid: &Grid2D, c: &CoefficientSet, axis: Axis, i: usize, j: usize) -> Complex64 {
    let n = grid.n;
    let k = c.index(i, j);
    match axis {
        Axis::R => {
            let (p, m, h) = first_stencil(i, n, grid.dr);
            let cc = second_centre(i, n);
            let d1 = (f.at(p, j) - f.at(m, j)) / h;
            let d2 = (f.at(cc + 1, j) - 2.0 * f.at(cc, j) + f.at(cc - 1, j)) / (grid.dr * grid.dr);
            c.mu_r[k] * d1 + c.sigma_r[k] * d2
        }
        Axis::V => {
            let (p, m, h) = first_stencil(j, n, grid.dv);
            let cc = second_centre(j, n);
            let d1 = (f.at(i, p) - f.at(i, m)) / h;
            let d2 = (f.at(i, cc + 1) - 2.0 * f.at(i, cc) + f.at(i, cc - 1)) / (grid.dv * grid.dv);
            c.mu_v[k] * d1 + c.sigma_v[k] * d2
        }
    }
}

/// Mixed-derivative term `cross * f_rv` at `(i, j)`: central inside, one-sided
/// in whichever direction meets an edge.
#[inline]
fn cross_term(f: &ComplexField, grid: &Grid2D, c: &CoefficientSet, i: usize, j: usize) -> Complex64 {
    let k = c.index(i, j);
    if c.cross[k] == 0.0 {
        return ZERO;
    }
    let n = grid.n;
    let (ip, im, hr) = first_stencil(i, n, grid.dr);
    let (jp, jm, hv) = first_stencil(j, n, grid.dv);
    let d = (f.at(ip, jp) - f.at(im, jp) - f.at(ip, jm) + f.at(im, jm)) / (hr * hv);
    c.cross[k] * d
}

/// Matrix bands of the implicit system along `axis` for fixed `line`
/// (column `j` for the `r` sweep, row `i` for the `v` sweep). Returns `None`
/// when the whole line is a Dirichlet edge.
fn implicit_bands(
    grid: &Grid2D,
    c: &CoefficientSet,
    dt: f64,
    axis: Axis,
    line: usize,
    boundary: BoundaryRows,
) -> Option<QuasiTridiagonalSystem> {
    let n = grid.n;
    if boundary == BoundaryRows::Dirichlet && (line == 0 || line == n - 1) {
        return None;
    }
    let h = match axis {
        Axis::R => grid.dr,
        Axis::V => grid.dv,
    };
    let node = |k: usize| match axis {
        Axis::R => c.index(k, line),
        Axis::V => c.index(line, k),
    };
    let coeff = |k: usize| {
        let idx = node(k);
        match axis {
            Axis::R => (c.mu_r[idx], c.sigma_r[idx], c.alpha[idx]),
            Axis::V => (c.mu_v[idx], c.sigma_v[idx], c.alpha[idx]),
        }
    };
    let two_dt = Complex64::new(2.0 / dt, 0.0);
    let h2 = h * h;
    let mut sys = QuasiTridiagonalSystem {
        sub: vec![ZERO; n],
        diag: vec![ZERO; n],
        sup: vec![ZERO; n],
        first_extra: ZERO,
        last_extra: ZERO,
        rhs: vec![ZERO; n],
    };
    for k in 1..n - 1 {
        let (mu, sigma, alpha) = coeff(k);
        sys.sub[k] = mu / (2.0 * h) - sigma / h2;
        sys.diag[k] = two_dt + 2.0 * sigma / h2 - alpha;
        sys.sup[k] = -mu / (2.0 * h) - sigma / h2;
    }
    match boundary {
        BoundaryRows::Dirichlet => {
            sys.diag[0] = ONE;
            sys.diag[n - 1] = ONE;
        }
        BoundaryRows::OneSided => {
            let (mu, sigma, alpha) = coeff(0);
            sys.diag[0] = two_dt + mu / h - sigma / h2 - alpha;
            sys.sup[0] = -mu / h + 2.0 * sigma / h2;
            sys.first_extra = Complex64::new(-sigma / h2, 0.0);
            let (mu, sigma, alpha) = coeff(n - 1);
            sys.last_extra = Complex64::new(-sigma / h2, 0.0);
            sys.sub[n - 1] = mu / h + 2.0 * sigma / h2;
            sys.diag[n - 1] = two_dt - mu / h - sigma / h2 - alpha;
        }
    }
    Some(sys)
}

/// Right-hand side entry of a half-step: `2 f / dt` plus the explicit axis,
/// the mixed term and any externally supplied explicit contribution.
#[inline]
#[allow(clippy::too_many_arguments)]
fn rhs_entry(
    f: &ComplexField,
    grid: &Grid2D,
    c: &CoefficientSet,
    dt: f64,
    explicit_axis: Axis,
    i: usize,
    j: usize,
    extra: Option<&ComplexField>,
) -> Complex64 {
    let mut b = f.at(i, j) * (2.0 / dt) + axis_terms(f, grid, c, explicit_axis, i, j) + cross_term(f, grid, c, i, j);
    if let Some(e) = extra {
        b += e.at(i, j);
    }
    b
}

fn zero_edge(boundary: BoundaryRows, rhs: &mut [Complex64]) {
    if boundary == BoundaryRows::Dirichlet {
        let n = rhs.len();
        rhs[0] = ZERO;
        rhs[n - 1] = ZERO;
    }
}

/// System of the `r`-implicit half-step for column `j`.
pub fn assemble_r_system(
    grid: &Grid2D,
    field: &ComplexField,
    coeffs: &CoefficientSet,
    dt: f64,
    j: usize,
    boundary: BoundaryRows,
) -> Option<QuasiTridiagonalSystem> {
    let mut sys = implicit_bands(grid, coeffs, dt, Axis::R, j, boundary)?;
    for i in 0..grid.n {
        sys.rhs[i] = rhs_entry(field, grid, coeffs, dt, Axis::V, i, j, None);
    }
    zero_edge(boundary, &mut sys.rhs);
    Some(sys)
}

/// System of the `v`-implicit half-step for row `i`, built on the half-step
/// field.
pub fn assemble_v_system(
    grid: &Grid2D,
    field_half: &ComplexField,
    coeffs: &CoefficientSet,
    dt: f64,
    i: usize,
    boundary: BoundaryRows,
) -> Option<QuasiTridiagonalSystem> {
    let mut sys = implicit_bands(grid, coeffs, dt, Axis::V, i, boundary)?;
    for j in 0..grid.n {
        sys.rhs[j] = rhs_entry(field_half, grid, coeffs, dt, Axis::R, i, j, None);
    }
    zero_edge(boundary, &mut sys.rhs);
    Some(sys)
}

struct Line {
    system: QuasiTridiagonalSystem,
    factors: Factorized,
}

/// Pre-factorised operator for repeated ADI steps with time-independent
/// coefficients.
pub struct AdiStepper {
    grid: Grid2D,
    coeffs: CoefficientSet,
    dt: f64,
    boundary: BoundaryRows,
    r_lines: Vec<Option<Line>>,
    v_lines: Vec<Option<Line>>,
}

impl AdiStepper {
    pub fn new(grid: &Grid2D, coeffs: CoefficientSet, dt: f64, boundary: BoundaryRows) -> Result<Self> {
        if coeffs.n != grid.n {
            return Err(Error::Grid(format!("coefficients for n = {} on a grid with n = {}", coeffs.n, grid.n)));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt = {dt} must be positive")));
        }
        let lines = |axis: Axis| -> Result<Vec<Option<Line>>> {
            (0..grid.n)
                .map(|line| {
                    implicit_bands(grid, &coeffs, dt, axis, line, boundary)
                        .map(|system| system.factorize().map(|factors| Line { system, factors }))
                        .transpose()
                })
                .collect()
        };
        let r_lines = lines(Axis::R)?;
        let v_lines = lines(Axis::V)?;
        Ok(AdiStepper { grid: grid.clone(), coeffs, dt, boundary, r_lines, v_lines })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    fn sweep(
        &self,
        f: &ComplexField,
        implicit: Axis,
        extra: Option<&ComplexField>,
        out: &mut ComplexField,
        buf: &mut Vec<Complex64>,
        rhs: &mut Vec<Complex64>,
    ) -> Result<()> {
        let n = self.grid.n;
        let explicit = match implicit {
            Axis::R => Axis::V,
            Axis::V => Axis::R,
        };
        let lines = match implicit {
            Axis::R => &self.r_lines,
            Axis::V => &self.v_lines,
        };
        let at = |line: usize, k: usize| match implicit {
            Axis::R => (k, line),
            Axis::V => (line, k),
        };
        for (line, entry) in lines.iter().enumerate() {
            let Some(Line { system, factors }) = entry else {
                for k in 0..n {
                    let (i, j) = at(line, k);
                    out.set(i, j, ZERO);
                }
                continue;
            };
            buf.clear();
            for k in 0..n {
                let (i, j) = at(line, k);
                buf.push(rhs_entry(f, &self.grid, &self.coeffs, self.dt, explicit, i, j, extra));
            }
            zero_edge(self.boundary, buf);
            let rhs_scale = buf.iter().fold(0.0f64, |m, b| m.max(b.norm_sqr())).sqrt();
            rhs.clear();
            rhs.extend_from_slice(buf);
            factors.solve_in_place(buf);
            let residual = system.residual_against(buf, rhs);
            let tol = RESIDUAL_TOL * rhs_scale.max(f64::MIN_POSITIVE);
            if !(residual <= tol) && rhs_scale > 0.0 {
                return Err(Error::Residual { residual: residual / rhs_scale });
            }
            for (k, x) in buf.iter().enumerate() {
                let (i, j) = at(line, k);
                out.set(i, j, *x);
            }
        }
        Ok(())
    }

    /// One full step. `explicit` supplies extra explicit terms evaluated on the
    /// field entering each half-step (the jump integral).
    pub fn step_with<F>(&self, field: &ComplexField, mut explicit: F) -> Result<ComplexField>
    where
        F: FnMut(&ComplexField) -> Option<ComplexField>,
    {
        let n = self.grid.n;
        let mut half = ComplexField::zeros(n);
        let mut next = ComplexField::zeros(n);
        let mut buf = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        let extra = explicit(field);
        self.sweep(field, Axis::R, extra.as_ref(), &mut half, &mut buf, &mut rhs)?;
        let extra = explicit(&half);
        self.sweep(&half, Axis::V, extra.as_ref(), &mut next, &mut buf, &mut rhs)?;
        Ok(next)
    }

    pub fn step(&self, field: &ComplexField) -> Result<ComplexField> {
        self.step_with(field, |_| None)
    }
}

/// One ADI step of `field` with the given coefficients.
pub fn adi_step(
    grid: &Grid2D,
    field: &ComplexField,
    coeffs: &CoefficientSet,
    dt: f64,
    boundary: BoundaryRows,
) -> Result<ComplexField> {
    AdiStepper::new(grid, coeffs.clone(), dt, boundary)?.step(field)
}

/// Full discrete operator `L f` (both axes, mixed term, reaction) with the
/// same one-sided stencils used by the half-steps. Dirichlet edges are
/// returned as zero.
pub fn apply_operator(grid: &Grid2D, c: &CoefficientSet, f: &ComplexField, boundary: BoundaryRows) -> ComplexField {
    let n = grid.n;
    let mut out = ComplexField::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let edge = i == 0 || j == 0 || i == n - 1 || j == n - 1;
            if boundary == BoundaryRows::Dirichlet && edge {
                continue;
            }
            let v = axis_terms(f, grid, c, Axis::R, i, j)
                + axis_terms(f, grid, c, Axis::V, i, j)
                + cross_term(f, grid, c, i, j)
                + c.alpha[c.index(i, j)] * f.at(i, j);
            out.set(i, j, v);
        }
    }
    out
}
