use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform lattice on `[-r_max, r_max] x [0, v_max]` with the same number of
/// nodes on both axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid2D {
    pub r_max: f64,
    pub v_max: f64,
    pub n: usize,
    pub dr: f64,
    pub dv: f64,
    pub r_nodes: Vec<f64>,
    pub v_nodes: Vec<f64>,
    pub idx_r0: usize,
    pub idx_v0: usize,
    /// `|v_nodes[idx_v0] - v0|` for the requested `v0`.
    pub v0_snap: f64,
}

/// Builds the grid and snaps `v0` to the nearest node. `n` must be odd so
/// that `r = 0` is a node.
pub fn build_grid(r_max: f64, v_max: f64, n: usize, v0: f64) -> Result<Grid2D> {
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::Grid(format!("r_max = {r_max} must be positive")));
    }
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(Error::Grid(format!("v_max = {v_max} must be positive")));
    }
    if n < 5 || n % 2 == 0 {
        return Err(Error::Grid(format!("n = {n} must be odd and at least 5")));
    }
    if !(0.0..=v_max).contains(&v0) {
        return Err(Error::Grid(format!("v0 = {v0} outside [0, {v_max}]")));
    }
    let cells = (n - 1) as f64;
    let dr = 2.0 * r_max / cells;
    let dv = v_max / cells;
    let idx_r0 = (n - 1) / 2;
    let r_nodes = (0..n)
        .map(|i| if i == idx_r0 { 0.0 } else { (i as f64 - idx_r0 as f64) * dr })
        .collect();
    let v_nodes: Vec<f64> = (0..n).map(|j| j as f64 * dv).collect();
    let idx_v0 = ((v0 / dv).round() as usize).min(n - 1);
    let v0_snap = (v_nodes[idx_v0] - v0).abs();
    Ok(Grid2D { r_max, v_max, n, dr, dv, r_nodes, v_nodes, idx_r0, idx_v0, v0_snap })
}

impl Grid2D {
    /// Grid with a prescribed `dr` over `[-r_max, r_max]`, as used by the
    /// refinement study.
    pub fn with_spacing(r_max: f64, v_max: f64, dr: f64, v0: f64) -> Result<Self> {
        let cells = (2.0 * r_max / dr).round();
        if ((2.0 * r_max / dr) - cells).abs() > 1e-6 {
            return Err(Error::Grid(format!("dr = {dr} does not divide [-{r_max}, {r_max}]")));
        }
        build_grid(r_max, v_max, cells as usize + 1, v0)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Trapezoidal weight of node `(i, j)` including the cell area.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let edge = |k: usize| if k == 0 || k == self.n - 1 { 0.5 } else { 1.0 };
        edge(i) * edge(j) * self.dr * self.dv
    }
}

/// Complex values on a [`Grid2D`], `values[i * n + j]` at `(r_i, v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        ComplexField { n, values: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.values[i * self.n + j] = z;
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self, grid: &Grid2D) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.at(i, j) * grid.weight(i, j);
            }
        }
        acc
    }

    /// Largest modulus; NaN if any entry is NaN.
    pub fn max_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for z in &self.values {
            let q = z.norm_sqr();
            if q.is_nan() {
                return f64::NAN;
            }
            m = m.max(q);
        }
        m.sqrt()
    }

    pub fn max_real(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.re.abs()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, z| m.min(z.re))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `r,v,re,im` rows for diagnostics.
    pub fn to_csv(&self, grid: &Grid2D) -> String {
        let mut out = String::from("r,v,re,im\n");
        for i in 0..self.n {
            for j in 0..self.n {
                let z = self.at(i, j);
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    grid.r_nodes[i], grid.v_nodes[j], z.re, z.im
                ));
            }
        }
        out
    }
}

/// Point mass `1 / (dr dv)` at `(r = 0, v = v0)`.
pub fn init_delta(grid: &Grid2D) -> ComplexField {
    let mut f = ComplexField::zeros(grid.n);
    f.set(grid.idx_r0, grid.idx_v0, Complex64::new(1.0 / (grid.dr * grid.dv), 0.0));
    f
}
