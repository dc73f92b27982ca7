//! Jump integral of the transformed forward equation with normal jump sizes:
//!
//! ```text
//! lambda * integral exp(-i phi z_X(t)) f(r - z, v) psi(z) dz,
//! z_X(t) = z - 2 beta m t z^2 - beta z^3
//! ```
//!
//! with `m` the drift proxy of the return. The integral runs over
//! `[-6 sigma_j, 6 sigma_j]` with a composite trapezoid and linear
//! interpolation of `f` in `r`; outside the grid `f` is zero.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::grid::{ComplexField, Grid2D};
use crate::models::JumpParams;

pub const QUADRATURE_NODES: usize = 64;
pub const TAIL_SIGMAS: f64 = 6.0;

/// Jump size in the hedged return caused by a return jump `z` at time `t`.
#[inline]
pub fn portfolio_jump(z: f64, t: f64, beta: f64, drift_proxy: f64) -> f64 {
    z - 2.0 * beta * drift_proxy * t * z * z - beta * z * z * z
}

/// The quadrature collapsed to a stencil along `r`: `sum_d w_d f[i + d]`,
/// already multiplied by `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpKernel {
    pub stencil: Vec<(isize, Complex64)>,
    pub lambda: f64,
}

impl JumpKernel {
    pub fn new(grid: &Grid2D, jumps: &JumpParams, phi: f64, t: f64, beta: f64, drift_proxy: f64) -> Self {
        let s = jumps.sigma_j;
        let lo = -TAIL_SIGMAS * s;
        let h = 2.0 * TAIL_SIGMAS * s / (QUADRATURE_NODES - 1) as f64;
        let mut acc: BTreeMap<isize, Complex64> = BTreeMap::new();
        for k in 0..QUADRATURE_NODES {
            let z = lo + k as f64 * h;
            let w = if k == 0 || k == QUADRATURE_NODES - 1 { 0.5 * h } else { h };
            let phase = Complex64::from_polar(1.0, -phi * portfolio_jump(z, t, beta, drift_proxy));
            let weight = phase * (w * jumps.density(z) * jumps.lambda);
            // f(r_i - z): fractional index i - z / dr
            let q = -z / grid.dr;
            let fl = q.floor();
            let frac = q - fl;
            let o = fl as isize;
            *acc.entry(o).or_default() += weight * (1.0 - frac);
            if frac != 0.0 {
                *acc.entry(o + 1).or_default() += weight * frac;
            }
        }
        JumpKernel { stencil: acc.into_iter().collect(), lambda: jumps.lambda }
    }

    /// `lambda * integral(...)` at every node.
    pub fn integral(&self, f: &ComplexField) -> ComplexField {
        let n = f.n as isize;
        let mut out = ComplexField::zeros(f.n);
        if self.lambda == 0.0 {
            return out;
        }
        for i in 0..n {
            for &(d, w) in &self.stencil {
                let src = i + d;
                if src < 0 || src >= n {
                    continue;
                }
                let base_src = src as usize * f.n;
                let base_dst = i as usize * f.n;
                for j in 0..f.n {
                    out.values[base_dst + j] += w * f.values[base_src + j];
                }
            }
        }
        out
    }
}

/// Jump part of the generator applied to `field`: `lambda (integral - f)`.
pub fn jump_term(
    field: &ComplexField,
    grid: &Grid2D,
    jumps: &JumpParams,
    phi: f64,
    t: f64,
    beta: f64,
    drift_proxy: f64,
) -> ComplexField {
    let mut out = JumpKernel::new(grid, jumps, phi, t, beta, drift_proxy).integral(field);
    for (o, f) in out.values.iter_mut().zip(&field.values) {
        *o -= f * jumps.lambda;
    }
    out
}
