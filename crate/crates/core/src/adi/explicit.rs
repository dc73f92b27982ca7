//! Forward-Euler reference march on the same spatial operator as the ADI
//! half-steps. Only used as a stability and accuracy reference.

use super::coeffs::CoefficientSet;
use super::grid::{ComplexField, Grid2D};
use super::scheme::{apply_operator, BoundaryRows};
use super::BLOWUP_NORM;
use crate::error::{Error, Result};

pub fn explicit_euler(
    grid: &Grid2D,
    coeffs: &CoefficientSet,
    initial: &ComplexField,
    dt: f64,
    steps: usize,
    boundary: BoundaryRows,
) -> Result<ComplexField> {
    let mut f = initial.clone();
    let threshold = BLOWUP_NORM.max(100.0 * f.max_norm());
    for step in 0..steps {
        let lf = apply_operator(grid, coeffs, &f, boundary);
        for (x, d) in f.values.iter_mut().zip(&lf.values) {
            *x += d * dt;
        }
        let norm = f.max_norm();
        if !(norm <= threshold) {
            return Err(Error::Instability { step: step + 1, max_norm: norm });
        }
    }
    Ok(f)
}
