//! Shared fixtures for the criterion benches.

use tailhedge::adi::{coefficients_heston, init_delta, AdiStepper, BoundaryRows, ComplexField, Grid2D, HvStepper};
use tailhedge::pipeline::SolverConfig;
use tailhedge::HestonParams;

pub const MATURITY: f64 = 0.1;

/// The published 41 x 41 grid.
pub fn reference_grid(params: &HestonParams) -> Grid2D {
    SolverConfig::default().grid(params.v0).expect("default grid is valid")
}

/// A field a few steps into the march, so the line solves see a spread-out
/// profile rather than a point mass.
pub fn warm_field(grid: &Grid2D, params: &HestonParams, phi: f64, beta: f64) -> ComplexField {
    let stepper = pr_stepper(grid, params, phi, beta);
    let mut f = init_delta(grid);
    for _ in 0..10 {
        f = stepper.step(&f).expect("stable warm-up");
    }
    f
}

pub fn pr_stepper(grid: &Grid2D, params: &HestonParams, phi: f64, beta: f64) -> AdiStepper {
    AdiStepper::new(grid, coefficients_heston(grid, params, phi, beta), 1e-3, BoundaryRows::Dirichlet).expect("reference-grid stepper")
}

pub fn hv_stepper(grid: &Grid2D, params: &HestonParams, phi: f64, beta: f64) -> HvStepper {
    HvStepper::new(grid, coefficients_heston(grid, params, phi, beta), 1e-3).expect("reference-grid stepper")
}
