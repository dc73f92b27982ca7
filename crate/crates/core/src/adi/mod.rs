//! Fourier-transformed forward Kolmogorov equations on a uniform `(r, v)`
//! lattice, advanced with Peaceman-Rachford ADI (or, optionally, the
//! Hundsdorfer-Verwer variant for fine lattices).
//!
//! For a fixed frequency `phi` the transformed density `f(r, v, t; phi)` of
//! `(X_t, R_t, V_t)` starts as a point mass at `(0, v0)`; its integral over
//! the lattice at maturity is `E[exp(-i phi X_T)]`.

mod coeffs;
mod explicit;
mod grid;
mod hv;
mod jump;
mod scheme;
mod system;

pub use coeffs::{coefficients_heston, coefficients_third_moment, CoefficientSet};
pub use explicit::explicit_euler;
pub use grid::{build_grid, init_delta, ComplexField, Grid2D};
pub use hv::{hv_theta, HvStepper};
pub use jump::{jump_term, portfolio_jump, JumpKernel, QUADRATURE_NODES, TAIL_SIGMAS};
pub use scheme::{
    adi_step, apply_operator, assemble_r_system, assemble_v_system, AdiStepper, BoundaryRows,
};
pub use system::{Factorized, QuasiTridiagonalSystem, RESIDUAL_TOL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{validate, HestonParams, JumpParams, SwapSpec};

/// Absolute blow-up threshold on the field max-norm. The initial point mass is
/// allowed to exceed it on very fine lattices; the effective threshold is
/// `max(BLOWUP_NORM, 100 * |f_0|_max)`.
pub const BLOWUP_NORM: f64 = 1e6;

/// State at maturity of one frequency slice.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: ComplexField,
    /// Lattice integral of `field`, i.e. `E[exp(-i phi X_T)]`.
    pub u_phi: Complex64,
    pub steps: usize,
}

/// Time integrator of the march.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Two half-steps, mixed term explicit. Stable on the default lattice at
    /// `dt = 0.001`, but only conditionally: it needs roughly
    /// `dt |rho gamma v| / (dr dv) < 1`.
    #[default]
    PeacemanRachford,
    /// Predictor-corrector ADI, stable for any `dt` with explicit mixed
    /// terms. Dirichlet edges only.
    HundsdorferVerwer,
}

impl std::str::FromStr for TimeScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pr" | "peaceman_rachford" | "peaceman-rachford" => Ok(TimeScheme::PeacemanRachford),
            "hv" | "hundsdorfer_verwer" | "hundsdorfer-verwer" => Ok(TimeScheme::HundsdorferVerwer),
            other => Err(Error::Config(format!("unknown time scheme `{other}`"))),
        }
    }
}

/// Options shared by every march.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarchOptions {
    pub boundary: BoundaryRows,
    pub scheme: TimeScheme,
    /// Skip the Feller pre-check (diagnostics only).
    pub allow_feller_violation: bool,
}

enum Stepper {
    Pr(AdiStepper),
    Hv(HvStepper),
}

impl Stepper {
    fn step_with<F>(&self, f: &ComplexField, explicit: F) -> Result<ComplexField>
    where
        F: FnMut(&ComplexField) -> Option<ComplexField>,
    {
        match self {
            Stepper::Pr(s) => s.step_with(f, explicit),
            Stepper::Hv(s) => s.step_with(f, explicit),
        }
    }
}

/// Which transformed equation to march.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equation {
    /// Hedged return `X = R - beta [R, R^2]`.
    Hedged { beta: f64 },
    /// Hedged return with compound-Poisson jumps in `R`.
    HedgedJumps { beta: f64, jumps: JumpParams },
    /// The third moment variation `[R, R^2]` itself.
    ThirdMoment,
}

pub fn step_count(maturity: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt = {dt} must be positive")));
    }
    let steps = (maturity / dt).round();
    if steps < 1.0 || (steps * dt - maturity).abs() > 1e-9 * maturity.max(1.0) {
        return Err(Error::Config(format!("maturity {maturity} is not an integral number of steps of {dt}")));
    }
    Ok(steps as usize)
}

/// Marches a point mass at `(0, v0)` to `maturity` for one frequency.
pub fn march(
    params: &HestonParams,
    equation: Equation,
    maturity: f64,
    grid: &Grid2D,
    dt: f64,
    phi: f64,
    opts: MarchOptions,
) -> Result<Evolution> {
    let report = validate(params)?;
    if !report.feller_ok && !opts.allow_feller_violation {
        return Err(Error::FellerViolation { margin: report.margin });
    }
    let steps = step_count(maturity, dt)?;
    let mut coeffs = match equation {
        Equation::Hedged { beta } | Equation::HedgedJumps { beta, .. } => coefficients_heston(grid, params, phi, beta),
        Equation::ThirdMoment => coefficients_third_moment(grid, params, phi),
    };
    let jumps = match equation {
        Equation::HedgedJumps { beta, jumps } if jumps.lambda > 0.0 => {
            jumps.check_domain()?;
            coeffs.shift_alpha(-jumps.lambda);
            Some((beta, jumps))
        }
        Equation::HedgedJumps { jumps, .. } => {
            jumps.check_domain()?;
            None
        }
        _ => None,
    };
    let stepper = match opts.scheme {
        TimeScheme::PeacemanRachford => Stepper::Pr(AdiStepper::new(grid, coeffs, dt, opts.boundary)?),
        TimeScheme::HundsdorferVerwer if opts.boundary == BoundaryRows::Dirichlet => Stepper::Hv(HvStepper::new(grid, coeffs, dt)?),
        TimeScheme::HundsdorferVerwer => {
            return Err(Error::Config("the hundsdorfer-verwer scheme supports dirichlet edges only".into()))
        }
    };
    let mut field = init_delta(grid);
    if opts.boundary == BoundaryRows::Dirichlet && (grid.idx_v0 == 0 || grid.idx_v0 == grid.n - 1) {
        return Err(Error::Grid("v0 maps to a Dirichlet edge".into()));
    }
    let threshold = BLOWUP_NORM.max(100.0 * field.max_norm());
    for step in 0..steps {
        field = match jumps {
            None => stepper.step_with(&field, |_| None)?,
            Some((beta, j)) => {
                let t = step as f64 * dt;
                let kernel = JumpKernel::new(grid, &j, phi, t, beta, params.drift_proxy());
                stepper.step_with(&field, |f| Some(kernel.integral(f)))?
            }
        };
        let norm = field.max_norm();
        if !(norm <= threshold) {
            return Err(Error::Instability { step: step + 1, max_norm: norm });
        }
    }
    let u_phi = field.integral(grid);
    Ok(Evolution { field, u_phi, steps })
}

/// Heston hedged-return slice.
pub fn evolve(params: &HestonParams, spec: &SwapSpec, grid: &Grid2D, dt: f64, phi: f64) -> Result<Evolution> {
    march(params, Equation::Hedged { beta: spec.beta }, spec.maturity, grid, dt, phi, MarchOptions::default())
}

/// Slice of the third-moment-variation density.
pub fn evolve_third_moment(params: &HestonParams, maturity: f64, grid: &Grid2D, dt: f64, phi: f64) -> Result<Evolution> {
    march(params, Equation::ThirdMoment, maturity, grid, dt, phi, MarchOptions::default())
}

/// SVJD hedged-return slice. With `lambda = 0` this is exactly [`evolve`].
pub fn evolve_svjd(
    params: &HestonParams,
    jumps: &JumpParams,
    spec: &SwapSpec,
    grid: &Grid2D,
    dt: f64,
    phi: f64,
) -> Result<Evolution> {
    march(
        params,
        Equation::HedgedJumps { beta: spec.beta, jumps: *jumps },
        spec.maturity,
        grid,
        dt,
        phi,
        MarchOptions::default(),
    )
}
