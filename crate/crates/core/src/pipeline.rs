//! End-to-end density solves: frequency sweep of PDE slices, assembly,
//! inversion and moments; plus the analytic-cf reference density.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adi::{build_grid, march, BoundaryRows, Equation, Grid2D, MarchOptions, TimeScheme};
use crate::error::Result;
use crate::models::{cf_heston, cf_svjd, validate, HestonParams, JumpParams, SwapSpec};
use crate::spectral::{chf_assemble, moments_from_pdf, rmse, pdf_from_cf, pdf_from_cf_fast, CfSamples, DensityCurve, MomentSummary, PhiGrid};
use crate::Error;

/// Frequencies are swept in blocks of this size; the sweep stops after a
/// whole block has `|u| < cutoff`. A fixed size keeps the result independent
/// of the thread count.
pub const PHI_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub r_max: f64,
    pub v_max: f64,
    pub n: usize,
    pub dt: f64,
    pub boundary: BoundaryRows,
    pub scheme: TimeScheme,
}

impl Default for SolverConfig {
    /// `[-0.5, 0.5] x [0, 0.3]`, 41 nodes per axis, `dt = 0.001`.
    fn default() -> Self {
        SolverConfig {
            r_max: 0.5,
            v_max: 0.3,
            n: 41,
            dt: 0.001,
            boundary: BoundaryRows::Dirichlet,
            scheme: TimeScheme::PeacemanRachford,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self, v0: f64) -> Result<Grid2D> {
        build_grid(self.r_max, self.v_max, self.n, v0)
    }

    pub fn march_options(&self) -> MarchOptions {
        MarchOptions { boundary: self.boundary, scheme: self.scheme, ..MarchOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub phi_max: f64,
    pub phi_count: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
    pub renormalize: bool,
    /// Frequencies past a full block with `|u|` below this are set to zero.
    /// Zero disables the cutoff.
    pub cutoff: f64,
    /// Use the chirp-z inversion instead of the direct sum.
    pub fast: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            phi_max: 256.0,
            phi_count: 257,
            x_min: -0.6,
            x_max: 0.6,
            x_count: 1201,
            renormalize: true,
            cutoff: 1e-12,
            fast: true,
        }
    }
}

impl SpectralConfig {
    pub fn phi_grid(&self) -> Result<PhiGrid> {
        PhiGrid::new(self.phi_max, self.phi_count)
    }

    pub fn invert(&self, cf: &CfSamples) -> Result<DensityCurve> {
        if self.fast {
            pdf_from_cf_fast(cf, self.x_min, self.x_max, self.x_count)
        } else {
            pdf_from_cf(cf, self.x_min, self.x_max, self.x_count)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Heston,
    Svjd(JumpParams),
}

#[derive(Debug, Clone)]
pub struct DensityResult {
    /// `u(phi)` on the non-negative frequencies.
    pub u: Vec<Complex64>,
    /// Index of the first frequency skipped by the cutoff (`u.len()` if none).
    pub cutoff_at: usize,
    pub curve: DensityCurve,
    pub moments: MomentSummary,
}

/// `u(phi_k)` for every frequency of `phis`, marching each slice on its own.
pub fn sweep_frequencies<F>(phis: &[f64], cutoff: f64, slice: F) -> Result<(Vec<Complex64>, usize)>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let mut u = vec![Complex64::default(); phis.len()];
    let mut done = 0;
    while done < phis.len() {
        let end = (done + PHI_BLOCK).min(phis.len());
        let block: Vec<Result<Complex64>> = phis[done..end].par_iter().map(|&p| slice(p)).collect();
        for (k, r) in block.into_iter().enumerate() {
            u[done + k] = r?;
        }
        let small = cutoff > 0.0 && done > 0 && u[done..end].iter().all(|z| z.norm() < cutoff);
        done = end;
        if small {
            return Ok((u, done));
        }
    }
    Ok((u, phis.len()))
}

/// Density of the hedged return `X_T` from the transformed PDE.
pub fn solve_density(
    params: &HestonParams,
    model: Model,
    spec: &SwapSpec,
    solver: &SolverConfig,
    spectral: &SpectralConfig,
) -> Result<DensityResult> {
    let equation = match model {
        Model::Heston => Equation::Hedged { beta: spec.beta },
        Model::Svjd(jumps) => Equation::HedgedJumps { beta: spec.beta, jumps },
    };
    solve_equation(params, equation, spec.maturity, solver, spectral)
}

/// Density of the third moment variation `[R, R^2]_T`.
pub fn solve_third_moment_density(
    params: &HestonParams,
    maturity: f64,
    solver: &SolverConfig,
    spectral: &SpectralConfig,
) -> Result<DensityResult> {
    solve_equation(params, Equation::ThirdMoment, maturity, solver, spectral)
}

pub fn solve_equation(
    params: &HestonParams,
    equation: Equation,
    maturity: f64,
    solver: &SolverConfig,
    spectral: &SpectralConfig,
) -> Result<DensityResult> {
    let grid = solver.grid(params.v0)?;
    solve_on_grid(params, equation, maturity, &grid, solver.dt, solver.march_options(), spectral)
}

/// [`solve_equation`] on an explicit grid.
pub fn solve_on_grid(
    params: &HestonParams,
    equation: Equation,
    maturity: f64,
    grid: &Grid2D,
    dt: f64,
    opts: MarchOptions,
    spectral: &SpectralConfig,
) -> Result<DensityResult> {
    let report = validate(params)?;
    if !report.feller_ok {
        return Err(Error::FellerViolation { margin: report.margin });
    }
    let phi_grid = spectral.phi_grid()?;
    let phis = phi_grid.nodes();
    let (u, cutoff_at) = sweep_frequencies(&phis, spectral.cutoff, |phi| {
        march(params, equation, maturity, grid, dt, phi, opts).map(|e| e.u_phi)
    })?;
    let cf = chf_assemble(&u, &phi_grid, spectral.renormalize)?;
    let curve = spectral.invert(&cf)?;
    let moments = moments_from_pdf(&curve)?;
    Ok(DensityResult { u, cutoff_at, curve, moments })
}

/// Unhedged density from the closed-form characteristic function.
pub fn analytic_density(
    params: &HestonParams,
    model: Model,
    maturity: f64,
    spectral: &SpectralConfig,
) -> Result<(DensityCurve, MomentSummary)> {
    params.check_domain()?;
    let phi_grid = spectral.phi_grid()?;
    let cf = match model {
        Model::Heston => CfSamples::from_fn(&phi_grid, |p| cf_heston(p, params, maturity)),
        Model::Svjd(j) => CfSamples::from_fn(&phi_grid, |p| cf_svjd(p, params, &j, maturity)),
    };
    let curve = spectral.invert(&cf)?;
    let moments = moments_from_pdf(&curve)?;
    Ok((curve, moments))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub dr: f64,
    pub n: usize,
    pub rmse: f64,
}

/// Grid-refinement study of the unhedged Heston density against the analytic
/// cf inversion on `[-r_max, r_max] x [0, v_max]`, one point per `dr`.
pub fn convergence_study(
    params: &HestonParams,
    maturity: f64,
    drs: &[f64],
    r_max: f64,
    v_max: f64,
    dt: f64,
    scheme: TimeScheme,
    spectral: &SpectralConfig,
) -> Result<Vec<ConvergencePoint>> {
    if drs.is_empty() {
        return Err(Error::Config("empty dr sweep".into()));
    }
    let (reference, _) = analytic_density(params, Model::Heston, maturity, spectral)?;
    let opts = MarchOptions { scheme, ..MarchOptions::default() };
    drs.iter()
        .map(|&dr| {
            let grid = Grid2D::with_spacing(r_max, v_max, dr, params.v0)?;
            let res = solve_on_grid(params, Equation::Hedged { beta: 0.0 }, maturity, &grid, dt, opts, spectral)?;
            Ok(ConvergencePoint { dr, n: grid.n, rmse: rmse(&res.curve, &reference)? })
        })
        .collect()
}

/// Indices `k` where `rmse[k] > rmse[k - 1]`, assuming `dr` decreases.
pub fn monotonicity_violations(points: &[ConvergencePoint]) -> Vec<usize> {
    (1..points.len()).filter(|&k| points[k].rmse > points[k - 1].rmse).collect()
}
