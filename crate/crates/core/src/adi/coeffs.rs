use num_complex::Complex64;

use super::grid::Grid2D;
use crate::models::HestonParams;

/// Nodewise coefficients of the transformed forward equation
///
/// ```text
/// df/dt = mu_r f_r + sigma_r f_rr + mu_v f_v + sigma_v f_vv + cross f_rv + alpha f
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub n: usize,
    pub mu_r: Vec<Complex64>,
    pub sigma_r: Vec<f64>,
    pub mu_v: Vec<Complex64>,
    pub sigma_v: Vec<f64>,
    pub cross: Vec<f64>,
    pub alpha: Vec<Complex64>,
}

impl CoefficientSet {
    fn build(grid: &Grid2D, params: &HestonParams, node: impl Fn(f64, f64) -> (Complex64, Complex64, Complex64)) -> Self {
        let n = grid.n;
        let mut set = CoefficientSet {
            n,
            mu_r: Vec::with_capacity(n * n),
            sigma_r: Vec::with_capacity(n * n),
            mu_v: Vec::with_capacity(n * n),
            sigma_v: Vec::with_capacity(n * n),
            cross: Vec::with_capacity(n * n),
            alpha: Vec::with_capacity(n * n),
        };
        let g2 = params.gamma * params.gamma;
        for &r in &grid.r_nodes {
            for &v in &grid.v_nodes {
                let (mu_r, mu_v, alpha) = node(r, v);
                set.mu_r.push(mu_r);
                set.mu_v.push(mu_v);
                set.alpha.push(alpha);
                set.sigma_r.push(0.5 * v);
                set.sigma_v.push(0.5 * g2 * v);
                set.cross.push(params.rho * params.gamma * v);
            }
        }
        set
    }

    /// Adds a constant to the reaction coefficient (`alpha - lambda` for jumps).
    pub fn shift_alpha(&mut self, shift: f64) {
        for a in &mut self.alpha {
            *a += shift;
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
}

/// Coefficients for the hedged log-return `X = R - beta [R, R^2]` at
/// frequency `phi`.
pub fn coefficients_heston(grid: &Grid2D, params: &HestonParams, phi: f64, beta: f64) -> CoefficientSet {
    let HestonParams { mu, kappa, theta, gamma, rho, .. } = *params;
    let i = Complex64::i();
    CoefficientSet::build(grid, params, |r, v| {
        let mu_r = Complex64::new(-mu + 0.5 * v + rho * gamma, phi * v);
        let mu_v = Complex64::new(-kappa * (theta - v) + gamma * gamma, rho * gamma * phi * v);
        let alpha = i * phi * (-mu + 0.5 * v + 2.0 * beta * r * v) - 0.5 * phi * phi * v + i * rho * gamma * phi + kappa;
        (mu_r, mu_v, alpha)
    })
}

/// Coefficients for the third moment variation `Y = [R, R^2]` itself.
pub fn coefficients_third_moment(grid: &Grid2D, params: &HestonParams, phi: f64) -> CoefficientSet {
    let HestonParams { mu, kappa, theta, gamma, rho, .. } = *params;
    CoefficientSet::build(grid, params, |r, v| {
        let mu_r = Complex64::new(-mu + 0.5 * v + rho * gamma, 0.0);
        let mu_v = Complex64::new(-kappa * (theta - v) + gamma * gamma, 0.0);
        let alpha = Complex64::new(kappa, -2.0 * phi * r * v);
        (mu_r, mu_v, alpha)
    })
}
