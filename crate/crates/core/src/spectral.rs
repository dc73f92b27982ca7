//! Characteristic-function assembly, Fourier inversion to a real density,
//! standardized moments and the RMSE comparator.
//!
//! Sign convention: the PDE slices integrate to `u(phi) = E[exp(-i phi X)]`,
//! so the characteristic function is `cf(phi) = conj(u(phi))` and the density
//! is `p(x) = 1/(2 pi) * integral cf(phi) exp(-i phi x) dphi`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|u(0)|` the grid has lost too much probability mass.
pub const MIN_MASS: f64 = 0.9;
/// Largest tolerated `max |imag| / max |real|` of the inverted density.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

/// Uniform frequencies `0, dphi, ..., phi_max`; the negative half is implied
/// by conjugate symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiGrid {
    pub phi_max: f64,
    pub count: usize,
    pub dphi: f64,
}

impl PhiGrid {
    pub fn new(phi_max: f64, count: usize) -> Result<Self> {
        if count < 16 {
            return Err(Error::Config(format!("phi_count = {count} must be at least 16")));
        }
        if !(phi_max.is_finite() && phi_max > 0.0) {
            return Err(Error::Config(format!("phi_max = {phi_max} must be positive")));
        }
        Ok(PhiGrid { phi_max, count, dphi: phi_max / (count - 1) as f64 })
    }

    pub fn phi(&self, k: usize) -> f64 {
        k as f64 * self.dphi
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.phi(k)).collect()
    }

    /// Widest x interval that the frequency spacing resolves without
    /// wrap-around: `2 pi / dphi`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.dphi
    }
}

/// Characteristic-function samples on `[-phi_max, phi_max]`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CfSamples {
    pub phi: Vec<f64>,
    pub cf: Vec<Complex64>,
    pub dphi: f64,
    /// `Re u(0)` before renormalization.
    pub mass: f64,
    pub renormalized: bool,
}

impl CfSamples {
    /// Samples of a closed-form characteristic function on the full axis.
    pub fn from_fn(grid: &PhiGrid, cf: impl Fn(f64) -> Complex64) -> Self {
        let m = grid.count - 1;
        let phi: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * grid.dphi).collect();
        let cf = phi.iter().map(|&p| cf(p)).collect();
        CfSamples { phi, cf, dphi: grid.dphi, mass: 1.0, renormalized: false }
    }
}

/// Extends `u` on the non-negative half-axis to the characteristic function
/// on the full axis. With `renormalize`, every sample is divided by `u(0)`.
pub fn chf_assemble(u: &[Complex64], grid: &PhiGrid, renormalize: bool) -> Result<CfSamples> {
    if u.len() != grid.count {
        return Err(Error::Config(format!("{} frequency samples for a grid of {}", u.len(), grid.count)));
    }
    let u0 = u[0];
    if !(u0.norm() >= MIN_MASS) {
        return Err(Error::MassLoss { mass: u0.norm() });
    }
    let scale = if renormalize { 1.0 / u0.re } else { 1.0 };
    let m = grid.count - 1;
    let mut phi = Vec::with_capacity(2 * m + 1);
    let mut cf = Vec::with_capacity(2 * m + 1);
    for k in (1..=m).rev() {
        phi.push(-grid.phi(k));
        cf.push(u[k] * scale); // cf(-phi) = conj(cf(phi)) = u(phi)
    }
    for (k, &uk) in u.iter().enumerate() {
        phi.push(grid.phi(k));
        cf.push(if k == 0 { Complex64::new(u0.re * scale, 0.0) } else { uk.conj() * scale });
    }
    Ok(CfSamples { phi, cf, dphi: grid.dphi, mass: u0.re, renormalized: renormalize })
}

/// Recovered density on a uniform x grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub x_nodes: Vec<f64>,
    pub density: Vec<f64>,
    /// Probability mass seen before any renormalization.
    pub raw_mass: f64,
    pub renormalized: bool,
}

impl DensityCurve {
    pub fn new(x_nodes: Vec<f64>, density: Vec<f64>) -> Self {
        let mut c = DensityCurve { x_nodes, density, raw_mass: 1.0, renormalized: false };
        c.raw_mass = c.mass();
        c
    }

    pub fn dx(&self) -> f64 {
        if self.x_nodes.len() < 2 {
            return 0.0;
        }
        (self.x_nodes[self.x_nodes.len() - 1] - self.x_nodes[0]) / (self.x_nodes.len() - 1) as f64
    }

    /// Trapezoidal integral of the density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.density, self.dx())
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,density\n");
        for (x, p) in self.x_nodes.iter().zip(&self.density) {
            let _ = writeln!(s, "{x:.16e},{p:.16e}");
        }
        s
    }
}

fn trapezoid(y: &[f64], h: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1])),
    }
}

fn x_grid(x_min: f64, x_max: f64, x_count: usize) -> Result<Vec<f64>> {
    if x_count < 2 || !(x_max > x_min) {
        return Err(Error::Config(format!("bad x grid [{x_min}, {x_max}] with {x_count} nodes")));
    }
    let dx = (x_max - x_min) / (x_count - 1) as f64;
    Ok((0..x_count).map(|k| x_min + k as f64 * dx).collect())
}

fn check_aliasing(cf: &CfSamples, x_min: f64, x_max: f64) -> Result<()> {
    let period = 2.0 * PI / cf.dphi;
    if x_max - x_min >= period {
        return Err(Error::Config(format!(
            "x span {} is not below the alias period 2*pi/dphi = {period}",
            x_max - x_min
        )));
    }
    Ok(())
}

fn trapezoid_weights(len: usize, dphi: f64) -> impl Iterator<Item = f64> {
    (0..len).map(move |k| if k == 0 || k + 1 == len { 0.5 * dphi } else { dphi })
}

fn finish(cf: &CfSamples, x: Vec<f64>, values: Vec<Complex64>) -> Result<DensityCurve> {
    let max_re = values.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_im > IMAG_RESIDUE_TOL * max_re.max(f64::MIN_POSITIVE) {
        return Err(Error::ImaginaryResidue { residue: max_im / max_re.max(f64::MIN_POSITIVE) });
    }
    Ok(DensityCurve {
        x_nodes: x,
        density: values.iter().map(|z| z.re).collect(),
        raw_mass: cf.mass,
        renormalized: cf.renormalized,
    })
}

/// Reference inversion: direct trapezoid sum at every x node.
pub fn pdf_from_cf(cf: &CfSamples, x_min: f64, x_max: f64, x_count: usize) -> Result<DensityCurve> {
    check_aliasing(cf, x_min, x_max)?;
    let x = x_grid(x_min, x_max, x_count)?;
    let weights: Vec<Complex64> = trapezoid_weights(cf.cf.len(), cf.dphi)
        .zip(&cf.cf)
        .map(|(w, c)| c * (w / (2.0 * PI)))
        .collect();
    let values = x
        .iter()
        .map(|&xk| {
            weights
                .iter()
                .zip(&cf.phi)
                .map(|(w, &p)| w * Complex64::from_polar(1.0, -p * xk))
                .sum::<Complex64>()
        })
        .collect();
    finish(cf, x, values)
}

/// Same sum evaluated as a chirp-z transform (Bluestein) with FFTs.
pub fn pdf_from_cf_fast(cf: &CfSamples, x_min: f64, x_max: f64, x_count: usize) -> Result<DensityCurve> {
    check_aliasing(cf, x_min, x_max)?;
    let x = x_grid(x_min, x_max, x_count)?;
    let m = cf.cf.len();
    let k = x_count;
    let phi0 = cf.phi[0];
    let dx = x[1] - x[0];
    let a = cf.dphi * dx;
    // m k = (m^2 + k^2 - (k - m)^2) / 2
    let chirp = |j: f64| Complex64::from_polar(1.0, 0.5 * a * j * j);
    let len = (m + k - 1).next_power_of_two();
    let mut av = vec![Complex64::default(); len];
    for (idx, (w, c)) in trapezoid_weights(m, cf.dphi).zip(&cf.cf).enumerate() {
        let mf = idx as f64;
        av[idx] = c * (w / (2.0 * PI)) * Complex64::from_polar(1.0, -mf * cf.dphi * x_min) * chirp(mf).conj();
    }
    let mut bv = vec![Complex64::default(); len];
    for j in 0..k {
        bv[j] = chirp(j as f64);
    }
    for j in 1..m {
        bv[len - j] = chirp(j as f64);
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut av);
    fwd.process(&mut bv);
    for (p, q) in av.iter_mut().zip(&bv) {
        *p *= q / len as f64;
    }
    inv.process(&mut av);
    let values = (0..k)
        .map(|j| {
            let jf = j as f64;
            av[j] * Complex64::from_polar(1.0, -phi0 * (x_min + jf * dx)) * chirp(jf).conj()
        })
        .collect();
    finish(cf, x, values)
}

/// First four standardized moments of a density (kurtosis is not excess).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub mass: f64,
    pub renormalized: bool,
}

impl MomentSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    /// `kurtosis >= 1 + skewness^2`.
    pub fn pearson_ok(&self) -> bool {
        self.kurtosis >= 1.0 + self.skewness * self.skewness
    }
}

/// Trapezoidal moments, normalized by the curve's own mass.
pub fn moments_from_pdf(curve: &DensityCurve) -> Result<MomentSummary> {
    let h = curve.dx();
    let mass = curve.mass();
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!("density mass {mass}")));
    }
    let raw = |order: i32| {
        let y: Vec<f64> = curve.x_nodes.iter().zip(&curve.density).map(|(x, p)| p * x.powi(order)).collect();
        trapezoid(&y, h) / mass
    };
    let mean = raw(1);
    let central = |order: i32| {
        let y: Vec<f64> = curve.x_nodes.iter().zip(&curve.density).map(|(x, p)| p * (x - mean).powi(order)).collect();
        trapezoid(&y, h) / mass
    };
    let var = central(2);
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!("variance {var}")));
    }
    let sd = var.sqrt();
    Ok(MomentSummary {
        mean,
        std_dev: sd,
        skewness: central(3) / (var * sd),
        kurtosis: central(4) / (var * var),
        mass: curve.raw_mass,
        renormalized: curve.renormalized,
    })
}

/// Root mean squared pointwise difference of two curves on the same nodes.
pub fn rmse(a: &DensityCurve, b: &DensityCurve) -> Result<f64> {
    if a.x_nodes.len() != b.x_nodes.len() || a.x_nodes.is_empty() {
        return Err(Error::Alignment(format!("{} vs {} nodes", a.x_nodes.len(), b.x_nodes.len())));
    }
    let scale = a.dx().abs().max(f64::MIN_POSITIVE);
    if a.x_nodes.iter().zip(&b.x_nodes).any(|(p, q)| (p - q).abs() > 1e-9 * scale) {
        return Err(Error::Alignment("node positions differ".into()));
    }
    let ss: f64 = a.density.iter().zip(&b.density).map(|(p, q)| (p - q).powi(2)).sum();
    Ok((ss / a.density.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn gaussian_cf(m: f64, s: f64) -> impl Fn(f64) -> Complex64 {
        move |p| Complex64::new(-0.5 * p * p * s * s, p * m).exp()
    }

    fn default_grid() -> PhiGrid {
        PhiGrid::new(256.0, 257).unwrap()
    }

    #[test]
    fn phi_grid_rejects_few_nodes() {
        assert!(PhiGrid::new(10.0, 15).is_err());
        assert_eq!(PhiGrid::new(15.0, 16).unwrap().dphi, 1.0);
    }

    #[test]
    fn assemble_unit_mass() {
        let g = PhiGrid::new(15.0, 16).unwrap();
        let mut u = vec![Complex64::new(0.5, 0.1); 16];
        u[0] = Complex64::new(1.0, 0.0);
        let c = chf_assemble(&u, &g, true).unwrap();
        assert_eq!(c.cf.len(), 31);
        assert_eq!(c.phi[15], 0.0);
        assert_eq!(c.cf[15], Complex64::new(1.0, 0.0));
        assert_eq!(c.cf[16], Complex64::new(0.5, -0.1));
        assert_eq!(c.cf[14], Complex64::new(0.5, 0.1));
    }

    #[test]
    fn assemble_gaussian_is_even_and_real() {
        let g = PhiGrid::new(20.0, 41).unwrap();
        let u: Vec<Complex64> = g.nodes().iter().map(|p| Complex64::new((-p * p / 2.0).exp(), 0.0)).collect();
        let c = chf_assemble(&u, &g, false).unwrap();
        let n = c.cf.len();
        for k in 0..n {
            assert_eq!(c.cf[k], c.cf[n - 1 - k]);
            assert_eq!(c.cf[k].im, 0.0);
        }
    }

    #[test]
    fn assemble_renormalizes_and_reports_mass() {
        let g = PhiGrid::new(15.0, 16).unwrap();
        let u = vec![Complex64::new(0.95, 0.0); 16];
        let c = chf_assemble(&u, &g, true).unwrap();
        assert_eq!(c.mass, 0.95);
        assert_abs_diff_eq!(c.cf[15].re, 1.0, epsilon = 1e-15);
        assert!(matches!(chf_assemble(&vec![Complex64::new(0.5, 0.0); 16], &g, true), Err(Error::MassLoss { .. })));
    }

    #[test]
    fn gaussian_peak() {
        let (m, s) = (0.01, 0.1);
        let c = CfSamples::from_fn(&default_grid(), gaussian_cf(m, s));
        let curve = pdf_from_cf(&c, -0.6, 0.6, 1201).unwrap();
        let at_m = curve.x_nodes.iter().position(|x| (x - m).abs() < 1e-9).unwrap();
        assert_abs_diff_eq!(curve.density[at_m], 1.0 / (s * (2.0 * PI).sqrt()), epsilon = 1e-3);
        let (imax, _) = curve.density.iter().enumerate().fold((0, f64::MIN), |a, (i, &p)| if p > a.1 { (i, p) } else { a });
        assert_eq!(imax, at_m);
    }

    #[test]
    fn truncated_delta_keeps_mass() {
        let g = PhiGrid::new(64.0, 129).unwrap();
        let c = CfSamples::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let curve = pdf_from_cf(&c, -0.6, 0.6, 1201).unwrap();
        assert!((curve.mass() - 1.0).abs() < 0.02, "{}", curve.mass());
        assert!(curve.min_density() < 0.0);
    }

    #[test]
    fn aliasing_is_rejected() {
        let g = PhiGrid::new(256.0, 33).unwrap(); // dphi = 8, period 0.785
        let c = CfSamples::from_fn(&g, gaussian_cf(0.0, 0.1));
        assert!(matches!(pdf_from_cf(&c, -0.6, 0.6, 101), Err(Error::Config(_))));
        assert!(matches!(pdf_from_cf_fast(&c, -0.6, 0.6, 101), Err(Error::Config(_))));
    }

    #[test]
    fn asymmetric_input_reports_imaginary_residue() {
        let g = PhiGrid::new(50.0, 51).unwrap();
        let c = CfSamples::from_fn(&g, |p| Complex64::new((-p * p * 0.005).exp(), 0.0) * if p > 0.0 { 2.0 } else { 1.0 });
        assert!(matches!(pdf_from_cf(&c, -0.5, 0.5, 101), Err(Error::ImaginaryResidue { .. })));
    }

    #[test]
    fn fast_path_matches_reference() {
        let c = CfSamples::from_fn(&default_grid(), |p| {
            gaussian_cf(0.02, 0.08)(p) * Complex64::from_polar(1.0, 0.3 * (p * 0.05).sin())
        });
        let a = pdf_from_cf(&c, -0.6, 0.6, 1201).unwrap();
        let b = pdf_from_cf_fast(&c, -0.6, 0.6, 1201).unwrap();
        let peak = a.density.iter().copied().fold(0.0, f64::max);
        for (p, q) in a.density.iter().zip(&b.density) {
            assert!((p - q).abs() <= 1e-10 * peak, "{p} {q}");
        }
        let g = CfSamples::from_fn(&default_grid(), gaussian_cf(-0.03, 0.12));
        let a = pdf_from_cf(&g, -0.6, 0.6, 1201).unwrap();
        let b = pdf_from_cf_fast(&g, -0.6, 0.6, 1201).unwrap();
        for (p, q) in a.density.iter().zip(&b.density) {
            assert!((p - q).abs() <= 1e-10 * 3.4);
        }
    }

    #[test]
    fn gaussian_moments() {
        let x: Vec<f64> = (0..4001).map(|k| -10.0 + k as f64 * 0.005).collect();
        let p: Vec<f64> = x.iter().map(|x| (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).collect();
        let m = moments_from_pdf(&DensityCurve::new(x, p)).unwrap();
        assert_abs_diff_eq!(m.mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.std_dev, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.skewness, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.kurtosis, 3.0, epsilon = 1e-4);
    }

    #[test]
    fn bimodal_mixture_moments() {
        // 0.3 N(-1, 0.1^2) + 0.7 N(0.5, 0.1^2)
        let (w1, m1, w2, m2, s) = (0.3, -1.0, 0.7, 0.5, 0.1_f64);
        let x: Vec<f64> = (0..6001).map(|k| -3.0 + k as f64 * 0.001).collect();
        let g = |x: f64, m: f64| (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let p: Vec<f64> = x.iter().map(|&x| w1 * g(x, m1) + w2 * g(x, m2)).collect();
        let got = moments_from_pdf(&DensityCurve::new(x, p)).unwrap();
        // central moments of a normal mixture, by hand
        let mean = w1 * m1 + w2 * m2;
        let (d1, d2) = (m1 - mean, m2 - mean);
        let c2 = w1 * (d1 * d1 + s * s) + w2 * (d2 * d2 + s * s);
        let c3 = w1 * (d1.powi(3) + 3.0 * d1 * s * s) + w2 * (d2.powi(3) + 3.0 * d2 * s * s);
        let c4 = w1 * (d1.powi(4) + 6.0 * d1 * d1 * s * s + 3.0 * s.powi(4))
            + w2 * (d2.powi(4) + 6.0 * d2 * d2 * s * s + 3.0 * s.powi(4));
        assert_abs_diff_eq!(got.mean, mean, epsilon = 1e-10);
        assert_abs_diff_eq!(got.std_dev, c2.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(got.skewness, c3 / c2.powf(1.5), epsilon = 1e-9);
        assert_abs_diff_eq!(got.kurtosis, c4 / (c2 * c2), epsilon = 1e-9);
        assert!(got.pearson_ok());
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let c = DensityCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]);
        assert!(matches!(moments_from_pdf(&c), Err(Error::Degenerate(_))));
        let c = DensityCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]);
        assert!(matches!(moments_from_pdf(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rmse_cases() {
        let x: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let a = DensityCurve::new(x.clone(), vec![1.0; 11]);
        let b = DensityCurve::new(x.clone(), vec![1.001; 11]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&a, &b).unwrap(), 1e-3, epsilon = 1e-12);
        let c = DensityCurve::new(x[..10].to_vec(), vec![1.0; 10]);
        assert!(matches!(rmse(&a, &c), Err(Error::Alignment(_))));
        let shifted = DensityCurve::new(x.iter().map(|v| v + 0.05).collect(), vec![1.0; 11]);
        assert!(matches!(rmse(&a, &shifted), Err(Error::Alignment(_))));
    }

    #[test]
    fn csv_and_json_shapes() {
        let c = DensityCurve::new(vec![0.0, 0.5], vec![1.0, 1.0]);
        let csv = c.to_csv();
        assert!(csv.starts_with("x,density\n"));
        assert_eq!(csv.lines().count(), 3);
        let m = MomentSummary { mean: 0.0, std_dev: 1.0, skewness: 0.0, kurtosis: 3.0, mass: 1.0, renormalized: true };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        for key in ["mean", "std_dev", "skewness", "kurtosis", "mass", "renormalized"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gaussian_round_trip(m in -0.1f64..0.1, s in 0.02f64..0.2) {
            let c = CfSamples::from_fn(&PhiGrid::new(512.0, 513).unwrap(), gaussian_cf(m, s));
            let curve = pdf_from_cf_fast(&c, m - 8.0 * s, m + 8.0 * s, 1601).unwrap();
            let got = moments_from_pdf(&curve).unwrap();
            prop_assert!((got.mean - m).abs() < 1e-6);
            prop_assert!((got.std_dev - s).abs() < 1e-5 * s.max(0.05));
            prop_assert!(got.skewness.abs() < 1e-4);
            prop_assert!((got.kurtosis - 3.0).abs() < 1e-3);
            prop_assert!(got.pearson_ok());
        }

        #[test]
        fn finer_spectrum_never_hurts(s in 0.03f64..0.2) {
            let exact = |x: f64| (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
            let err = |phi_max: f64, count: usize, x_count: usize| {
                let g = PhiGrid::new(phi_max, count).unwrap();
                let c = CfSamples::from_fn(&g, gaussian_cf(0.0, s));
                let curve = pdf_from_cf_fast(&c, -0.6, 0.6, x_count).unwrap();
                curve.x_nodes.iter().zip(&curve.density).map(|(&x, p)| (p - exact(x)).abs()).fold(0.0, f64::max)
            };
            let coarse = err(32.0, 33, 301);
            let fine = err(64.0, 65, 601);
            prop_assert!(fine <= coarse + 1e-12, "{fine} > {coarse}");
        }
    }
}
