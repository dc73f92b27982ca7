//! Brute-force references for the ADI march: a dense matrix exponential of
//! the discrete operator on a tiny grid, and a fine-step explicit Euler march.

use num_complex::Complex64;
use tailhedge::adi::{
    adi_step, apply_operator, build_grid, coefficients_heston, explicit_euler, init_delta, BoundaryRows,
    ComplexField, Grid2D,
};
use tailhedge::HestonParams;

type Mat = Vec<Vec<Complex64>>;

fn operator_matrix(grid: &Grid2D, params: &HestonParams, phi: f64, beta: f64) -> Mat {
    let c = coefficients_heston(grid, params, phi, beta);
    let m = grid.n * grid.n;
    let mut cols = vec![vec![Complex64::default(); m]; m];
    for k in 0..m {
        let mut e = ComplexField::zeros(grid.n);
        e.values[k] = Complex64::new(1.0, 0.0);
        let col = apply_operator(grid, &c, &e, BoundaryRows::Dirichlet);
        for (row, v) in col.values.iter().enumerate() {
            cols[row][k] = *v;
        }
    }
    cols
}

fn matvec(a: &Mat, x: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `exp(t A) x` by scaling and a long Taylor series on the vector.
fn expm_apply(a: &Mat, t: f64, x: &[Complex64]) -> Vec<Complex64> {
    let norm = a.iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max) * t;
    let pieces = (norm / 0.5).ceil().max(1.0) as usize;
    let h = t / pieces as f64;
    let mut y = x.to_vec();
    for _ in 0..pieces {
        let mut term = y.clone();
        let mut acc = y.clone();
        for k in 1..40 {
            term = matvec(a, &term).into_iter().map(|z| z * (h / k as f64)).collect();
            for (s, d) in acc.iter_mut().zip(&term) {
                *s += d;
            }
        }
        y = acc;
    }
    y
}

fn bump(grid: &Grid2D) -> ComplexField {
    let n = grid.n;
    let mut f = ComplexField::zeros(n);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let (r, v) = (grid.r_nodes[i], grid.v_nodes[j]);
            let w = (-(r / 0.2).powi(2) - ((v - 0.15) / 0.08).powi(2)).exp();
            f.set(i, j, Complex64::new(w, 0.0));
        }
    }
    f
}

fn rel_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max) / scale
}

#[test]
fn nine_by_nine_step_matches_matrix_exponential() {
    let grid = build_grid(0.5, 0.3, 9, 0.15).unwrap();
    let params = HestonParams::table1();
    for (phi, beta) in [(0.0, 0.0), (6.0, 40.0)] {
        let a = operator_matrix(&grid, &params, phi, beta);
        let c = coefficients_heston(&grid, &params, phi, beta);
        let f0 = bump(&grid);
        let gap = |dt: f64| {
            let adi = adi_step(&grid, &f0, &c, dt, BoundaryRows::Dirichlet).unwrap();
            let exact = expm_apply(&a, dt, &f0.values);
            rel_gap(&adi.values, &exact)
        };
        let (e1, e2, e3) = (gap(4e-4), gap(2e-4), gap(1e-4));
        assert!(e1 < 5e-5, "phi {phi}: {e1}");
        // local splitting error is second order in dt
        assert!(e1 / e2 > 3.5 && e2 / e3 > 3.5, "phi {phi}: {e1} {e2} {e3}");
    }
}

#[test]
fn matrix_exponential_helper_is_exact_on_diagonal() {
    let a: Mat = vec![
        vec![Complex64::new(-2.0, 1.0), Complex64::default()],
        vec![Complex64::default(), Complex64::new(0.5, 0.0)],
    ];
    let y = expm_apply(&a, 0.3, &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
    assert!((y[0] - (Complex64::new(-0.6, 0.3)).exp()).norm() < 1e-14);
    assert!((y[1] - 2.0 * 0.15f64.exp()).norm() < 1e-14);
}

#[test]
fn one_step_from_point_mass_matches_fine_explicit_march() {
    let grid = build_grid(0.5, 0.3, 41, 0.1).unwrap();
    let params = HestonParams::table1();
    let c = coefficients_heston(&grid, &params, 0.0, 0.0);
    let f0 = init_delta(&grid);
    let dt = 1e-3;
    let adi = adi_step(&grid, &f0, &c, dt, BoundaryRows::Dirichlet).unwrap();
    let fine = explicit_euler(&grid, &c, &f0, 1e-6, 1000, BoundaryRows::Dirichlet).unwrap();
    // smooth functionals of the field: mass and first moments in r and v
    let moment = |f: &ComplexField, w: &dyn Fn(usize, usize) -> f64| {
        let mut s = 0.0;
        for i in 0..grid.n {
            for j in 0..grid.n {
                s += grid.weight(i, j) * w(i, j) * f.at(i, j).re;
            }
        }
        s
    };
    let one = |_: usize, _: usize| 1.0;
    let r = |i: usize, _: usize| grid.r_nodes[i];
    let v = |_: usize, j: usize| grid.v_nodes[j];
    let (ma, mf) = (moment(&adi, &one), moment(&fine, &one));
    assert!((ma - mf).abs() < 1e-10, "{ma} {mf}");
    assert!((moment(&adi, &r) - moment(&fine, &r)).abs() < 2e-8);
    assert!((moment(&adi, &v) - moment(&fine, &v)).abs() < 1e-6);
    // pointwise the gap is bounded by the one-step splitting error on a point mass
    assert!(rel_gap(&adi.values, &fine.values) < 0.5, "{}", rel_gap(&adi.values, &fine.values));
}

#[test]
fn explicit_march_at_adi_step_blows_up() {
    let grid = build_grid(0.5, 0.3, 41, 0.1).unwrap();
    let c = coefficients_heston(&grid, &HestonParams::table1(), 0.0, 0.0);
    let r = explicit_euler(&grid, &c, &init_delta(&grid), 1e-3, 100, BoundaryRows::Dirichlet);
    assert!(matches!(r, Err(tailhedge::Error::Instability { .. })));
}
