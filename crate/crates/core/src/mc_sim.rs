//! Monte Carlo oracle: Euler paths of the Heston and jump-diffusion models
//! with the third moment variation accumulated alongside.
//!
//! Every path draws from its own ChaCha8 stream `(seed, path index)`, so the
//! output does not depend on how paths are scheduled across threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HestonParams, JumpParams, SwapSpec};
use crate::realized::{third_moment_variation, ReturnPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceScheme {
    /// `max(V, 0)` in drift and diffusion.
    #[default]
    FullTruncation,
    /// `|V|` after every update.
    Reflection,
}

impl std::str::FromStr for VarianceScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_truncation" => Ok(VarianceScheme::FullTruncation),
            "reflection" => Ok(VarianceScheme::Reflection),
            other => Err(Error::Config(format!("unknown variance scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub variance: VarianceScheme,
}

impl SimConfig {
    pub fn new(steps: usize, paths: usize, seed: u64) -> Self {
        SimConfig { steps, paths, seed, variance: VarianceScheme::FullTruncation }
    }

    pub fn check(&self) -> Result<()> {
        if self.steps < 10 {
            return Err(Error::Config(format!("steps = {} must be at least 10", self.steps)));
        }
        if self.paths < 1 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        Ok(())
    }

    fn rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }
}

/// Terminal samples, aligned by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub beta: f64,
    pub r_t: Vec<f64>,
    pub y_t: Vec<f64>,
    pub x_t: Vec<f64>,
    pub jump_counts: Vec<u32>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.r_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_t.is_empty()
    }

    /// Same `R` and `Y` samples with `X` rebuilt for another hedge number.
    pub fn with_beta(&self, beta: f64) -> SampleSet {
        SampleSet {
            beta,
            x_t: self.r_t.iter().zip(&self.y_t).map(|(r, y)| r - beta * y).collect(),
            ..self.clone()
        }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.r_t.iter().copied().zip(self.y_t.iter().copied()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.len() + 16);
        s.push_str("r_T,y_T,x_T\n");
        for ((r, y), x) in self.r_t.iter().zip(&self.y_t).zip(&self.x_t) {
            let _ = writeln!(s, "{r:.16e},{y:.16e},{x:.16e}");
        }
        s
    }

    /// Reads `r_T,y_T[,x_T]` rows; `x_T` is recomputed for `beta`.
    pub fn from_csv(text: &str, beta: f64) -> Result<SampleSet> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?.clone();
        if headers.len() < 2 || &headers[0] != "r_T" || &headers[1] != "y_T" {
            return Err(Error::Parse { line: 1, reason: "expected header starting `r_T,y_T`".into() });
        }
        let (mut r, mut y) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse { line, reason: format!("bad value in column {}", k + 1) })
            };
            r.push(num(0)?);
            y.push(num(1)?);
        }
        let n = r.len();
        Ok(SampleSet { beta, r_t: r, y_t: y, x_t: Vec::new(), jump_counts: vec![0; n] }.with_beta(beta))
    }
}

/// One step of a single path. `v` is the raw Euler state.
struct PathState {
    r: f64,
    v: f64,
    y: f64,
    jumps: u32,
}

fn check_sim_params(params: &HestonParams) -> Result<()> {
    // gamma = 0 is a valid degenerate case for simulation
    let probe = if params.gamma == 0.0 { HestonParams { gamma: 1.0, ..*params } } else { *params };
    probe.check_domain()
}

#[inline]
fn diffusion_step(s: &mut PathState, p: &HestonParams, dt: f64, sqdt: f64, rho_c: f64, scheme: VarianceScheme, z1: f64, z2: f64) {
    let vp = s.v.max(0.0);
    s.y += 2.0 * s.r * vp * dt;
    s.r += (p.mu - 0.5 * vp) * dt + vp.sqrt() * sqdt * z1;
    s.v += p.kappa * (p.theta - vp) * dt + p.gamma * vp.sqrt() * sqdt * (p.rho * z1 + rho_c * z2);
    if scheme == VarianceScheme::Reflection {
        s.v = s.v.abs();
    }
}

#[inline]
fn apply_jump(s: &mut PathState, z: f64) {
    // d[R, R^2] = z ((R + z)^2 - R^2)
    s.y += z * (2.0 * s.r * z + z * z);
    s.r += z;
    s.jumps += 1;
}

fn simulate(params: &HestonParams, jumps: Option<&JumpParams>, spec: &SwapSpec, cfg: &SimConfig) -> Result<SampleSet> {
    cfg.check()?;
    check_sim_params(params)?;
    spec.check_domain()?;
    let dt = spec.maturity / cfg.steps as f64;
    let sqdt = dt.sqrt();
    let rho_c = (1.0 - params.rho * params.rho).max(0.0).sqrt();
    let poisson = match jumps {
        Some(j) if j.lambda > 0.0 => {
            j.check_domain()?;
            Some((Poisson::new(j.lambda * dt).map_err(|e| Error::Config(e.to_string()))?, j.sigma_j))
        }
        Some(j) => {
            j.check_domain()?;
            None
        }
        None => None,
    };
    let out: Vec<(f64, f64, u32)> = (0..cfg.paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = cfg.rng(path);
            let mut s = PathState { r: 0.0, v: params.v0, y: 0.0, jumps: 0 };
            for _ in 0..cfg.steps {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                diffusion_step(&mut s, params, dt, sqdt, rho_c, cfg.variance, z1, z2);
                if let Some((pois, sj)) = &poisson {
                    let count = pois.sample(&mut rng) as u32;
                    for _ in 0..count {
                        let z: f64 = rng.sample(StandardNormal);
                        apply_jump(&mut s, sj * z);
                    }
                }
            }
            (s.r, s.y, s.jumps)
        })
        .collect();
    let r_t: Vec<f64> = out.iter().map(|o| o.0).collect();
    let y_t: Vec<f64> = out.iter().map(|o| o.1).collect();
    let x_t = r_t.iter().zip(&y_t).map(|(r, y)| r - spec.beta * y).collect();
    Ok(SampleSet { beta: spec.beta, r_t, y_t, x_t, jump_counts: out.iter().map(|o| o.2).collect() })
}

pub fn simulate_heston(params: &HestonParams, spec: &SwapSpec, cfg: &SimConfig) -> Result<SampleSet> {
    simulate(params, None, spec, cfg)
}

/// With `lambda = 0` no jump draws are made, so the output equals
/// [`simulate_heston`] bit for bit.
pub fn simulate_svjd(params: &HestonParams, jumps: &JumpParams, spec: &SwapSpec, cfg: &SimConfig) -> Result<SampleSet> {
    simulate(params, Some(jumps), spec, cfg)
}

/// A full path `(times, R)` on the simulation partition, plus the accumulated
/// `2 sum R_{i-1} V_{i-1} dt`.
pub fn simulate_heston_path(params: &HestonParams, maturity: f64, cfg: &SimConfig, path: usize) -> Result<(ReturnPath, f64)> {
    cfg.check()?;
    check_sim_params(params)?;
    let dt = maturity / cfg.steps as f64;
    let sqdt = dt.sqrt();
    let rho_c = (1.0 - params.rho * params.rho).max(0.0).sqrt();
    let mut rng = cfg.rng(path);
    let mut s = PathState { r: 0.0, v: params.v0, y: 0.0, jumps: 0 };
    let mut r = Vec::with_capacity(cfg.steps + 1);
    r.push(0.0);
    for _ in 0..cfg.steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        diffusion_step(&mut s, params, dt, sqdt, rho_c, cfg.variance, z1, z2);
        r.push(s.r);
    }
    Ok((ReturnPath::uniform(maturity, r)?, s.y))
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Population moments with delta-method standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skew: f64,
    pub kurt: f64,
    pub se_mean: f64,
    pub se_sd: f64,
    pub se_skew: f64,
    pub se_kurt: f64,
}

impl SampleMoments {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

pub fn sample_moments(samples: &[f64]) -> Result<SampleMoments> {
    let len = samples.len();
    if len < 2 {
        return Err(Error::InsufficientData { needed: 2, got: len });
    }
    let n = len as f64;
    let mean = compensated_sum(samples.iter().copied()) / n;
    let central = |k: i32| compensated_sum(samples.iter().map(|x| (x - mean).powi(k))) / n;
    let m2 = central(2);
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("zero sample variance".into()));
    }
    let (m3, m4) = (central(3), central(4));
    let sd = m2.sqrt();
    let skew = m3 / (m2 * sd);
    let kurt = m4 / (m2 * m2);
    // influence functions; the mean's estimation enters m3 and m4
    let se = |f: &dyn Fn(f64) -> f64| (compensated_sum(samples.iter().map(|&x| f(x - mean).powi(2))) / n / n).sqrt();
    let if_sd = |d: f64| (d * d - m2) / (2.0 * sd);
    let if_skew = |d: f64| (d.powi(3) - m3 - 3.0 * m2 * d) / (m2 * sd) - 1.5 * skew * (d * d - m2) / m2;
    let if_kurt = |d: f64| (d.powi(4) - m4 - 4.0 * m3 * d) / (m2 * m2) - 2.0 * kurt * (d * d - m2) / m2;
    Ok(SampleMoments {
        n: len,
        mean,
        sd,
        skew,
        kurt,
        se_mean: sd / n.sqrt(),
        se_sd: se(&if_sd),
        se_skew: se(&if_skew),
        se_kurt: se(&if_kurt),
    })
}

/// Per-path gap between the realized estimator and the accumulated integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub steps: usize,
    pub paths: usize,
    pub median_rel_diff: f64,
    pub mean_rel_diff: f64,
    pub max_rel_diff: f64,
}

/// Compares `third_moment_variation` of each simulated path with the
/// left-point `2 sum R V dt` on the same path.
pub fn realized_consistency_check(cfg: &SimConfig, params: &HestonParams, maturity: f64) -> Result<ConsistencyReport> {
    cfg.check()?;
    let mut rel: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let (path, integral) = simulate_heston_path(params, maturity, cfg, k)?;
            let tmv = third_moment_variation(&path)?;
            Ok((tmv - integral).abs() / integral.abs().max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;
    rel.sort_by(|a, b| a.total_cmp(b));
    let m = rel.len();
    let median = if m % 2 == 1 { rel[m / 2] } else { 0.5 * (rel[m / 2 - 1] + rel[m / 2]) };
    Ok(ConsistencyReport {
        steps: cfg.steps,
        paths: cfg.paths,
        median_rel_diff: median,
        mean_rel_diff: rel.iter().sum::<f64>() / m as f64,
        max_rel_diff: rel[m - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn flat_vol() -> HestonParams {
        HestonParams { gamma: 0.0, ..HestonParams::table1() }
    }

    #[test]
    fn config_checks() {
        assert!(SimConfig::new(9, 10, 1).check().is_err());
        assert!(SimConfig::new(10, 0, 1).check().is_err());
        assert!(SimConfig::new(10, 1, 1).check().is_ok());
        let bad = HestonParams { kappa: -1.0, ..HestonParams::table1() };
        assert!(simulate_heston(&bad, &SwapSpec::new(0.1, 0.0), &SimConfig::new(10, 2, 1)).is_err());
    }

    #[test]
    fn moments_two_points() {
        let m = sample_moments(&[-1.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.skew, 0.0);
        assert_eq!(m.sd, 1.0);
    }

    #[test]
    fn moments_four_points() {
        // deviations -1, -1, -1, 3: m2 = 3, m3 = 6, m4 = 21
        let m = sample_moments(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(m.mean, 1.0);
        assert_abs_diff_eq!(m.sd, 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.skew, 2.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.kurt, 7.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_errors() {
        assert!(matches!(sample_moments(&[1.0]), Err(Error::InsufficientData { .. })));
        assert!(matches!(sample_moments(&[2.0, 2.0, 2.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gaussian_kurtosis_and_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.sample(StandardNormal)).collect();
        let m = sample_moments(&xs).unwrap();
        assert!((m.kurt - 3.0).abs() < 3.0 * m.se_kurt, "{} +- {}", m.kurt, m.se_kurt);
        // asymptotic values for a normal: sd/sqrt(2n), sqrt(6/n), sqrt(24/n)
        let n = xs.len() as f64;
        assert!((m.se_sd / (1.0 / (2.0 * n).sqrt()) - 1.0).abs() < 0.05);
        assert!((m.se_skew / (6.0 / n).sqrt() - 1.0).abs() < 0.05);
        assert!((m.se_kurt / (24.0 / n).sqrt() - 1.0).abs() < 0.1);
    }

    #[test]
    fn standard_errors_match_replication_spread() {
        // spread of skewness across independent batches of an exponential
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batches: Vec<SampleMoments> = (0..200)
            .map(|_| {
                let xs: Vec<f64> = (0..2000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                sample_moments(&xs).unwrap()
            })
            .collect();
        let sk: Vec<f64> = batches.iter().map(|b| b.skew).collect();
        let spread = sample_moments(&sk).unwrap().sd;
        let typical = batches.iter().map(|b| b.se_skew).sum::<f64>() / batches.len() as f64;
        assert!((typical / spread - 1.0).abs() < 0.3, "{typical} vs {spread}");
    }

    #[test]
    fn constant_variance_limit() {
        let p = flat_vol();
        let s = simulate_heston(&p, &SwapSpec::new(0.1, 0.0), &SimConfig::new(50, 100_000, 7)).unwrap();
        let m = sample_moments(&s.r_t).unwrap();
        let mean = (p.mu - 0.5 * p.theta) * 0.1;
        assert!((m.mean - mean).abs() < 3.0 * m.se_mean);
        let var = p.theta * 0.1;
        assert!((m.sd * m.sd - var).abs() < 3.0 * 2.0 * m.sd * m.se_sd);
    }

    #[test]
    fn construction_identity_and_beta_invariance() {
        let p = HestonParams::table2();
        let j = JumpParams::table2();
        let cfg = SimConfig::new(20, 500, 3);
        let a = simulate_svjd(&p, &j, &SwapSpec::new(0.1, 0.0), &cfg).unwrap();
        let b = simulate_svjd(&p, &j, &SwapSpec::new(0.1, 45.0), &cfg).unwrap();
        assert_eq!(a.r_t, b.r_t);
        assert_eq!(a.y_t, b.y_t);
        assert_ne!(a.x_t, b.x_t);
        for k in 0..b.len() {
            assert_eq!(b.x_t[k], b.r_t[k] - 45.0 * b.y_t[k]);
        }
        assert!(a.jump_counts.iter().any(|&c| c > 0));
    }

    #[test]
    fn zero_intensity_is_heston_bitwise() {
        let p = HestonParams::table1();
        let cfg = SimConfig::new(20, 300, 8);
        let spec = SwapSpec::new(0.1, 30.0);
        let a = simulate_heston(&p, &spec, &cfg).unwrap();
        let b = simulate_svjd(&p, &JumpParams::none(), &spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_jump_mapping() {
        // frozen diffusion: R_{s-} = c, one jump of size z
        let (c, z, beta) = (0.04, -0.03, 45.0);
        let mut s = PathState { r: c, v: 0.0, y: 0.0, jumps: 0 };
        let x_before = s.r - beta * s.y;
        apply_jump(&mut s, z);
        let x_jump = (s.r - beta * s.y) - x_before;
        assert_abs_diff_eq!(x_jump, z - 2.0 * beta * c * z * z - beta * z.powi(3), epsilon = 1e-16);
    }

    #[test]
    fn variance_is_floored() {
        let p = HestonParams { gamma: 2.5, ..HestonParams::table1() };
        let cfg = SimConfig { variance: VarianceScheme::Reflection, ..SimConfig::new(20, 1, 1) };
        let mut rng = cfg.rng(0);
        let mut s = PathState { r: 0.0, v: 0.01, y: 0.0, jumps: 0 };
        for _ in 0..2000 {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            diffusion_step(&mut s, &p, 0.01, 0.1, 0.78, cfg.variance, z1, z2);
            assert!(s.v >= 0.0);
        }
    }

    #[test]
    fn reproducible_and_schedule_free() {
        let p = HestonParams::table1();
        let cfg = SimConfig::new(20, 64, 99);
        let spec = SwapSpec::new(0.1, 10.0);
        let a = simulate_heston(&p, &spec, &cfg).unwrap();
        let b = simulate_heston(&p, &spec, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_heston(&p, &spec, &cfg)).unwrap();
        assert_eq!(a, c);
        // a prefix of paths is unaffected by the total count
        let d = simulate_heston(&p, &spec, &SimConfig::new(20, 10, 99)).unwrap();
        assert_eq!(&a.r_t[..10], &d.r_t[..]);
    }

    #[test]
    fn sample_csv_round_trip() {
        let s = simulate_heston(&HestonParams::table1(), &SwapSpec::new(0.1, 20.0), &SimConfig::new(10, 5, 1)).unwrap();
        let back = SampleSet::from_csv(&s.to_csv(), 20.0).unwrap();
        assert_eq!(back.r_t, s.r_t);
        assert_eq!(back.x_t, s.x_t);
        assert!(SampleSet::from_csv("a,b\n1,2\n", 0.0).is_err());
    }

    #[test]
    fn path_accumulator_matches_samples() {
        let p = HestonParams::table1();
        let cfg = SimConfig::new(200, 3, 21);
        let s = simulate_heston(&p, &SwapSpec::new(0.1, 0.0), &cfg).unwrap();
        for k in 0..3 {
            let (path, y) = simulate_heston_path(&p, 0.1, &cfg, k).unwrap();
            assert_eq!(path.terminal(), s.r_t[k]);
            assert_eq!(y, s.y_t[k]);
        }
    }

    #[test]
    fn flat_vol_realized_against_riemann_sum() {
        // the per-path gap has a noise floor of about sqrt(2 / steps) = 1.4%
        let r = realized_consistency_check(&SimConfig::new(10_000, 40, 2), &flat_vol(), 0.1).unwrap();
        assert!(r.median_rel_diff <= 0.05, "{r:?}");
        assert!(r.median_rel_diff >= 0.005, "{r:?}");
    }

    #[test]
    fn coarse_partition_is_worse() {
        let p = HestonParams::table1();
        let fine = realized_consistency_check(&SimConfig::new(10_000, 40, 4), &p, 0.1).unwrap();
        let coarse = realized_consistency_check(&SimConfig::new(10, 40, 4), &p, 0.1).unwrap();
        assert!(coarse.median_rel_diff > 3.0 * fine.median_rel_diff, "{coarse:?} {fine:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn compensated_sum_is_order_free(mut xs in proptest::collection::vec(-1e6f64..1e6, 1..200)) {
            let a = compensated_sum(xs.iter().copied());
            xs.reverse();
            let b = compensated_sum(xs.iter().copied());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
