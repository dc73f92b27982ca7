//! Realized third moment variation on discrete paths, swap payoffs, hedged
//! returns, the quantile-matching hedge-number search, QQ diagnostics and the
//! rolling-swap backtest.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::models::SwapSpec;

/// Observation times `0 = t_0 < ... < t_N` with cumulative log-returns,
/// `R(t_0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPath {
    times: Vec<f64>,
    log_returns: Vec<f64>,
}

impl ReturnPath {
    pub fn new(times: Vec<f64>, log_returns: Vec<f64>) -> Result<Self> {
        if times.len() != log_returns.len() {
            return Err(Error::InvalidPath(format!("{} times but {} returns", times.len(), log_returns.len())));
        }
        if times.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!("times not strictly increasing at index {}", k + 1)));
        }
        if times.iter().chain(&log_returns).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        if log_returns[0] != 0.0 {
            return Err(Error::InvalidPath(format!("first log-return is {}, expected 0", log_returns[0])));
        }
        Ok(ReturnPath { times, log_returns })
    }

    /// Path on an equally spaced partition of `[0, maturity]`.
    pub fn uniform(maturity: f64, log_returns: Vec<f64>) -> Result<Self> {
        let n = log_returns.len().max(2) - 1;
        let times = (0..log_returns.len()).map(|k| maturity * k as f64 / n as f64).collect();
        Self::new(times, log_returns)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_returns(&self) -> &[f64] {
        &self.log_returns
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> f64 {
        self.log_returns[self.log_returns.len() - 1]
    }

    /// Observations `start..=end`, shifted so that time and return start at 0.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if end >= self.len() || start > end {
            return Err(Error::InvalidPath(format!("window {start}..={end} outside {} observations", self.len())));
        }
        let (t0, r0) = (self.times[start], self.log_returns[start]);
        Ok(ReturnPath {
            times: self.times[start..=end].iter().map(|t| t - t0).collect(),
            log_returns: self.log_returns[start..=end].iter().map(|r| r - r0).collect(),
        })
    }

    /// Reads `time,log_return` rows; lines starting with `#` are skipped.
    /// Line numbers in errors are physical lines of `text`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?.clone();
        if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "log_return" {
            return Err(Error::Parse { line: 1, reason: format!("expected header `time,log_return`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
        }
        let mut times = Vec::new();
        let mut rets = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |k: usize, name: &str| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse { line, reason: format!("missing {name}") })?
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line, reason: format!("bad {name} `{}`", &rec[k]) })
            };
            times.push(field(0, "time")?);
            rets.push(field(1, "log_return")?);
        }
        Self::new(times, rets)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,log_return\n");
        for (t, r) in self.times.iter().zip(&self.log_returns) {
            let _ = writeln!(s, "{t:.16e},{r:.16e}");
        }
        s
    }
}

/// `sum (R_i - R_{i-1}) (R_i^2 - R_{i-1}^2)` over the path's partition.
pub fn third_moment_variation(path: &ReturnPath) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: path.len() });
    }
    Ok(path
        .log_returns
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] * w[1] - w[0] * w[0]))
        .sum())
}

fn check_coverage(path: &ReturnPath, maturity: f64) -> Result<()> {
    let start = path.times[0];
    let end = path.times[path.len() - 1];
    let tol = 1e-9 * maturity.max(1.0);
    if start.abs() > tol || end < maturity - tol {
        return Err(Error::Coverage { start, end, maturity });
    }
    Ok(())
}

/// Floating minus fixed leg received by the swap buyer.
pub fn swap_payoff(path: &ReturnPath, spec: &SwapSpec) -> Result<f64> {
    check_coverage(path, spec.maturity)?;
    let tmv = third_moment_variation(path)?;
    Ok(spec.beta * spec.notional_scale * -tmv - spec.fixed_leg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeMode {
    /// `log(e^{R_T} - beta [R, R^2]_T)`.
    Exact,
    /// `R_T - beta [R, R^2]_T`.
    Linearized,
}

impl std::str::FromStr for HedgeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(HedgeMode::Exact),
            "linearized" | "linear" => Ok(HedgeMode::Linearized),
            other => Err(Error::Config(format!("unknown hedge mode `{other}`"))),
        }
    }
}

/// Hedged log-return from the terminal return and variation.
pub fn hedged_return(r_t: f64, variation: f64, beta: f64, mode: HedgeMode) -> Result<f64> {
    match mode {
        HedgeMode::Linearized => Ok(r_t - beta * variation),
        HedgeMode::Exact => {
            let value = r_t.exp() - beta * variation;
            if value > 0.0 {
                // R + log(1 - beta Y e^{-R}): exact identity at beta = 0
                Ok(r_t + (-beta * variation * (-r_t).exp()).ln_1p())
            } else {
                Err(Error::Insolvency { value })
            }
        }
    }
}

pub fn hedged_log_return(path: &ReturnPath, spec: &SwapSpec, mode: HedgeMode) -> Result<f64> {
    check_coverage(path, spec.maturity)?;
    hedged_return(path.terminal(), third_moment_variation(path)?, spec.beta, mode)
}

/// `k / (count + 1)` for `k = 1..=count`.
pub fn probability_levels(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / (count + 1) as f64).collect()
}

/// Quantile of sorted data at level `p`: linear interpolation of order
/// statistics with `x_(k)` placed at `k / (n + 1)`, clamped to the extremes.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (p * (n + 1) as f64).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

fn sorted_copy(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `(standard normal quantile, empirical quantile)` at `k / (count + 1)`.
pub fn qq_points(samples: &[f64], quantile_count: usize) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sorted = sorted_copy(samples.iter().copied());
    let z = standard_normal();
    Ok(probability_levels(quantile_count)
        .into_iter()
        .map(|p| (z.inverse_cdf(p), sorted_quantile(&sorted, p)))
        .collect())
}

pub const DEFAULT_QUANTILES: usize = 199;
/// Points of the coarse scan preceding golden-section refinement.
pub const SCAN_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeOptimum {
    pub beta: f64,
    pub objective: f64,
}

/// Squared distance between the empirical quantiles of `R_T - beta Y_T` and
/// those of the normal law with the same mean and standard deviation.
pub fn quantile_objective(samples: &[(f64, f64)], beta: f64, levels: &[f64], z: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let x = sorted_copy(samples.iter().map(|&(r, y)| r - beta * y));
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    levels
        .iter()
        .zip(z)
        .map(|(&p, &zk)| (sorted_quantile(&x, p) - (mean + sd * zk)).powi(2))
        .sum()
}

/// Hedge number whose portfolio quantiles are closest to normal. Coarse scan
/// of [`SCAN_POINTS`] values, then golden-section refinement around the best
/// one; ties go to the smallest `beta`.
pub fn optimize_hedge_number(samples: &[(f64, f64)], lo: f64, hi: f64, quantile_count: usize) -> Result<HedgeOptimum> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData { needed: 100, got: samples.len() });
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("search interval [{lo}, {hi}] is empty")));
    }
    if quantile_count == 0 {
        return Err(Error::Config("quantile_count must be positive".into()));
    }
    let spread = |f: fn(&(f64, f64)) -> f64| {
        let (mn, mx) = samples.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        mx - mn
    };
    if spread(|s| s.0) == 0.0 && spread(|s| s.1) == 0.0 {
        return Err(Error::Degenerate("all samples identical".into()));
    }
    let levels = probability_levels(quantile_count);
    let zn = standard_normal();
    let z: Vec<f64> = levels.iter().map(|&p| zn.inverse_cdf(p)).collect();
    let obj = |b: f64| quantile_objective(samples, b, &levels, &z);

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let scan: Vec<f64> = (0..SCAN_POINTS).into_par_iter().map(|k| obj(lo + k as f64 * step)).collect();
    let mut best = 0;
    for (k, &v) in scan.iter().enumerate() {
        if v < scan[best] {
            best = k;
        }
    }
    let coarse = HedgeOptimum { beta: lo + best as f64 * step, objective: scan[best] };

    let (mut a, mut b) = (lo + best.saturating_sub(1) as f64 * step, lo + (best + 1).min(SCAN_POINTS - 1) as f64 * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while b - a > 1e-6 * (hi - lo) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj(d);
        }
    }
    let (rb, rv) = if fc <= fd { (c, fc) } else { (d, fd) };
    if rv < coarse.objective {
        Ok(HedgeOptimum { beta: rb, objective: rv })
    } else {
        Ok(coarse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Path increments per swap leg.
    pub rebalance_interval: usize,
    pub cost_rate: f64,
    /// Charge the cost once at inception instead of at every roll.
    pub multi_leg: bool,
}

impl BacktestConfig {
    pub fn check(&self) -> Result<()> {
        if self.rebalance_interval < 1 {
            return Err(Error::Config("rebalance_interval must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.cost_rate) {
            return Err(Error::Config(format!("cost_rate {} not in [0, 1)", self.cost_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum BacktestStatus {
    Completed,
    /// Value was not positive at this observation; the series ends there.
    Insolvent { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub times: Vec<f64>,
    pub portfolio: Vec<f64>,
    pub underlying: Vec<f64>,
    pub status: BacktestStatus,
}

impl BacktestResult {
    pub fn terminal(&self) -> f64 {
        self.portfolio[self.portfolio.len() - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,portfolio_value,underlying_value\n");
        for ((t, p), u) in self.times.iter().zip(&self.portfolio).zip(&self.underlying) {
            let _ = writeln!(s, "{t:.16e},{p:.16e},{u:.16e}");
        }
        s
    }
}

/// Rolls a swap every `rebalance_interval` increments. Within a leg the
/// portfolio holds its value in the underlying; at the leg's end the swap
/// pays `beta * P_start * (-[R, R^2])` over the leg minus `fixed_leg`
/// (scaled by `P_start`). Costs are `cost_rate * P` per contracting event and
/// only apply when a swap is held (`beta != 0`). A trailing partial leg is
/// settled at the last observation.
pub fn backtest(path: &ReturnPath, spec: &SwapSpec, config: &BacktestConfig) -> Result<BacktestResult> {
    config.check()?;
    if path.len() < config.rebalance_interval + 1 {
        return Err(Error::InsufficientData { needed: config.rebalance_interval + 1, got: path.len() });
    }
    let r = path.log_returns();
    let m = config.rebalance_interval;
    let last = path.len() - 1;
    let underlying: Vec<f64> = r.iter().map(|x| x.exp()).collect();
    let mut portfolio = Vec::with_capacity(path.len());
    let mut value = 1.0;
    let mut start = 0;
    let charge = spec.beta != 0.0 && config.cost_rate > 0.0;
    while start < last {
        let end = (start + m).min(last);
        if charge && (start == 0 || !config.multi_leg) {
            value *= 1.0 - config.cost_rate;
        }
        if start == 0 {
            portfolio.push(value);
        }
        for k in start + 1..end {
            portfolio.push(value * (r[k] - r[start]).exp());
        }
        let leg = path.window(start, end)?;
        let payoff = -third_moment_variation(&leg)? * spec.beta - spec.fixed_leg;
        value = value * (r[end] - r[start]).exp() + value * payoff;
        portfolio.push(value);
        if value <= 0.0 {
            let times = path.times()[..=end].to_vec();
            return Ok(BacktestResult {
                times,
                portfolio,
                underlying: underlying[..=end].to_vec(),
                status: BacktestStatus::Insolvent { index: end, value },
            });
        }
        start = end;
    }
    Ok(BacktestResult { times: path.times().to_vec(), portfolio, underlying, status: BacktestStatus::Completed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn path(r: &[f64]) -> ReturnPath {
        ReturnPath::uniform(1.0, r.to_vec()).unwrap()
    }

    fn random_walk(seed: u64, n: usize, vol: f64) -> ReturnPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = vec![0.0];
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            r.push(r[r.len() - 1] + vol * z);
        }
        ReturnPath::uniform(1.0, r).unwrap()
    }

    #[test]
    fn path_validation() {
        assert!(ReturnPath::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(ReturnPath::new(vec![0.0, 0.0], vec![0.0, 0.1]).is_err());
        assert!(ReturnPath::new(vec![0.0, 1.0], vec![0.1, 0.1]).is_err());
        assert!(ReturnPath::new(vec![0.0, f64::NAN], vec![0.0, 0.1]).is_err());
        assert!(ReturnPath::new(vec![0.0, 1.0], vec![0.0, 0.1]).is_ok());
    }

    #[test]
    fn variation_examples() {
        assert_abs_diff_eq!(third_moment_variation(&path(&[0.0, 0.03, 0.03, 0.03])).unwrap(), 2.7e-5, epsilon = 1e-18);
        assert_abs_diff_eq!(third_moment_variation(&path(&[0.0, 0.1, -0.05])).unwrap(), 0.002125, epsilon = 1e-15);
        let one = ReturnPath::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(third_moment_variation(&one), Err(Error::InsufficientData { needed: 2, got: 1 }));
    }

    #[test]
    fn single_increment_is_odd() {
        let a = 0.07;
        assert_abs_diff_eq!(third_moment_variation(&path(&[0.0, a])).unwrap(), a.powi(3), epsilon = 1e-18);
        assert_abs_diff_eq!(third_moment_variation(&path(&[0.0, -a])).unwrap(), -a.powi(3), epsilon = 1e-18);
    }

    #[test]
    fn payoff_examples() {
        // -0.004 variation from a single increment of -0.004^(1/3)
        let p = path(&[0.0, -(0.004f64.cbrt())]);
        assert_abs_diff_eq!(swap_payoff(&p, &SwapSpec::new(1.0, 40.0)).unwrap(), 0.16, epsilon = 1e-12);
        let mut spec = SwapSpec::new(1.0, 0.0);
        spec.fixed_leg = 0.3;
        assert_eq!(swap_payoff(&p, &spec).unwrap(), -0.3);
        let mut spec = SwapSpec::new(1.0, 10.0);
        spec.notional_scale = 100.0;
        assert_abs_diff_eq!(swap_payoff(&path(&[0.0, 0.1, -0.05]), &spec).unwrap(), -2.125, epsilon = 1e-12);
    }

    #[test]
    fn payoff_requires_coverage() {
        let p = path(&[0.0, 0.1, -0.05]);
        assert!(matches!(swap_payoff(&p, &SwapSpec::new(2.0, 1.0)), Err(Error::Coverage { .. })));
        let late = ReturnPath::new(vec![0.5, 1.0], vec![0.0, 0.1]).unwrap();
        assert!(matches!(swap_payoff(&late, &SwapSpec::new(0.5, 1.0)), Err(Error::Coverage { .. })));
    }

    #[test]
    fn hedged_examples() {
        assert_abs_diff_eq!(
            hedged_return(0.02, -0.001, 40.0, HedgeMode::Exact).unwrap(),
            (0.02f64.exp() + 0.04).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(hedged_return(0.02, -0.001, 40.0, HedgeMode::Exact).unwrap(), 0.058458833508, epsilon = 1e-11);
        assert_abs_diff_eq!(hedged_return(0.02, -0.001, 40.0, HedgeMode::Linearized).unwrap(), 0.06, epsilon = 1e-15);
        for mode in [HedgeMode::Exact, HedgeMode::Linearized] {
            assert_abs_diff_eq!(hedged_return(0.013, 0.5, 0.0, mode).unwrap(), 0.013, epsilon = 1e-15);
        }
        assert!(matches!(hedged_return(0.0, 0.1, 20.0, HedgeMode::Exact), Err(Error::Insolvency { .. })));
        let p = path(&[0.0, 0.1, -0.05]);
        assert_eq!(hedged_log_return(&p, &SwapSpec::new(1.0, 0.0), HedgeMode::Exact).unwrap(), -0.05);
    }

    #[test]
    fn linearization_error_is_second_order() {
        // with R_T = 0: exact - linear = log(1 - e) + e, ~ -e^2/2
        let y = -1e-3;
        let mut prev = None;
        for beta in [8.0, 4.0, 2.0, 1.0, 0.5] {
            let gap = (hedged_return(0.0, y, beta, HedgeMode::Exact).unwrap()
                - hedged_return(0.0, y, beta, HedgeMode::Linearized).unwrap())
            .abs();
            if let Some(p) = prev {
                let ratio: f64 = p / gap;
                assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
            }
            prev = Some(gap);
        }
    }

    #[test]
    fn quantile_convention() {
        let s = [1.0, -1.0, 0.0];
        let q: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&p| sorted_quantile(&sorted_copy(s.iter().copied()), p)).collect();
        assert_eq!(q, vec![-1.0, 0.0, 1.0]);
        assert_eq!(probability_levels(199)[0], 1.0 / 200.0);
        assert_eq!(probability_levels(199)[198], 199.0 / 200.0);
        assert_eq!(sorted_quantile(&[2.0], 0.01), 2.0);
        assert_eq!(sorted_quantile(&[0.0, 1.0], 0.5), 0.5);
    }

    #[test]
    fn qq_on_exact_normal_positions_is_identity() {
        let n = 99;
        let z = standard_normal();
        let s: Vec<f64> = probability_levels(n).iter().map(|&p| z.inverse_cdf(p)).collect();
        for (a, b) in qq_points(&s, n).unwrap() {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(qq_points(&[], 5).is_err());
    }

    #[test]
    fn qq_left_skew_lower_tail() {
        // minus a lognormal: long left tail
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..20000).map(|_| -(rng.sample::<f64, _>(StandardNormal) * 0.8).exp()).collect();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let std: Vec<f64> = s.iter().map(|v| (v - mean) / sd).collect();
        let qq = qq_points(&std, 199).unwrap();
        assert!(qq[0].1 < qq[0].0);
        assert!(qq[1].1 < qq[1].0);
    }

    #[test]
    fn flat_objective_returns_lower_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<(f64, f64)> = (0..500).map(|_| (rng.sample::<f64, _>(StandardNormal) * 0.1, 0.0)).collect();
        let opt = optimize_hedge_number(&s, 3.0, 80.0, DEFAULT_QUANTILES).unwrap();
        assert_eq!(opt.beta, 3.0);
    }

    #[test]
    fn optimizer_errors() {
        let s = vec![(0.1, 0.2); 200];
        assert!(matches!(optimize_hedge_number(&s, 0.0, 1.0, 19), Err(Error::Degenerate(_))));
        assert!(matches!(optimize_hedge_number(&s[..50], 0.0, 1.0, 19), Err(Error::InsufficientData { .. })));
        assert!(matches!(optimize_hedge_number(&s, 1.0, 1.0, 19), Err(Error::Config(_))));
    }

    #[test]
    fn optimizer_recovers_planted_hedge() {
        // X = R - beta Y is normal only at beta = 12 (R carries 12 Y exactly)
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s: Vec<(f64, f64)> = (0..4000)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let y = 0.01 * (e.exp() - 1.0);
                (0.05 * g + 12.0 * y, y)
            })
            .collect();
        let opt = optimize_hedge_number(&s, 0.0, 40.0, DEFAULT_QUANTILES).unwrap();
        assert!((opt.beta - 12.0).abs() < 1.0, "{}", opt.beta);
    }

    #[test]
    fn backtest_pass_through() {
        let p = random_walk(1, 60, 0.01);
        for multi_leg in [true, false] {
            let cfg = BacktestConfig { rebalance_interval: 7, cost_rate: 0.0, multi_leg };
            let out = backtest(&p, &SwapSpec::new(1.0, 0.0), &cfg).unwrap();
            assert_eq!(out.portfolio.len(), p.len());
            for (a, r) in out.portfolio.iter().zip(p.log_returns()) {
                assert_abs_diff_eq!(*a, r.exp(), epsilon = 1e-14);
            }
            assert_eq!(out.status, BacktestStatus::Completed);
        }
    }

    #[test]
    fn backtest_single_window() {
        let leg = 0.002f64.cbrt();
        let p = path(&[0.0, -leg]);
        let cfg = BacktestConfig { rebalance_interval: 1, cost_rate: 0.0, multi_leg: false };
        let out = backtest(&p, &SwapSpec::new(1.0, 10.0), &cfg).unwrap();
        assert_abs_diff_eq!(out.terminal(), (-leg).exp() + 10.0 * 0.002, epsilon = 1e-14);
    }

    #[test]
    fn backtest_costs() {
        let p = random_walk(4, 36 * 20, 0.002);
        let spec = SwapSpec::new(1.0, 20.0);
        let run = |cost, multi_leg| {
            backtest(&p, &spec, &BacktestConfig { rebalance_interval: 20, cost_rate: cost, multi_leg }).unwrap().terminal()
        };
        assert!(run(0.005, false) < run(0.002, false));
        assert!(run(0.002, false) < run(0.002, true));
        assert_eq!(run(0.0, false), run(0.0, true));
    }

    #[test]
    fn backtest_insolvency_stops() {
        let p = path(&[0.0, 0.3, 0.6, 0.9]);
        let cfg = BacktestConfig { rebalance_interval: 1, cost_rate: 0.0, multi_leg: false };
        let out = backtest(&p, &SwapSpec::new(1.0, 100.0), &cfg).unwrap();
        assert!(matches!(out.status, BacktestStatus::Insolvent { index: 1, .. }));
        assert_eq!(out.portfolio.len(), 2);
    }

    #[test]
    fn backtest_config_checks() {
        let p = path(&[0.0, 0.1]);
        let bad = BacktestConfig { rebalance_interval: 0, cost_rate: 0.0, multi_leg: false };
        assert!(backtest(&p, &SwapSpec::new(1.0, 1.0), &bad).is_err());
        let bad = BacktestConfig { rebalance_interval: 1, cost_rate: 1.0, multi_leg: false };
        assert!(backtest(&p, &SwapSpec::new(1.0, 1.0), &bad).is_err());
        let long = BacktestConfig { rebalance_interval: 5, cost_rate: 0.0, multi_leg: false };
        assert!(matches!(backtest(&p, &SwapSpec::new(1.0, 1.0), &long), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let p = random_walk(2, 10, 0.01);
        let back = ReturnPath::from_csv(&p.to_csv()).unwrap();
        assert_eq!(back, p);
        let bad = "time,log_return\n0,0\n0.5,abc\n";
        assert_eq!(ReturnPath::from_csv(bad).unwrap_err(), Error::Parse { line: 3, reason: "bad log_return `abc`".into() });
        assert!(matches!(ReturnPath::from_csv("t,r\n0,0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ReturnPath::from_csv("time,log_return\n0,0\n1\n"), Err(Error::Parse { line: 3, .. })));
        let commented = "# run metadata\n# seed=7\ntime,log_return\n0,0\n0.5,x\n";
        assert!(matches!(ReturnPath::from_csv(commented), Err(Error::Parse { line: 5, .. })));
    }

    proptest! {
        #[test]
        fn repeated_observation_is_neutral(rs in proptest::collection::vec(-0.2f64..0.2, 2..30), at in 0usize..30) {
            let mut r = vec![0.0];
            r.extend(rs);
            let base = third_moment_variation(&path(&r)).unwrap();
            let k = at % r.len();
            let mut dup = r.clone();
            dup.insert(k, r[k]);
            let again = third_moment_variation(&path(&dup)).unwrap();
            prop_assert!((base - again).abs() <= 1e-15 * (1.0 + base.abs()));
        }

        #[test]
        fn payoff_is_linear(rs in proptest::collection::vec(-0.2f64..0.2, 1..20), b in -50.0f64..50.0, s in 0.1f64..100.0) {
            let mut r = vec![0.0];
            r.extend(rs);
            let p = path(&r);
            let mut unit = SwapSpec::new(1.0, 1.0);
            let base = swap_payoff(&p, &unit).unwrap();
            unit.beta = b;
            unit.notional_scale = s;
            let got = swap_payoff(&p, &unit).unwrap();
            prop_assert!((got - b * s * base).abs() <= 1e-12 * (1.0 + (b * s * base).abs()));
        }

        #[test]
        fn optimum_is_scale_invariant(seed in 0u64..1000, c in 0.2f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<(f64, f64)> = (0..300)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    let y = 0.01 * (e.exp() - 1.0);
                    (0.05 * g + 5.0 * y, y)
                })
                .collect();
            let scaled: Vec<(f64, f64)> = s.iter().map(|&(r, y)| (c * r, c * y)).collect();
            let a = optimize_hedge_number(&s, 0.0, 20.0, 49).unwrap();
            let b = optimize_hedge_number(&scaled, 0.0, 20.0, 49).unwrap();
            prop_assert!((a.beta - b.beta).abs() < 1e-3, "{} vs {}", a.beta, b.beta);
        }
    }
}
