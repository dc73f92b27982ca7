use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tailhedge::mc_sim::{sample_moments, simulate_heston, simulate_svjd, SampleSet};
use tailhedge::pipeline::{
    convergence_study, monotonicity_violations, solve_density, Model, SolverConfig, SpectralConfig,
};
use tailhedge::realized::{backtest, optimize_hedge_number, BacktestConfig, ReturnPath, DEFAULT_QUANTILES};
use tailhedge::adi::TimeScheme;
use tailhedge::{Error, HestonParams, Result, SwapSpec};

use crate::config::{ModelKind, RealList, Resolver};
use crate::emit::Sink;

/// Default refinement sweep of the convergence study.
pub const DEFAULT_DRS: [f64; 5] = [0.05, 0.02, 0.01, 0.005, 0.004];

fn read_input(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))
}

fn simulate(params: &HestonParams, model: Model, spec: &SwapSpec, cfg: &tailhedge::mc_sim::SimConfig) -> Result<SampleSet> {
    match model {
        Model::Heston => simulate_heston(params, spec, cfg),
        Model::Svjd(j) => simulate_svjd(params, &j, spec, cfg),
    }
}

pub fn solve(mut cfg: Resolver, out: &Path) -> Result<String> {
    let kind = cfg.model_kind()?;
    let params = cfg.heston()?;
    let model = cfg.model(kind)?;
    let spec = cfg.swap()?;
    let solver = cfg.solver(SolverConfig::default())?;
    let spectral = cfg.spectral(SpectralConfig::default())?;
    let res = solve_density(&params, model, &spec, &solver, &spectral)?;
    let sink = Sink::new(out, "solve", cfg.resolved().clone())?;
    sink.csv("density.csv", &res.curve.to_csv())?;
    sink.json(
        "moments.json",
        json!({
            "moments": res.moments,
            "diagnostics": {
                "frequencies_marched": res.cutoff_at,
                "frequencies_total": res.u.len(),
                "raw_mass": res.curve.raw_mass,
                "min_density": res.curve.min_density(),
            },
        }),
    )
}

pub fn simulate_cmd(mut cfg: Resolver, out: &Path) -> Result<String> {
    let kind = cfg.model_kind()?;
    let params = cfg.heston()?;
    let model = cfg.model(kind)?;
    let spec = cfg.swap()?;
    let sim = cfg.sim()?;
    let samples = simulate(&params, model, &spec, &sim)?;
    let sink = Sink::new(out, "simulate", cfg.resolved().clone())?;
    sink.csv("samples.csv", &samples.to_csv())?;
    let jumps: u64 = samples.jump_counts.iter().map(|&c| c as u64).sum();
    sink.json(
        "moments.json",
        json!({
            "x_T": sample_moments(&samples.x_t)?,
            "r_T": sample_moments(&samples.r_t)?,
            "y_T": sample_moments(&samples.y_t)?,
            "total_jumps": jumps,
        }),
    )
}

pub fn optimize_beta(mut cfg: Resolver, out: &Path) -> Result<String> {
    let lo = cfg.or("beta_lo", 0.0)?;
    let hi = cfg.or("beta_hi", 100.0)?;
    let quantiles = cfg.or("quantiles", DEFAULT_QUANTILES)?;
    let (pairs, source) = match cfg.opt::<String>("samples")? {
        Some(path) => (SampleSet::from_csv(&read_input(&path)?, 0.0)?.pairs(), json!({ "file": path })),
        None => {
            let kind = cfg.model_kind()?;
            let params = cfg.heston()?;
            let model = cfg.model(kind)?;
            let spec = cfg.swap()?;
            let sim = cfg.sim()?;
            (simulate(&params, model, &spec.with_beta(0.0), &sim)?.pairs(), json!({ "simulated_paths": sim.paths }))
        }
    };
    let best = optimize_hedge_number(&pairs, lo, hi, quantiles)?;
    let sink = Sink::new(out, "optimize-beta", cfg.resolved().clone())?;
    sink.json(
        "optimum.json",
        json!({ "beta": best.beta, "objective": best.objective, "samples": pairs.len(), "source": source }),
    )
}

pub fn backtest_cmd(mut cfg: Resolver, out: &Path) -> Result<String> {
    let returns: String = cfg.req("returns")?;
    let path = ReturnPath::from_csv(&read_input(&returns)?)?;
    let maturity = path.times()[path.len() - 1];
    let spec = SwapSpec {
        maturity: cfg.force("maturity", maturity),
        beta: cfg.or("beta", 0.0)?,
        fixed_leg: cfg.or("fixed_leg", 0.0)?,
        notional_scale: 1.0,
    };
    let bt = BacktestConfig {
        rebalance_interval: cfg.or("rebalance", path.len().saturating_sub(1).max(1))?,
        cost_rate: cfg.or("cost", 0.0)?,
        multi_leg: cfg.or("multi_leg", false)?,
    };
    let result = backtest(&path, &spec, &bt)?;
    let sink = Sink::new(out, "backtest", cfg.resolved().clone())?;
    sink.csv("backtest.csv", &result.to_csv())?;
    sink.json(
        "summary.json",
        json!({
            "terminal_value": result.terminal(),
            "underlying_terminal": result.underlying[result.underlying.len() - 1],
            "observations": result.portfolio.len(),
            "result": result.status,
        }),
    )
}

pub fn convergence(mut cfg: Resolver, out: &Path) -> Result<String> {
    let params = cfg.heston()?;
    cfg.force("model", ModelKind::Heston);
    cfg.force("beta", 0.0);
    let maturity: f64 = cfg.req("maturity")?;
    let drs = cfg.or("drs", RealList(DEFAULT_DRS.to_vec()))?.0;
    let r_max = cfg.or("r_max", 0.8)?;
    let v_max = cfg.or("v_max", 0.8)?;
    let dt = cfg.or("dt", 0.001)?;
    let scheme = cfg.or("scheme", TimeScheme::HundsdorferVerwer)?;
    let spectral = cfg.spectral(SpectralConfig { phi_max: 64.0, phi_count: 33, ..SpectralConfig::default() })?;
    let points = convergence_study(&params, maturity, &drs, r_max, v_max, dt, scheme, &spectral)?;
    let violations = monotonicity_violations(&points);
    let sink = Sink::new(out, "convergence", cfg.resolved().clone())?;
    let mut csv = String::from("dr,n,rmse,violation\n");
    for (k, p) in points.iter().enumerate() {
        csv.push_str(&format!("{:.16e},{},{:.16e},{}\n", p.dr, p.n, p.rmse, violations.contains(&k)));
    }
    sink.csv("convergence.csv", &csv)?;
    let by_dr: Vec<Value> =
        points.iter().map(|p| json!({ "dr": p.dr, "n": p.n, "rmse": p.rmse })).collect();
    sink.json(
        "summary.json",
        json!({ "points": by_dr, "monotone": violations.is_empty(), "violations": violations }),
    )
}

pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from("."))
}
