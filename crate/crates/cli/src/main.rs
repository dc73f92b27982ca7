mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailhedge::{Error, Result};

use config::Resolver;

#[derive(Parser)]
#[command(name = "tailhedge", version, about = "Return densities of tail-hedged portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PDE density and moments of the hedged return.
    Solve(Common),
    /// Monte Carlo samples of the terminal return, variation and hedged return.
    Simulate(Common),
    /// Hedge number whose hedged-return quantiles best match a normal.
    OptimizeBeta(Common),
    /// Rolls the swap over an observed return path.
    Backtest(Common),
    /// RMSE of the PDE density against the analytic one under grid refinement.
    Convergence(Common),
}

/// Flags shared by every command. Precedence: config file, then `--set`,
/// then the dedicated flags.
#[derive(Args)]
struct Common {
    /// `key=value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set kappa=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
    /// `heston` or `svjd`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    /// Grid nodes per dimension.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// `pr` or `hv`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    phi_max: Option<String>,
    #[arg(long)]
    phi_count: Option<String>,
    /// Return CSV for `backtest`.
    #[arg(long)]
    returns: Option<String>,
    /// Sample CSV for `optimize-beta`.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    cost: Option<String>,
    /// Path increments per swap leg.
    #[arg(long)]
    rebalance: Option<String>,
    /// Comma-separated r spacings for `convergence`.
    #[arg(long)]
    drs: Option<String>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Common {
    fn resolver(&self) -> Result<Resolver> {
        let mut pairs = self.set.clone();
        let flags = [
            ("model", &self.model),
            ("beta", &self.beta),
            ("seed", &self.seed),
            ("paths", &self.paths),
            ("n", &self.n),
            ("dt", &self.dt),
            ("scheme", &self.scheme),
            ("phi_max", &self.phi_max),
            ("phi_count", &self.phi_count),
            ("returns", &self.returns),
            ("samples", &self.samples),
            ("cost", &self.cost),
            ("rebalance", &self.rebalance),
            ("drs", &self.drs),
        ];
        pairs.extend(flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        Resolver::load(self.config.as_deref(), &pairs)
    }
}

fn run(cli: Cli) -> Result<String> {
    let (common, f): (&Common, fn(Resolver, &std::path::Path) -> Result<String>) = match &cli.command {
        Command::Solve(c) => (c, commands::solve),
        Command::Simulate(c) => (c, commands::simulate_cmd),
        Command::OptimizeBeta(c) => (c, commands::optimize_beta),
        Command::Backtest(c) => (c, commands::backtest_cmd),
        Command::Convergence(c) => (c, commands::convergence),
    };
    let out = commands::out_dir(common.out.clone());
    f(common.resolver()?, &out)
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = exit_code(&err);
            eprint!("{}", emit::error_json(&err, code as i32));
            ExitCode::from(code)
        }
    }
}
