//! Flat `key=value` run configuration with flag overrides. Every value a
//! command reads is recorded, defaults included, so outputs can echo the fully
//! resolved configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use tailhedge::adi::{BoundaryRows, TimeScheme};
use tailhedge::mc_sim::{SimConfig, VarianceScheme};
use tailhedge::models::KeyValueBlock;
use tailhedge::pipeline::{Model, SolverConfig, SpectralConfig};
use tailhedge::{Error, HestonParams, JumpParams, Result, SwapSpec};

pub const KNOWN_KEYS: &[&str] = &[
    "model", "mu", "kappa", "theta", "gamma", "rho", "v0", "lambda", "sigma_j", "beta", "maturity", "fixed_leg",
    "notional_scale", "r_max", "v_max", "n", "dt", "boundary", "scheme", "phi_max", "phi_count", "x_min", "x_max",
    "x_count", "renormalize", "cutoff", "inversion", "paths", "steps", "seed", "variance", "returns", "cost",
    "rebalance", "multi_leg", "samples", "beta_lo", "beta_hi", "quantiles", "drs",
];

/// Value types that can be read from the block and echoed back.
pub trait ConfigValue: Sized {
    fn parse_value(key: &str, raw: &str) -> Result<Self>;
    fn echo(&self) -> String;
}

fn bad(key: &str, raw: &str) -> Error {
    Error::Config(format!("cannot parse `{key}` = `{raw}`"))
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl ConfigValue for f64 {
    fn parse_value(key: &str, raw: &str) -> Result<Self> {
        raw.parse().map_err(|_| bad(key, raw))
    }
    fn echo(&self) -> String {
        fmt_f64(*self)
    }
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(key: &str, raw: &str) -> Result<Self> {
                raw.parse().map_err(|_| bad(key, raw))
            }
            fn echo(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_value!(usize, u64, bool, String);

macro_rules! enum_value {
    ($t:ty, $($v:path => $name:literal),*) => {
        impl ConfigValue for $t {
            fn parse_value(_key: &str, raw: &str) -> Result<Self> {
                <$t>::from_str(raw)
            }
            fn echo(&self) -> String {
                match self { $($v => $name.to_string()),* }
            }
        }
    };
}
enum_value!(BoundaryRows, BoundaryRows::Dirichlet => "dirichlet", BoundaryRows::OneSided => "one_sided");
enum_value!(TimeScheme, TimeScheme::PeacemanRachford => "pr", TimeScheme::HundsdorferVerwer => "hv");
enum_value!(VarianceScheme, VarianceScheme::FullTruncation => "full_truncation", VarianceScheme::Reflection => "reflection");

/// Comma-separated reals; an empty value is an empty list.
#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

impl ConfigValue for RealList {
    fn parse_value(key: &str, raw: &str) -> Result<Self> {
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(key, raw)))
            .collect::<Result<Vec<f64>>>()
            .map(RealList)
    }
    fn echo(&self) -> String {
        self.0.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Heston,
    Svjd,
}

impl ConfigValue for ModelKind {
    fn parse_value(key: &str, raw: &str) -> Result<Self> {
        match raw {
            "heston" => Ok(ModelKind::Heston),
            "svjd" => Ok(ModelKind::Svjd),
            _ => Err(bad(key, raw)),
        }
    }
    fn echo(&self) -> String {
        match self {
            ModelKind::Heston => "heston".into(),
            ModelKind::Svjd => "svjd".into(),
        }
    }
}

pub struct Resolver {
    block: KeyValueBlock,
    used: BTreeMap<String, String>,
}

impl Resolver {
    /// Config file first, then `overrides` in order (later wins).
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut block = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                KeyValueBlock::parse(&text)?
            }
            None => KeyValueBlock::default(),
        };
        for (k, v) in overrides {
            block.set(k, v);
        }
        for (k, _) in block.iter() {
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown configuration key `{k}`")));
            }
        }
        Ok(Resolver { block, used: BTreeMap::new() })
    }

    pub fn opt<T: ConfigValue>(&mut self, key: &str) -> Result<Option<T>> {
        match self.block.get_str(key) {
            None => Ok(None),
            Some(raw) => {
                let v = T::parse_value(key, raw)?;
                self.used.insert(key.to_string(), v.echo());
                Ok(Some(v))
            }
        }
    }

    pub fn or<T: ConfigValue>(&mut self, key: &str, default: T) -> Result<T> {
        let v = self.opt(key)?.unwrap_or(default);
        self.used.insert(key.to_string(), v.echo());
        Ok(v)
    }

    pub fn req<T: ConfigValue>(&mut self, key: &str) -> Result<T> {
        self.opt(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Records a value the command fixed regardless of the input.
    pub fn force<T: ConfigValue>(&mut self, key: &str, value: T) -> T {
        self.used.insert(key.to_string(), value.echo());
        value
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.used
    }

    pub fn model_kind(&mut self) -> Result<ModelKind> {
        self.or("model", ModelKind::Heston)
    }

    /// `mu kappa theta gamma rho` required; `v0` defaults to `theta`.
    pub fn heston(&mut self) -> Result<HestonParams> {
        let mut p = HestonParams::new(self.req("mu")?, self.req("kappa")?, self.req("theta")?, self.req("gamma")?, self.req("rho")?);
        p.v0 = self.or("v0", p.theta)?;
        p.check_domain()?;
        Ok(p)
    }

    /// Jump parameters are required in SVJD mode.
    pub fn model(&mut self, kind: ModelKind) -> Result<Model> {
        match kind {
            ModelKind::Heston => Ok(Model::Heston),
            ModelKind::Svjd => {
                let j = JumpParams::new(self.req("lambda")?, self.req("sigma_j")?);
                j.check_domain()?;
                Ok(Model::Svjd(j))
            }
        }
    }

    pub fn swap(&mut self) -> Result<SwapSpec> {
        let s = SwapSpec {
            maturity: self.req("maturity")?,
            beta: self.or("beta", 0.0)?,
            fixed_leg: self.or("fixed_leg", 0.0)?,
            notional_scale: self.or("notional_scale", 1.0)?,
        };
        s.check_domain()?;
        Ok(s)
    }

    pub fn solver(&mut self, defaults: SolverConfig) -> Result<SolverConfig> {
        Ok(SolverConfig {
            r_max: self.or("r_max", defaults.r_max)?,
            v_max: self.or("v_max", defaults.v_max)?,
            n: self.or("n", defaults.n)?,
            dt: self.or("dt", defaults.dt)?,
            boundary: self.or("boundary", defaults.boundary)?,
            scheme: self.or("scheme", defaults.scheme)?,
        })
    }

    pub fn spectral(&mut self, defaults: SpectralConfig) -> Result<SpectralConfig> {
        let inversion = self.or("inversion", if defaults.fast { "fast".to_string() } else { "direct".to_string() })?;
        let fast = match inversion.as_str() {
            "fast" => true,
            "direct" => false,
            other => return Err(Error::Config(format!("unknown inversion `{other}` (fast or direct)"))),
        };
        Ok(SpectralConfig {
            phi_max: self.or("phi_max", defaults.phi_max)?,
            phi_count: self.or("phi_count", defaults.phi_count)?,
            x_min: self.or("x_min", defaults.x_min)?,
            x_max: self.or("x_max", defaults.x_max)?,
            x_count: self.or("x_count", defaults.x_count)?,
            renormalize: self.or("renormalize", defaults.renormalize)?,
            cutoff: self.or("cutoff", defaults.cutoff)?,
            fast,
        })
    }

    pub fn sim(&mut self) -> Result<SimConfig> {
        let cfg = SimConfig {
            steps: self.or("steps", 1000usize)?,
            paths: self.or("paths", 100_000usize)?,
            seed: self.or("seed", 1u64)?,
            variance: self.or("variance", VarianceScheme::FullTruncation)?,
        };
        cfg.check()?;
        Ok(cfg)
    }
}
