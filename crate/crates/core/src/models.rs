//! Model parameter sets, the Feller check, and the closed-form Heston
//! characteristic function used as the analytic oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square-root stochastic volatility dynamics for the log-return `R` and
/// variance `V`:
///
/// ```text
/// dR = (mu - V/2) dt + sqrt(V) dW_s
/// dV = kappa (theta - V) dt + gamma sqrt(V) (rho dW_s + sqrt(1 - rho^2) dW_v)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub v0: f64,
}

impl HestonParams {
    /// `v0` defaults to the long-run variance.
    pub fn new(mu: f64, kappa: f64, theta: f64, gamma: f64, rho: f64) -> Self {
        HestonParams { mu, kappa, theta, gamma, rho, v0: theta }
    }

    /// `mu = 0.05, kappa = 18, theta = 0.1, gamma = 1, rho = -0.62`.
    pub fn table1() -> Self {
        Self::new(0.05, 18.0, 0.1, 1.0, -0.62)
    }

    /// Same as [`HestonParams::table1`] with `theta = 0.05`.
    pub fn table2() -> Self {
        Self::new(0.05, 18.0, 0.05, 1.0, -0.62)
    }

    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    /// Checks finiteness and sign constraints. Feller is reported, not enforced.
    pub fn check_domain(&self) -> Result<()> {
        let fields = [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("v0", self.v0),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::ParameterDomain { name, reason: format!("{value} is not finite") });
            }
        }
        let positive = [("kappa", self.kappa), ("theta", self.theta), ("gamma", self.gamma)];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::ParameterDomain { name, reason: format!("{value} must be > 0") });
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::ParameterDomain { name: "rho", reason: format!("{} not in [-1, 1]", self.rho) });
        }
        if self.v0 < 0.0 {
            return Err(Error::ParameterDomain { name: "v0", reason: format!("{} must be >= 0", self.v0) });
        }
        Ok(())
    }

    /// Drift of `R` with the variance frozen at its long-run level.
    pub fn drift_proxy(&self) -> f64 {
        self.mu - 0.5 * self.theta
    }
}

/// Compound-Poisson jumps in the return with zero-mean normal sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpParams {
    pub lambda: f64,
    pub sigma_j: f64,
}

impl JumpParams {
    pub fn new(lambda: f64, sigma_j: f64) -> Self {
        JumpParams { lambda, sigma_j }
    }

    /// `lambda = 20, sigma_j = 0.02`.
    pub fn table2() -> Self {
        Self::new(20.0, 0.02)
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.02)
    }

    pub fn check_domain(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::ParameterDomain { name: "lambda", reason: format!("{} must be >= 0", self.lambda) });
        }
        if !self.sigma_j.is_finite() || self.sigma_j <= 0.0 {
            return Err(Error::ParameterDomain { name: "sigma_j", reason: format!("{} must be > 0", self.sigma_j) });
        }
        Ok(())
    }

    /// Jump-size density `psi(z)`.
    pub fn density(&self, z: f64) -> f64 {
        let s = self.sigma_j;
        (-0.5 * (z / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// A third-moment-variation swap held against one unit of the underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapSpec {
    pub maturity: f64,
    pub beta: f64,
    pub fixed_leg: f64,
    pub notional_scale: f64,
}

impl SwapSpec {
    pub fn new(maturity: f64, beta: f64) -> Self {
        SwapSpec { maturity, beta, fixed_leg: 0.0, notional_scale: 1.0 }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn check_domain(&self) -> Result<()> {
        if !self.maturity.is_finite() || self.maturity <= 0.0 {
            return Err(Error::ParameterDomain { name: "maturity", reason: format!("{} must be > 0", self.maturity) });
        }
        if !self.beta.is_finite() {
            return Err(Error::ParameterDomain { name: "beta", reason: "not finite".into() });
        }
        if !self.fixed_leg.is_finite() {
            return Err(Error::ParameterDomain { name: "fixed_leg", reason: "not finite".into() });
        }
        if !self.notional_scale.is_finite() || self.notional_scale <= 0.0 {
            return Err(Error::ParameterDomain {
                name: "notional_scale",
                reason: format!("{} must be > 0", self.notional_scale),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerReport {
    pub feller_ok: bool,
    pub margin: f64,
}

/// Feller condition `2 kappa theta > gamma^2`.
pub fn validate(params: &HestonParams) -> Result<FellerReport> {
    params.check_domain()?;
    let margin = 2.0 * params.kappa * params.theta - params.gamma * params.gamma;
    Ok(FellerReport { feller_ok: margin > 0.0, margin })
}

/// Closed-form characteristic function `E[exp(i psi R_T)]` of the Heston
/// log-return.
///
/// The hyperbolic functions are evaluated with `exp(xi T / 2)` factored out,
/// so the power `(cosh + b/xi sinh)^(2 kappa theta / gamma^2)` is taken as
/// `exp(p * log(..))` on a log that never wraps. That keeps the function
/// continuous in `psi` and finite for any `psi T`.
pub fn cf_heston(psi: f64, params: &HestonParams, maturity: f64) -> Complex64 {
    let i = Complex64::i();
    let HestonParams { mu, kappa, theta, gamma, rho, v0 } = *params;
    if psi == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let b = Complex64::new(kappa, -gamma * rho * psi);
    let q = Complex64::new(psi * psi, psi); // psi^2 + i psi
    let xi = (gamma * gamma * q + b * b).sqrt();
    // principal root: Re(xi) >= 0, so e^{-xi T} stays bounded
    let decay = (-xi * maturity).exp();
    let coth = (1.0 + decay) / (1.0 - decay);
    let a_term = -q * v0 / (xi * coth + b);
    let log_d = xi * (0.5 * maturity) - std::f64::consts::LN_2 + ((1.0 + decay) + b / xi * (1.0 - decay)).ln();
    let power = 2.0 * kappa * theta / (gamma * gamma);
    let exponent = a_term + kappa * theta * maturity * b / (gamma * gamma) + i * psi * mu * maturity - power * log_d;
    exponent.exp()
}

/// Heston characteristic function times the compound-Poisson factor of
/// zero-mean normal jumps. Only valid for the unhedged return.
pub fn cf_svjd(psi: f64, params: &HestonParams, jumps: &JumpParams, maturity: f64) -> Complex64 {
    let jump = jumps.lambda * maturity * ((-0.5 * (jumps.sigma_j * psi).powi(2)).exp() - 1.0);
    cf_heston(psi, params, maturity) * jump.exp()
}

/// Flat `key=value` parameter block: `mu`, `kappa`, `theta`, `gamma`, `rho`,
/// `v0`, `lambda`, `sigma_j`, `beta`, `maturity`, `fixed_leg`.
///
/// Lines starting with `#` and blank lines are ignored; unknown keys are kept
/// so callers can layer their own settings onto the same file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueBlock {
    entries: BTreeMap<String, String>,
}

impl KeyValueBlock {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { line: lineno + 1, reason: format!("expected key=value, got `{line}`") });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse { line: lineno + 1, reason: "empty key".into() });
            }
            entries.insert(key.to_string(), v.trim().to_string());
        }
        Ok(KeyValueBlock { entries })
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{s}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Required: `mu kappa theta gamma rho`; `v0` defaults to `theta`.
    pub fn heston(&self) -> Result<HestonParams> {
        let mut p = HestonParams::new(
            self.require("mu")?,
            self.require("kappa")?,
            self.require("theta")?,
            self.require("gamma")?,
            self.require("rho")?,
        );
        if let Some(v0) = self.get("v0")? {
            p.v0 = v0;
        }
        p.check_domain()?;
        Ok(p)
    }

    /// Absent `lambda` means no jumps.
    pub fn jumps(&self) -> Result<JumpParams> {
        let j = JumpParams::new(
            self.get("lambda")?.unwrap_or(0.0),
            self.get("sigma_j")?.unwrap_or(JumpParams::none().sigma_j),
        );
        j.check_domain()?;
        Ok(j)
    }

    pub fn swap(&self) -> Result<SwapSpec> {
        let s = SwapSpec {
            maturity: self.require("maturity")?,
            beta: self.get("beta")?.unwrap_or(0.0),
            fixed_leg: self.get("fixed_leg")?.unwrap_or(0.0),
            notional_scale: self.get("notional_scale")?.unwrap_or(1.0),
        };
        s.check_domain()?;
        Ok(s)
    }

    pub fn from_params(params: &HestonParams, jumps: Option<&JumpParams>, swap: &SwapSpec) -> Self {
        let mut b = KeyValueBlock::default();
        b.set("mu", params.mu);
        b.set("kappa", params.kappa);
        b.set("theta", params.theta);
        b.set("gamma", params.gamma);
        b.set("rho", params.rho);
        b.set("v0", params.v0);
        if let Some(j) = jumps {
            b.set("lambda", j.lambda);
            b.set("sigma_j", j.sigma_j);
        }
        b.set("beta", swap.beta);
        b.set("maturity", swap.maturity);
        b.set("fixed_leg", swap.fixed_leg);
        b
    }
}

impl fmt::Display for KeyValueBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
