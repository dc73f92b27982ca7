use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variants split into two families that callers (the CLI in particular)
/// map to distinct exit codes: configuration/input problems and numerical
/// failures. See [`Error::is_numerical`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {reason}")]
    ParameterDomain { name: &'static str, reason: String },

    #[error("Feller condition violated: 2*kappa*theta - gamma^2 = {margin}")]
    FellerViolation { margin: f64 },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid return path: {0}")]
    InvalidPath(String),

    #[error("path covers [{start}, {end}] but the swap needs [0, {maturity}]")]
    Coverage { start: f64, end: f64, maturity: f64 },

    #[error("portfolio value {value} is not positive")]
    Insolvency { value: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("missing configuration key `{0}`")]
    MissingKey(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("solver residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },

    #[error("instability at step {step}: max |f| = {max_norm:e}")]
    Instability { step: usize, max_norm: f64 },

    #[error("inverted density has imaginary residue {residue:e}")]
    ImaginaryResidue { residue: f64 },

    #[error("mass loss: |u(0)| = {mass}")]
    MassLoss { mass: f64 },

    #[error("density curves are not aligned: {0}")]
    Alignment(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Instability, singular solves and residual failures; everything else is
    /// a configuration or input problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Residual { .. }
                | Error::Instability { .. }
                | Error::MassLoss { .. }
                | Error::ImaginaryResidue { .. }
                | Error::Insolvency { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
