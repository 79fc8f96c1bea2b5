use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resonance at mode ({m},{n}): |symbol + shift| = {magnitude:.3e}")]
    Resonance { m: i64, n: i64, magnitude: f64 },

    #[error("obstruction: {0}")]
    Obstruction(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("accuracy check failed: {0}")]
    Accuracy(String),

    #[error("spurious mode: {0}")]
    SpuriousMode(String),

    #[error("invalid pair: {0}")]
    InvalidPair(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Resonance { .. } => "resonance",
            Error::Obstruction(_) => "obstruction",
            Error::SingularSystem(_) => "singular-system",
            Error::NonConvergence(_) => "non-convergence",
            Error::Accuracy(_) => "accuracy",
            Error::SpuriousMode(_) => "spurious-mode",
            Error::InvalidPair(_) => "invalid-pair",
            Error::Pole(_) => "pole",
            Error::Numerical(_) => "numerical",
            Error::Parse(_) => "parse",
        }
    }

    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::Parse(_) | Error::InvalidPair(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
