use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("constraint violation: {0}")]
    Constraint(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical consistency error: {0}")]
    Numerical(String),
    #[error("ill-posed campaign: {0}")]
    IllPosedCampaign(String),
    #[error(
        "unidentifiable scenario: targets {first} and {second} have collinear steering vectors"
    )]
    Unidentifiable { first: usize, second: usize },
    #[error("singular Fisher information: {0}")]
    SingularFim(String),
    #[error("unsupported objective: {0}")]
    UnsupportedObjective(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Dimension(_)
            | Error::Sizing(_)
            | Error::UnsupportedObjective(_)
            | Error::Parse(_) => ErrorKind::Config,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}
