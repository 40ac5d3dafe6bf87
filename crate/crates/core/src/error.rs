use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence: {what} (gap {gap:.3e})")]
    Convergence { what: String, gap: f64 },
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("reflection undefined at {at}: point not in the multiplicity-two a.c. set")]
    UndefinedReflection { at: f64 },
    #[error("inconsistent bundle: residual {residual:.3e}")]
    InconsistentBundle { residual: f64 },
    #[error("index {index} outside window [{lo}, {hi}]")]
    OutOfWindow { index: i64, lo: i64, hi: i64 },
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("empty spectral window (filtered mass {mass:.3e})")]
    EmptyWindow { mass: f64 },
    #[error("preparation failed: {0}")]
    Preparation(String),
    #[error("projection estimators disagree (gap {gap:.3e}); raise the horizon")]
    NotConverged { gap: f64 },
    #[error("boundary contamination (edge mass {edge_mass:.3e} at t = {time}); increase N")]
    BoundaryContamination { edge_mass: f64, time: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
