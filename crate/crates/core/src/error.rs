use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("singular coupled mass matrix (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("negative discriminant in modal equation ({0:e})")]
    NegativeDiscriminant(f64),

    #[error("voltage {voltage} V outside [0, {v_max}] V")]
    VoltageOutOfRange { voltage: f64, v_max: f64 },

    #[error("simulation diverged at t = {t} s (dt = {dt} s)")]
    Divergence { t: f64, dt: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty metrics window: {0}")]
    EmptyWindow(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
