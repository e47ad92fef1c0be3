use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: cannot parse `{text}`: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        text: String,
        reason: String,
    },

    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("zero-norm field cannot be normalized")]
    ZeroNorm,

    #[error("non-finite value in field at t = {time} (step too large or boundary leakage)")]
    NonFinite { time: f64 },

    #[error("ground state at a = {a}, phi = {phi} did not converge after {iterations} steps (last |dE| = {residual:e})")]
    NotConverged {
        a: f64,
        phi: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("query (a = {a}, phi = {phi}) lies outside the tabulated surface a in [{a_min}, {a_max}], phi in [{phi_min}, {phi_max}]")]
    OutOfSurface {
        a: f64,
        phi: f64,
        a_min: f64,
        a_max: f64,
        phi_min: f64,
        phi_max: f64,
    },

    #[error("piston left the allowed region: a = {a} at t = {time}")]
    PistonEscaped { a: f64, time: f64 },

    #[error("singular interpolation system for control schedule")]
    SingularSchedule,

    #[error("exact simulation failed at (c1 = {c1}, c2 = {c2}): {source}")]
    Candidate {
        c1: f64,
        c2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Validation-class errors (bad input) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Invalid { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
