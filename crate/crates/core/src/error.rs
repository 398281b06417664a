use std::path::PathBuf;

use crate::params::Electrode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameters:\n  - {}", .0.join("\n  - "))]
    InvalidParameters(Vec<String>),

    #[error("{electrode:?} concentration left [0, c_max] at node {node}: {value} mol/m^3")]
    Saturation {
        electrode: Electrode,
        node: usize,
        value: f64,
    },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("kinetic singularity: surface concentration {c_surf} outside (0, {c_max})")]
    KineticSingularity { c_surf: f64, c_max: f64 },

    #[error("stoichiometry {theta} outside OCP table range [{lo}, {hi}]")]
    Extrapolation { theta: f64, lo: f64, hi: f64 },

    #[error("porosity {0} is non-positive (pores clogged)")]
    PoreClogging(f64),

    #[error("sign convention violated: {0}")]
    SignConvention(String),

    #[error("at t = {t} s: {source}")]
    AtTime { t: f64, source: Box<Error> },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}:{line}: time {t} is not strictly increasing")]
    NonMonotoneTime { path: String, line: usize, t: f64 },

    #[error("{path}:{line}: non-finite value in column '{column}'")]
    NonFinite { path: String, line: usize, column: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("observer fault: {0}")]
    Fault(String),

    #[error("{stage} stage failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime { t, source: Box::new(e) },
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, with time and stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } | Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
