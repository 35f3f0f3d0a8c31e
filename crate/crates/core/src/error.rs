use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("battery power demand {p_b:.1} W exceeds the physical maximum {p_max:.1} W")]
    DiscriminantNegative { p_b: f64, p_max: f64 },

    #[error("primary source power {p_ps:.3} W outside [0, {p_max:.1}] W")]
    PowerOutOfRange { p_ps: f64, p_max: f64 },

    #[error("engine is off but primary source power is {p_ps:.3} W")]
    EngineOffWithPower { p_ps: f64 },

    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotonicTime { row: usize },

    #[error("invalid cycle: {0}")]
    InvalidCycle(String),

    #[error("unknown WLTP stage `{0}` (expected L, M, H or E)")]
    UnknownStage(String),

    #[error("terminal SOC {target:.5} unreachable: achievable range [{lo:.5}, {hi:.5}]")]
    TargetUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("costate search did not converge: {0}")]
    NoConvergence(String),

    #[error("state-constraint recursion exceeded depth {0}")]
    RecursionLimit(usize),

    #[error("no feasible control sequence (step {step})")]
    Infeasible { step: usize },

    #[error("value function requested before the DP was solved")]
    NotSolved,

    #[error("equivalence-factor sweep is degenerate: {0}")]
    DegenerateSweep(String),

    #[error("no charge-sustaining offset: ΔSOC spans [{dsoc_hi:.3e}, {dsoc_lo:.3e}] over the bracket")]
    NotChargeSustaining { dsoc_lo: f64, dsoc_hi: f64 },

    #[error("no grid cell reached charge-sustaining operation")]
    AllInfeasible,

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with step context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
