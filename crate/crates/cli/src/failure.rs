use std::fmt;

use mcfw_core::experiment::ExperimentError;
use mcfw_core::problem::{DataError, ProblemError};
use mcfw_core::solvers::SolverError;
use mcfw_core::trace::TraceError;

/// Exit 1 for anything the caller can fix, 2 for failures inside a run.
#[derive(Debug)]
pub enum Failure {
    Usage(clap::Error),
    User(String),
    Internal(String),
}

impl Failure {
    pub fn user(msg: impl Into<String>) -> Self {
        Failure::User(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "{}", e.to_string().trim_end()),
            Failure::User(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Linalg(_) => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(m) => Failure::User(m),
            other => Failure::Internal(other.to_string()),
        }
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Data(d) => d.into(),
            ProblemError::Solver(s) => (*s).into(),
            other => Failure::User(other.to_string()),
        }
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        Failure::User(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Problem(p) => p.into(),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Trace(t) => t.into(),
            ExperimentError::Solver { source: SolverError::InvalidConfig(m), .. } => Failure::User(m),
            e @ (ExperimentError::Invalid(_) | ExperimentError::Io { .. }) => Failure::User(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}
