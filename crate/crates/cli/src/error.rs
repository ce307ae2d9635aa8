use covfuse_core::CovError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] CovError),

    /// A post-hoc theorem or invariant check did not hold.
    #[error("{0}")]
    Check(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const INVARIANT: i32 = 4;
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

#[derive(Debug, Serialize)]
struct ErrorJson<'a> {
    error: ErrorBody<'a>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Check(_) => exit::INVARIANT,
            CliError::Core(e) => match e {
                CovError::InvalidInput(_)
                | CovError::DimensionMismatch { .. }
                | CovError::Singular { .. }
                | CovError::Conditioning { .. }
                | CovError::InconsistentJoint { .. }
                | CovError::DegenerateTriple { .. } => exit::INPUT,
                CovError::EndpointOmega(_) | CovError::Infeasible(_) => exit::SOLVER,
                CovError::CheckDisagreement(_) | CovError::CheckFailed(_) => exit::INVARIANT,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::INPUT => "input",
            exit::SOLVER => "solver",
            _ => "invariant",
        }
    }

    /// `{"error": {"kind": .., "message": .., "exit_code": ..}}`
    pub fn to_json(&self) -> String {
        let body = ErrorJson {
            error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() },
        };
        serde_json::to_string(&body).expect("error body serializes")
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("malformed JSON: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
