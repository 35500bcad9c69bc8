//! Command-line front end for the dual-limit-surface regrasp toolkit:
//! JSON scenario and suite files, margin inspection, planning, oracle
//! rollouts, and the desk-scale experiment sweep.

pub mod commands;
pub mod desk;
pub mod files;
pub mod svg;
pub mod table;

/// Stable process exit codes.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const PARSE_ERROR: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const ORACLE_FAILURE: i32 = 4;
}

/// Command-level error carrying its exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Malformed or inconsistent input files.
    Parse(String),
    /// The planner returned a non-converged plan.
    NotConverged(String),
    /// The simulation oracle failed (slip resolution did not converge).
    Oracle(String),
    /// Filesystem trouble.
    Io(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Parse(_) => exit_codes::PARSE_ERROR,
            CmdError::NotConverged(_) => exit_codes::NOT_CONVERGED,
            CmdError::Oracle(_) => exit_codes::ORACLE_FAILURE,
            CmdError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Parse(m) => write!(f, "parse error: {m}"),
            CmdError::NotConverged(m) => write!(f, "solver did not converge: {m}"),
            CmdError::Oracle(m) => write!(f, "oracle failure: {m}"),
            CmdError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}
