//! Front end for `dsrn-core`: configuration, sweeps and table/report
//! emission. The binary in `main.rs` only parses flags and maps errors to
//! exit codes.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;

use dsrn_core::Error;

/// Every failure the CLI reports, with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    /// Parameters that do not describe a dS-RN exterior.
    Geometry(String),
    /// A forward computation failed.
    Numerical(String),
    /// Inversion could not produce parameters.
    Inversion(String),
    /// A verification tolerance was exceeded; the report was still written.
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Geometry(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Inversion(_) => 4,
            CliError::Verification(_) => 5,
        }
    }

    /// Classifies a core error raised by the named operation.
    pub fn core(op: &str, e: Error) -> Self {
        let msg = format!("{op}: {e}");
        match e {
            Error::DegenerateHorizons(_) => CliError::Geometry(msg),
            Error::InvalidInput(_) => CliError::Usage(msg),
            _ => CliError::Numerical(msg),
        }
    }

    /// Like [`CliError::core`], but every failure of an inverse operation
    /// counts as an inversion failure.
    pub fn inversion(op: &str, e: Error) -> Self {
        match e {
            Error::DegenerateHorizons(_) => CliError::core(op, e),
            e => CliError::Inversion(format!("{op}: {e}")),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Geometry(m)
            | CliError::Numerical(m)
            | CliError::Inversion(m)
            | CliError::Verification(m)
            | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
