//! Library side of the `rollcast` command-line tool: configuration and
//! subcommand implementations, usable from tests without spawning a process.

pub mod commands;
pub mod config;

pub use config::ExperimentConfig;

use rollcast_core::Error;

/// Process exit status for an error: 2 for configuration problems, 3 for bad
/// or missing data, 4 for numerical divergence.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Blowup { .. } | Error::Divergence { .. } => 4,
        Error::Shape(_)
        | Error::Domain(_)
        | Error::State(_)
        | Error::Data(_)
        | Error::Checkpoint(_)
        | Error::Io { .. }
        | Error::Json { .. } => 3,
    }
}
