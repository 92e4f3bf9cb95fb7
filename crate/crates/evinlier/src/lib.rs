//! File formats, a threaded runner and the command-line front end for
//! [`evinlier_core`].

pub mod cli;
pub mod data;
pub mod error;
pub mod json;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use runner::ThreadRunner;
