//! Command-line harness: configuration, dispatch to the core library,
//! payload persistence and replay.

pub mod args;
pub mod config;
pub mod error;
pub mod persist;
pub mod run;
pub mod table;

pub use args::main_with;
pub use config::ExperimentConfig;
pub use error::CliError;
pub use persist::ResultRecord;
pub use table::{Cell, Table};
