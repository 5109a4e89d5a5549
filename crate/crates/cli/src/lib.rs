//! Configuration loading, experiment dispatch and artifact persistence for
//! the `qdsim` command-line tool.

pub mod config;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod manifest;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{exit, RunError};
pub use experiments::run;
pub use figures::Figure;
pub use manifest::{check, RunManifest};
