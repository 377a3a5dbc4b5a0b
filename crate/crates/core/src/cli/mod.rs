//! End-to-end runs driven by a JSON configuration.

pub mod config;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{Command, RunConfig};
pub use report::{emit, RunReport, Timings};
pub use run::run;
