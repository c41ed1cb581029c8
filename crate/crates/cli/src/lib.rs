//! Configuration, suite drivers and reports behind the `hjcheck` binary.

pub mod config;
pub mod drivers;
pub mod report;
