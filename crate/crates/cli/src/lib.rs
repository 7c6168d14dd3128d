//! Library surface of the command-line front end: run configuration,
//! commands, and the table formats the commands emit (kept as a library
//! so integration tests can read emitted artifacts back through the
//! same parsers).

pub mod commands;
pub mod config;
pub mod tables;
