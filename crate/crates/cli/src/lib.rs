//! Command-line front end for `vtol-core`.

pub mod commands;
pub mod config;
