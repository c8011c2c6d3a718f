//! Command-line front end for the eigenshare protocol simulator.
//!
//! All commands emit line-delimited `key=value` reports whose first line is
//! `schema=<name>`; see [`report`] for the three schemas. Run parameters are
//! layered: built-in defaults, then `--config FILE`, then `EIGENSHARE_*`
//! environment variables, then individual CLI flags.

pub mod commands;
pub mod config;
pub mod report;
