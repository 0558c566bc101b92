//! Command-line front end: configuration, subcommands, CSV output and the
//! acceptance battery.

// Negated float comparisons are deliberate: NaN must take the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod app;
pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;
