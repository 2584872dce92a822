//! Command-line front end: configuration, output plumbing and named
//! experiments.

pub mod commands;
pub mod config;
pub mod output;
pub mod recipes;
