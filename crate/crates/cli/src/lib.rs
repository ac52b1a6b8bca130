//! File formats, run configuration and the evaluation runner behind the
//! `hmocgp` command-line tool. The numerical core lives in `hmocgp-core`;
//! this crate owns everything that touches the filesystem.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod runner;
