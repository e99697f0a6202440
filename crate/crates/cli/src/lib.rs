//! Sweep configuration and batch execution for the `timefluid` binary.

pub mod batch;
pub mod config;
