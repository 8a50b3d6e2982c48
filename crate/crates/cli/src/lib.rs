//! Configuration, grid execution with per-cell checkpoints, and report writing
//! behind the `npinfl` binary.

pub mod config;
pub mod report;
pub mod run;
