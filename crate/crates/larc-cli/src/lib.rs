//! Experiment harness around `larc-core`: stream generation, config files,
//! invariant-checked calibration runs, and the report artifacts.

pub mod config;
pub mod runner;
pub mod stream;
