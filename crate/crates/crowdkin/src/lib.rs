//! Scenario files, frame output and the command-line driver for
//! [`crowdkin_core`].

pub mod cli;
pub mod config;
pub mod io;

pub use crowdkin_core as core;
