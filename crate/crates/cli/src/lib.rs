//! Configuration, experiment drivers and file formats for the `nich` executable.

pub mod config;
pub mod initial;
pub mod commands;
pub mod output;
