//! Command-line plumbing: configuration files, CSV records, plot scripts
//! and the verification battery.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod plots;
pub mod verify;
