//! Command implementations behind the `dpc` binary.
//!
//! Every command takes plain arguments or a [`config::RunConfig`] and writes
//! schema-versioned JSON artifacts stamped with the hash of the config that
//! produced them.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
