//! HTTP service, storage, trace replay and command-line front end for the
//! threadwise reflection engine.

pub mod api;
pub mod clock;
pub mod commands;
pub mod config;
pub mod engine;
pub mod replay;
pub mod store;
