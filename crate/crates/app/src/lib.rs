//! Command-line tools and the HTTP service for the combination dose-finding engine.

pub mod api;
pub mod cli;
pub mod session;
