//! Command-line and HTTP front ends for a latentforge workspace.

pub mod cli;
pub mod server;
