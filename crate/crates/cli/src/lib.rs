//! Command line and HTTP front end for crosscut sessions.

pub mod cli;
pub mod render;
pub mod server;
pub mod watch;
