//! Example-based live programming with exact call traces.
//!
//! Modules written in a small scripting language declare examples
//! (`#example "name" { ... }`) and probes (`@{ expr }`). Running an example
//! records every call, return and probe evaluation; the resulting call tree
//! backs the full call tree, summarized paths and detailed paths views.

pub mod analysis;
pub mod api;
pub mod annotations;
pub mod lang;
pub mod session;
pub mod tracer;
