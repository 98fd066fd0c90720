//! Library surface of the `enose` command-line tool, exposed so the
//! integration and acceptance suites can drive the same code paths the
//! binary uses.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
