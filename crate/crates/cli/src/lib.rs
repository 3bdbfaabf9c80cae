//! Command implementations and report encodings behind the `zerogap` binary.

pub mod commands;
pub mod report;
