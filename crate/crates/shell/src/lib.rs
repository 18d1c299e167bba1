//! Command shell for the protea kernel: verb parsing, transcripts,
//! interactive, scripted and socket front ends.

pub mod batch;
pub mod config;
pub mod parse;
pub mod render;
pub mod repl;
pub mod server;
pub mod shell;

pub use shell::{Flow, Shell};
