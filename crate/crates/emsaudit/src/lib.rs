//! File formats, corpus synthesis, and pipeline orchestration around
//! [`emsaudit_core`].
//!
//! The binary exposes every stage as a subcommand; this library holds the
//! pieces so they stay testable: line-delimited JSON IO, the model
//! checkpoint format, the protocol-rules loader, the synthetic corpus
//! generator, and the end-to-end pipeline driver.

pub mod checkpoint;
pub mod config;
pub mod jsonl;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod synth;

pub use emsaudit_core as core;

/// Default synonym inventory shipped with the binary.
pub const DEFAULT_GAZETTEER: &str = include_str!("../data/gazetteer.tsv");
/// Default protocol table shipped with the binary.
pub const DEFAULT_RULES: &str = include_str!("../data/rules.toml");
/// Seed used by every stochastic stage when none is given.
pub const DEFAULT_SEED: u64 = 42;
