//! Core engine for auditing ambulance case records.
//!
//! Everything in this crate is pure computation over in-memory data: text
//! normalization, gazetteer-based weak labeling, a from-scratch BiLSTM-CRF
//! sequence tagger, MUC-5 entity scoring, and the protocol-audit rule
//! engine. File formats, checkpoints, and the CLI live in the companion
//! `emsaudit` crate.
//!
//! The crate is `no_std` + `alloc`; float transcendentals come from `libm`
//! so results are identical regardless of the host math library.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audit;
pub mod entities;
pub mod eval;
pub mod gazetteer;
pub mod preprocess;
pub mod records;
pub mod tagger;

pub use entities::{Category, EntitySpan, EntityType, Tag};
pub use records::CaseRecord;
