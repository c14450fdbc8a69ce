//! Pinyin-to-character conversion with a small character-level transformer.
//!
//! The crate covers the pure parts of the engine and needs only `alloc`:
//!
//! - [`lexicon`]: syllables, initials/finals, abbreviation keys and the
//!   legitimate-character class of every pinyin token;
//! - [`model`] and [`encode`]: the transformer and its baseline, concat and
//!   embed input layouts;
//! - [`loss`], [`optim`], [`training`]: pinyin-constrained cross-entropy with
//!   analytic gradients, Adam, and target-span sampling;
//! - [`decoder`]: fixed-length constrained beam search;
//! - [`dataset`] and [`metrics`]: bucketed evaluation sets and P@K reports;
//! - [`checkpoint`]: the model file codec.
//!
//! File IO, timing, the training loop, the CLI and the HTTP service live in
//! the `pyime` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod checkpoint;
pub mod dataset;
pub mod decoder;
pub mod encode;
pub mod error;
pub mod lexicon;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod training;
pub mod vocab;

pub use decoder::{beam_search, predict, Candidate, CandidateList, DecodeRequest};
pub use encode::{ClassRef, EncodedInput, Encoder};
pub use error::{Error, Result};
pub use lexicon::{Lexicon, PinyinMode, PinyinToken, Syllable};
pub use model::{Model, ModelConfig, Params, Variant};
pub use vocab::{Modes, Vocab};
