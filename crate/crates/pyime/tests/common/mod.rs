#![allow(dead_code)]

use std::path::PathBuf;

use pyime::{io, train};
use pyime_core::{Lexicon, Model, Modes, Variant};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn lexicon() -> Lexicon {
    io::load_lexicon(&data("lexicon.tsv")).unwrap()
}

pub fn corpus(name: &str) -> Vec<String> {
    io::load_corpus(&data(name)).unwrap()
}

/// Untrained model over the toy corpus vocabulary.
pub fn small_model(variant: Variant, modes: Modes, n_layers: usize, d_model: usize, seed: u64) -> Model {
    let spec = train::ModelSpec {
        variant,
        modes,
        n_layers,
        d_model,
        n_heads: 2,
        d_ff: 2 * d_model,
        max_positions: 64,
        ..Default::default()
    };
    train::init_model(&spec, &lexicon(), &corpus("toy_train.txt"), seed).unwrap()
}
