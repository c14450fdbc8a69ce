#![allow(dead_code)]

use pyime_core::{Encoder, Lexicon, Model, ModelConfig, PinyinMode, PinyinToken, Variant, Vocab};

pub const TINY_LEXICON: &str = "\
我\two
们\tmen
为\twei
王\twang
外\twai
下\txia
周\tzhou
有\tyou
时\tshi
事\tshi
是\tshi
间\tjian
一\tyi
以\tyi
安\tan
长\tchang
长\tzhang
张\tzhang
";

pub fn tiny_lexicon() -> Lexicon {
    Lexicon::parse(TINY_LEXICON).unwrap()
}

pub fn bundled_lexicon() -> Lexicon {
    Lexicon::parse(include_str!("../../../../data/lexicon.tsv")).unwrap()
}

pub fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

pub fn tiny_model(variant: Variant, mode: PinyinMode, d_model: usize, n_layers: usize, seed: u64) -> (Lexicon, Model) {
    let lex = tiny_lexicon();
    let vocab = Vocab::build(&lex, mode, "，1".chars());
    let mut cfg = ModelConfig::for_vocab(variant, &vocab);
    cfg.d_model = d_model;
    cfg.n_heads = 2;
    cfg.d_ff = 2 * d_model;
    cfg.n_layers = n_layers;
    cfg.max_positions = 32;
    cfg.seed = seed;
    let mut model = Model::new(cfg, vocab).unwrap();
    // Larger weights than the 0.02 init so every path carries signal.
    let mut rng = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for t in model.params.tensors_mut() {
        for v in t.iter_mut() {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v += ((rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.6;
        }
    }
    (lex, model)
}

pub fn tokens(lex: &Lexicon, s: &str, mode: PinyinMode) -> Vec<PinyinToken> {
    s.chars().map(|c| lex.default_reading(c).unwrap().token(mode)).collect()
}

pub fn example(model: &Model, lex: &Lexicon, ctx: &str, target: &str) -> pyime_core::EncodedInput {
    let enc = Encoder::new(&model.vocab, model.config.max_positions);
    let py = tokens(lex, target, model.vocab.default_mode());
    enc.example(model.config.variant, lex, &chars(ctx), &py, &chars(target)).unwrap()
}
