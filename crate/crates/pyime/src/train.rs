//! The training loop: token-budget batches of sampled target spans, Adam
//! updates, a per-step metrics log and periodic checkpoints.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pyime_core::encode::Encoder;
use pyime_core::loss::loss_and_grad;
use pyime_core::optim::Adam;
use pyime_core::training::{make_example, sample_target, TrainConfig};
use pyime_core::{EncodedInput, Lexicon, Model, ModelConfig, Modes, PinyinMode, Variant, Vocab};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub examples_seen: u64,
}

impl StepLog {
    /// `step\tloss\tlr\texamples_seen`
    pub fn line(&self) -> String {
        format!("{}\t{:.10}\t{:e}\t{}", self.step, self.loss, self.lr, self.examples_seen)
    }
}

/// Architecture knobs; vocabulary sizes come from the lexicon and corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub variant: Variant,
    pub modes: Modes,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_positions: usize,
    pub dropout: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            variant: Variant::Concat,
            modes: Modes::Both,
            n_layers: 2,
            d_model: 128,
            n_heads: 4,
            d_ff: 512,
            max_positions: 128,
            dropout: 0.0,
        }
    }
}

/// Vocabulary over the lexicon plus every other character of the corpus.
pub fn corpus_vocab(lexicon: &Lexicon, modes: Modes, sentences: &[String]) -> Vocab {
    let extra: BTreeSet<char> = sentences.iter().flat_map(|s| s.chars()).collect();
    Vocab::build(lexicon, modes, extra)
}

pub fn init_model(spec: &ModelSpec, lexicon: &Lexicon, sentences: &[String], seed: u64) -> Result<Model> {
    let vocab = corpus_vocab(lexicon, spec.modes, sentences);
    let mut cfg = ModelConfig::for_vocab(spec.variant, &vocab);
    cfg.n_layers = spec.n_layers;
    cfg.d_model = spec.d_model;
    cfg.n_heads = spec.n_heads;
    cfg.d_ff = spec.d_ff;
    cfg.max_positions = spec.max_positions;
    cfg.dropout = spec.dropout;
    cfg.seed = seed;
    Ok(Model::new(cfg, vocab)?)
}

/// Sentences with their characters and readability flags, ready for sampling.
struct Pool {
    sentences: Vec<(Vec<char>, Vec<bool>)>,
}

impl Pool {
    fn new(lexicon: &Lexicon, sentences: &[String]) -> Result<Self> {
        let sentences: Vec<(Vec<char>, Vec<bool>)> = sentences
            .iter()
            .map(|s| {
                let chars: Vec<char> = s.chars().collect();
                let readable = chars.iter().map(|c| lexicon.default_reading(*c).is_some()).collect();
                (chars, readable)
            })
            .filter(|(_, r): &(Vec<char>, Vec<bool>)| r.iter().any(|x| *x))
            .collect();
        if sentences.is_empty() {
            return Err(Error::Invalid("no corpus sentence contains a character with pinyin".into()));
        }
        Ok(Pool { sentences })
    }

    fn batch(
        &self,
        encoder: &Encoder<'_>,
        variant: Variant,
        lexicon: &Lexicon,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<EncodedInput>> {
        let mut batch = Vec::new();
        let mut tokens = 0;
        while tokens < cfg.batch_size_tokens {
            let (chars, readable) = &self.sentences[rng.gen_range(0..self.sentences.len())];
            let Some((start, len)) = sample_target(readable, cfg, rng) else { continue };
            let mode = match encoder.vocab.modes() {
                Modes::Both if rng.gen::<f64>() < cfg.abbrev_fraction => PinyinMode::Abbreviated,
                modes => modes.list()[0],
            };
            let ex = make_example(encoder, variant, lexicon, mode, chars, start, len)?;
            tokens += ex.len();
            batch.push(ex);
        }
        Ok(batch)
    }
}

/// Trains `model` in place for `cfg.steps` steps. `on_step` sees every log
/// entry and the updated model, and may write checkpoints.
pub fn train(
    model: &mut Model,
    lexicon: &Lexicon,
    sentences: &[String],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepLog, &Model) -> Result<()>,
) -> Result<Vec<StepLog>> {
    cfg.validate()?;
    let pool = Pool::new(lexicon, sentences)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(cfg.adam(), &model.params);
    let vocab = model.vocab.clone();
    let encoder = Encoder::new(&vocab, model.config.max_positions);
    let variant = model.config.variant;
    let mut log = Vec::with_capacity(cfg.steps as usize);
    let mut seen = 0u64;
    for step in 1..=cfg.steps {
        let batch = pool.batch(&encoder, variant, lexicon, cfg, &mut data_rng)?;
        seen += batch.len() as u64;
        let rng = if model.config.dropout > 0.0 { Some(&mut dropout_rng as &mut dyn rand::RngCore) } else { None };
        let out = loss_and_grad(model, &batch, cfg.pc_loss, rng)?;
        let lr = adam.current_lr();
        adam.step(&mut model.params, &out.grads);
        let entry = StepLog { step, loss: out.loss, lr, examples_seen: seen };
        on_step(&entry, model)?;
        log.push(entry);
    }
    Ok(log)
}

/// Appends log lines to `metrics` and writes checkpoints to `out` every
/// `cfg.checkpoint_every` steps and after the last one.
pub fn train_to_files(
    model: &mut Model,
    lexicon: &Lexicon,
    sentences: &[String],
    cfg: &TrainConfig,
    out: &Path,
    metrics: &Path,
) -> Result<Vec<StepLog>> {
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(metrics).map_err(Error::io(metrics))?;
    let steps = cfg.steps;
    let every = cfg.checkpoint_every;
    let log = train(model, lexicon, sentences, cfg, |entry, m| {
        writeln!(file, "{}", entry.line()).map_err(Error::io(metrics))?;
        if entry.step % 50 == 0 || entry.step == steps {
            tracing::info!(target: "pyime::train", step = entry.step, loss = entry.loss, examples = entry.examples_seen);
        }
        if (every > 0 && entry.step % every == 0) || entry.step == steps {
            io::save_model(out, m)?;
        }
        Ok(())
    })?;
    if steps == 0 {
        io::save_model(out, model)?;
    }
    Ok(log)
}
