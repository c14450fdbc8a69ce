//! Training configuration and instance sampling from annotated sentences.

use alloc::vec::Vec;

use rand::Rng;

use crate::encode::{EncodedInput, Encoder};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken};
use crate::model::Variant;
use crate::optim::AdamConfig;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub warmup_steps: u64,
    /// Examples are added to a batch until their token count reaches this.
    pub batch_size_tokens: usize,
    pub steps: u64,
    pub pc_loss: bool,
    pub short_target_prob: f64,
    /// Inclusive target-length range of "short" samples.
    pub short_range: (usize, usize),
    /// Inclusive target-length range of "long" samples.
    pub long_range: (usize, usize),
    /// Share of examples given abbreviated pinyin when the model accepts
    /// both modes.
    pub abbrev_fraction: f64,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            warmup_steps: 0,
            batch_size_tokens: 512,
            steps: 1000,
            pc_loss: true,
            short_target_prob: 0.5,
            short_range: (1, 4),
            long_range: (6, 25),
            abbrev_fraction: 0.5,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.batch_size_tokens == 0 {
            return bad("batch_size_tokens must be positive");
        }
        if !(0.0..=1.0).contains(&self.short_target_prob) {
            return bad("short_target_prob must be a probability");
        }
        if !(0.0..=1.0).contains(&self.abbrev_fraction) {
            return bad("abbrev_fraction must be a probability");
        }
        let (s, l) = (self.short_range, self.long_range);
        if s.0 == 0 || s.0 > s.1 || l.0 > l.1 {
            return bad("target length ranges must be non-empty and start at 1 or more");
        }
        if s.1 >= l.0 {
            return bad("short_range must lie below long_range");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, warmup_steps: self.warmup_steps, ..AdamConfig::default() }
    }
}

/// Picks a target span `(start, len)` from a sentence whose characters are
/// flagged `readable` when they have pinyin. The length is drawn from the
/// short or long range, clamped to the longest readable run, and the start is
/// uniform over all spans of that length lying inside one run.
pub fn sample_target<R: Rng + ?Sized>(readable: &[bool], cfg: &TrainConfig, rng: &mut R) -> Option<(usize, usize)> {
    let mut longest = 0;
    let mut run = 0;
    for r in readable {
        run = if *r { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    if longest == 0 {
        return None;
    }
    let (lo, hi) = if rng.gen::<f64>() < cfg.short_target_prob { cfg.short_range } else { cfg.long_range };
    let len = rng.gen_range(lo..=hi).min(longest);
    let starts = span_starts(readable, len);
    Some((starts[rng.gen_range(0..starts.len())], len))
}

/// Starts of every all-readable span of length `len`.
pub fn span_starts(readable: &[bool], len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run = 0;
    for (i, r) in readable.iter().enumerate() {
        run = if *r { run + 1 } else { 0 };
        if run >= len {
            out.push(i + 1 - len);
        }
    }
    out
}

/// Encodes the span `[start, start + len)` of `sentence` as a training
/// example with `mode` pinyin. Context is the preceding text, trimmed from
/// the left when the encoding would exceed `max_positions`.
pub fn make_example(
    encoder: &Encoder<'_>,
    variant: Variant,
    lexicon: &Lexicon,
    mode: PinyinMode,
    sentence: &[char],
    start: usize,
    len: usize,
) -> Result<EncodedInput> {
    let target = &sentence[start..start + len];
    let pinyin: Vec<PinyinToken> = target
        .iter()
        .map(|c| {
            lexicon
                .default_reading(*c)
                .map(|s| s.token(mode))
                .ok_or_else(|| Error::Shape(alloc::format!("target character {c:?} has no pinyin")))
        })
        .collect::<Result<_>>()?;
    let overhead = match variant {
        Variant::Concat => 2 * len + 3,
        _ => len + 1,
    };
    let room = encoder.max_positions.checked_sub(overhead).ok_or(Error::Overflow {
        len: overhead,
        max: encoder.max_positions,
    })?;
    let ctx_start = start.saturating_sub(room);
    encoder.example(variant, lexicon, &sentence[ctx_start..start], &pinyin, target)
}
