//! Fixed-length pinyin-constrained beam search.
//!
//! Every step expands each live hypothesis by every character legitimate for
//! the next pinyin token and keeps the `beam_size` best cumulative
//! log-probabilities. Ties go to the lexicographically smaller string, so the
//! output is a deterministic function of (model, request).

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::encode::{next_pinyin, Encoder};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken};
use crate::loss::class_log_probs;
use crate::model::{DecodeState, Model, Variant};

pub const DEFAULT_BEAM_SIZE: usize = 16;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRequest {
    pub context: Vec<char>,
    pub pinyin: Vec<PinyinToken>,
    pub beam_size: usize,
    pub top_k: usize,
}

impl DecodeRequest {
    pub fn new(context: &str, pinyin: Vec<PinyinToken>) -> Self {
        DecodeRequest {
            context: context.chars().collect(),
            pinyin,
            beam_size: DEFAULT_BEAM_SIZE,
            top_k: DEFAULT_TOP_K.min(DEFAULT_BEAM_SIZE),
        }
    }

    pub fn with_beam(mut self, beam_size: usize, top_k: usize) -> Self {
        self.beam_size = beam_size;
        self.top_k = top_k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pinyin.is_empty() {
            return Err(Error::InvalidRequest { field: "pinyin", message: "at least one pinyin token is required".into() });
        }
        if self.beam_size == 0 {
            return Err(Error::InvalidRequest { field: "beam_size", message: "must be positive".into() });
        }
        if self.top_k == 0 || self.top_k > self.beam_size {
            return Err(Error::InvalidRequest {
                field: "top_k",
                message: alloc::format!("must be in 1..={}", self.beam_size),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub text: String,
    /// Sum of per-step constrained natural-log probabilities.
    pub score: f64,
}

/// Ranked candidates, best first.
pub type CandidateList = Vec<Candidate>;

/// Ordering used by the beam: higher score first, then smaller string.
pub fn rank_order(a_score: f64, a_text: &str, b_score: f64, b_text: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_text.cmp(b_text))
}

/// Constrained log-probabilities of every class member given the hidden
/// state after a prefix. Returns (character id, log-prob) pairs in class order.
pub fn step_distribution(model: &Model, hidden: &[f64], pinyin_id: u32) -> Result<Vec<(u32, f64)>> {
    let class = model.vocab.class(pinyin_id);
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let mut logits = Vec::with_capacity(class.len());
    model.class_logits(hidden, class, &mut logits);
    Ok(class.iter().copied().zip(class_log_probs(&logits)).collect())
}

struct Hyp {
    text: String,
    score: f64,
    state: DecodeState,
}

/// Length of the equivalent training encoding, for overflow checks.
fn encoded_len(variant: Variant, n: usize, k: usize) -> usize {
    match variant {
        Variant::Concat => n + 2 * k + 3,
        Variant::Baseline | Variant::Embed => 1 + n + k,
    }
}

fn prefix_state(model: &Model, lexicon: &Lexicon, req: &DecodeRequest, pids: &[u32]) -> Result<DecodeState> {
    let enc = Encoder::new(&model.vocab, model.config.max_positions);
    let prefix = match model.config.variant {
        Variant::Baseline => enc.baseline(&req.context, None, &[])?,
        Variant::Concat => enc.concat(&req.context, &req.pinyin, &[])?,
        Variant::Embed => {
            let next = next_pinyin(lexicon, req.pinyin[0].mode, &req.context, &req.pinyin[..1], false);
            enc.embed(&req.context, &next, &[])?
        }
    };
    debug_assert_eq!(pids.len(), req.pinyin.len());
    let mut state = model.start();
    for t in 0..prefix.len() {
        let pin = prefix.pinyin_ids.as_ref().map(|p| p[t]);
        model.feed(&mut state, prefix.token_ids[t], prefix.position_ids[t], pin)?;
    }
    Ok(state)
}

/// Position id and pinyin-table id for feeding the `j`-th chosen character.
fn target_slot(variant: Variant, n: usize, j: usize, pids: &[u32]) -> (u32, Option<u32>) {
    match variant {
        Variant::Baseline => ((n + 1 + j) as u32, None),
        Variant::Concat => ((n + 2 + j) as u32, None),
        Variant::Embed => ((n + 1 + j) as u32, Some(1 + pids[j + 1])),
    }
}

pub fn beam_search(model: &Model, lexicon: &Lexicon, req: &DecodeRequest) -> Result<CandidateList> {
    req.validate()?;
    let (n, k) = (req.context.len(), req.pinyin.len());
    let len = encoded_len(model.config.variant, n, k);
    if len > model.config.max_positions {
        return Err(Error::Overflow { len, max: model.config.max_positions });
    }
    let pids = Encoder::new(&model.vocab, model.config.max_positions).pinyin_ids(&req.pinyin)?;

    let mut beam = alloc::vec![Hyp { text: String::new(), score: 0.0, state: prefix_state(model, lexicon, req, &pids)? }];
    for (j, pid) in pids.iter().enumerate() {
        let mut expansions: Vec<(f64, usize, u32)> = Vec::new();
        for (h, hyp) in beam.iter().enumerate() {
            for (c, lp) in step_distribution(model, hyp.state.hidden(), *pid)? {
                expansions.push((hyp.score + lp, h, c));
            }
        }
        let vocab = &model.vocab;
        // Parents share length j, so (parent text, char) order is string order.
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| beam[a.1].text.cmp(&beam[b.1].text))
                .then_with(|| vocab.char_at(a.2).cmp(&vocab.char_at(b.2)))
        });
        expansions.truncate(req.beam_size);
        let last = j + 1 == k;
        let mut next = Vec::with_capacity(expansions.len());
        for (score, parent, c) in expansions {
            let mut text = beam[parent].text.clone();
            text.push(vocab.char_at(c));
            let mut state = beam[parent].state.clone();
            if !last {
                let (position, pin) = target_slot(model.config.variant, n, j, &pids);
                model.feed(&mut state, c, position, pin)?;
            }
            next.push(Hyp { text, score, state });
        }
        beam = next;
    }
    beam.truncate(req.top_k);
    Ok(beam.into_iter().map(|h| Candidate { text: h.text, score: h.score }).collect())
}

/// Resolves raw pinyin strings and decodes with the given beam settings.
pub fn predict<S: AsRef<str>>(
    model: &Model,
    lexicon: &Lexicon,
    context: &str,
    raw_pinyin: &[S],
    mode: PinyinMode,
    beam_size: usize,
    top_k: usize,
) -> Result<CandidateList> {
    if !model.vocab.modes().contains(mode) {
        return Err(Error::InvalidRequest {
            field: "mode",
            message: alloc::format!("model accepts {} pinyin only", model.vocab.modes()),
        });
    }
    let pinyin = lexicon.resolve(raw_pinyin, mode)?;
    beam_search(model, lexicon, &DecodeRequest::new(context, pinyin).with_beam(beam_size, top_k))
}
