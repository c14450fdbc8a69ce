//! Pre-layer-norm character transformer with learned absolute positions.
//!
//! Three input encodings share one parameter layout:
//! - [`Variant::Baseline`]: `[BOS, context, target]`, pinyin only constrains decoding;
//! - [`Variant::Concat`]: pinyin tokens appended between `[SEP]`s, each target
//!   character reusing its pinyin token's position id;
//! - [`Variant::Embed`]: a pinyin embedding of the *next* character is added to
//!   every input position.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encode::EncodedInput;
use crate::error::{Error, Result};
use crate::nn::{self, dot, gelu, layer_norm, linear};
use crate::vocab::Vocab;

pub const DEFAULT_MAX_POSITIONS: usize = 128;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Variant {
    Baseline,
    Concat,
    Embed,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Concat => "concat",
            Variant::Embed => "embed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Variant::Baseline),
            "concat" => Some(Variant::Concat),
            "embed" => Some(Variant::Embed),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_positions: usize,
    pub char_vocab_size: usize,
    /// 0 for the baseline.
    pub pinyin_vocab_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// A config sized for `vocab`, other fields at small defaults.
    pub fn for_vocab(variant: Variant, vocab: &Vocab) -> Self {
        ModelConfig {
            variant,
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            max_positions: DEFAULT_MAX_POSITIONS,
            char_vocab_size: vocab.n_chars(),
            pinyin_vocab_size: if variant == Variant::Baseline { 0 } else { vocab.n_pinyin() },
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_positions", self.max_positions),
            ("char_vocab_size", self.char_vocab_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "n_heads {} does not divide d_model {}",
                self.n_heads, self.d_model
            )));
        }
        if self.variant != Variant::Baseline && self.pinyin_vocab_size == 0 {
            return Err(Error::Config(format!("{} variant needs a pinyin vocabulary", self.variant)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Rows of the token embedding table.
    pub fn input_vocab_size(&self) -> usize {
        let specials = self.char_vocab_size + 3;
        if self.variant == Variant::Concat {
            specials + self.pinyin_vocab_size
        } else {
            specials
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.d_model;
        let mut out = vec![
            ("tok_emb".to_string(), vec![self.input_vocab_size(), d]),
            ("pos_emb".to_string(), vec![self.max_positions, d]),
        ];
        if self.variant == Variant::Embed {
            out.push(("pin_emb".to_string(), vec![self.pinyin_vocab_size + 1, d]));
        }
        for l in 0..self.n_layers {
            let p = |n: &str| format!("layers.{l}.{n}");
            out.push((p("ln1.gain"), vec![d]));
            out.push((p("ln1.bias"), vec![d]));
            out.push((p("attn.w_qkv"), vec![d, 3 * d]));
            out.push((p("attn.b_qkv"), vec![3 * d]));
            out.push((p("attn.w_out"), vec![d, d]));
            out.push((p("attn.b_out"), vec![d]));
            out.push((p("ln2.gain"), vec![d]));
            out.push((p("ln2.bias"), vec![d]));
            out.push((p("mlp.w_fc"), vec![d, self.d_ff]));
            out.push((p("mlp.b_fc"), vec![self.d_ff]));
            out.push((p("mlp.w_proj"), vec![self.d_ff, d]));
            out.push((p("mlp.b_proj"), vec![d]));
        }
        out.push(("lnf.gain".to_string(), vec![d]));
        out.push(("lnf.bias".to_string(), vec![d]));
        out.push(("head".to_string(), vec![self.char_vocab_size, d]));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub w_qkv: Vec<f64>,
    pub b_qkv: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
    pub w_fc: Vec<f64>,
    pub b_fc: Vec<f64>,
    pub w_proj: Vec<f64>,
    pub b_proj: Vec<f64>,
}

/// All trainable tensors. Also used as the gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_emb: Vec<f64>,
    pub pos_emb: Vec<f64>,
    /// Empty unless the variant is `Embed`.
    pub pin_emb: Vec<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_gain: Vec<f64>,
    pub lnf_bias: Vec<f64>,
    /// `char_vocab_size x d_model`, one row per output character.
    pub head: Vec<f64>,
}

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        let layer = LayerParams {
            ln1_gain: vec![0.0; d],
            ln1_bias: vec![0.0; d],
            w_qkv: vec![0.0; d * 3 * d],
            b_qkv: vec![0.0; 3 * d],
            w_out: vec![0.0; d * d],
            b_out: vec![0.0; d],
            ln2_gain: vec![0.0; d],
            ln2_bias: vec![0.0; d],
            w_fc: vec![0.0; d * cfg.d_ff],
            b_fc: vec![0.0; cfg.d_ff],
            w_proj: vec![0.0; cfg.d_ff * d],
            b_proj: vec![0.0; d],
        };
        Params {
            tok_emb: vec![0.0; cfg.input_vocab_size() * d],
            pos_emb: vec![0.0; cfg.max_positions * d],
            pin_emb: if cfg.variant == Variant::Embed {
                vec![0.0; (cfg.pinyin_vocab_size + 1) * d]
            } else {
                Vec::new()
            },
            layers: vec![layer; cfg.n_layers],
            lnf_gain: vec![0.0; d],
            lnf_bias: vec![0.0; d],
            head: vec![0.0; cfg.char_vocab_size * d],
        }
    }

    /// Normal(0, 0.02) weights, zero biases, unit layer-norm gains.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut normal = |buf: &mut Vec<f64>| {
            for v in buf.iter_mut() {
                *v = INIT_STD * standard_normal(&mut rng);
            }
        };
        normal(&mut p.tok_emb);
        normal(&mut p.pos_emb);
        normal(&mut p.pin_emb);
        for l in &mut p.layers {
            normal(&mut l.w_qkv);
            normal(&mut l.w_out);
            normal(&mut l.w_fc);
            normal(&mut l.w_proj);
            l.ln1_gain.fill(1.0);
            l.ln2_gain.fill(1.0);
        }
        normal(&mut p.head);
        p.lnf_gain.fill(1.0);
        p
    }

    /// Tensors in [`ModelConfig::layout`] order (an empty `pin_emb` is skipped).
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.tok_emb, &self.pos_emb];
        if !self.pin_emb.is_empty() {
            out.push(&self.pin_emb);
        }
        for l in &self.layers {
            out.extend([
                &l.ln1_gain, &l.ln1_bias, &l.w_qkv, &l.b_qkv, &l.w_out, &l.b_out, &l.ln2_gain, &l.ln2_bias,
                &l.w_fc, &l.b_fc, &l.w_proj, &l.b_proj,
            ]);
        }
        out.extend([&self.lnf_gain, &self.lnf_bias, &self.head]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb];
        if !self.pin_emb.is_empty() {
            out.push(&mut self.pin_emb);
        }
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_gain,
                &mut l.ln1_bias,
                &mut l.w_qkv,
                &mut l.b_qkv,
                &mut l.w_out,
                &mut l.b_out,
                &mut l.ln2_gain,
                &mut l.ln2_bias,
                &mut l.w_fc,
                &mut l.b_fc,
                &mut l.w_proj,
                &mut l.b_proj,
            ]);
        }
        out.extend([&mut self.lnf_gain, &mut self.lnf_bias, &mut self.head]);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; u1 in (0, 1] avoids log(0).
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
}

pub(crate) struct LayerTrace {
    pub ln1_xhat: Vec<f64>,
    pub ln1_rstd: Vec<f64>,
    pub ln1_out: Vec<f64>,
    pub qkv: Vec<f64>,
    /// `heads x rows x rows`, zero above the diagonal.
    pub probs: Vec<f64>,
    pub attn: Vec<f64>,
    pub drop_attn: Option<Vec<f64>>,
    pub ln2_xhat: Vec<f64>,
    pub ln2_rstd: Vec<f64>,
    pub ln2_out: Vec<f64>,
    pub fc: Vec<f64>,
    pub act: Vec<f64>,
    pub drop_mlp: Option<Vec<f64>>,
}

/// Activations kept by a full-sequence forward pass for backpropagation.
pub(crate) struct Trace {
    pub rows: usize,
    pub drop_emb: Option<Vec<f64>>,
    pub layers: Vec<LayerTrace>,
    pub lnf_xhat: Vec<f64>,
    pub lnf_rstd: Vec<f64>,
    /// Final layer-norm output, `rows x d_model`.
    pub hidden: Vec<f64>,
}

fn dropout_mask(rng: &mut dyn RngCore, n: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()
}

/// Key/value cache of one hypothesis during incremental decoding.
#[derive(Debug, Clone)]
pub struct DecodeState {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    len: usize,
    hidden: Vec<f64>,
}

impl DecodeState {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Final-layer-norm output of the last fed token.
    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        check_vocab(&config, &vocab)?;
        let params = Params::init(&config);
        Ok(Model { config, vocab, params })
    }

    pub fn from_parts(config: ModelConfig, vocab: Vocab, params: Params) -> Result<Self> {
        config.validate()?;
        check_vocab(&config, &vocab)?;
        let expected = Params::zeros(&config);
        for ((name, _), (want, got)) in
            config.layout().iter().zip(expected.tensors().into_iter().zip(params.tensors()))
        {
            if want.len() != got.len() {
                return Err(Error::Shape(format!("{name}: expected {} values, got {}", want.len(), got.len())));
            }
        }
        if expected.layers.len() != params.layers.len() || expected.tensors().len() != params.tensors().len() {
            return Err(Error::Shape("tensor count does not match config".into()));
        }
        Ok(Model { config, vocab, params })
    }

    fn check_input(&self, input: &EncodedInput) -> Result<()> {
        let n = input.token_ids.len();
        if n == 0 {
            return Err(Error::Shape("empty input".into()));
        }
        if n > self.config.max_positions {
            return Err(Error::Overflow { len: n, max: self.config.max_positions });
        }
        if input.position_ids.len() != n {
            return Err(Error::Shape("position_ids length differs from token_ids".into()));
        }
        let vocab = self.config.input_vocab_size() as u32;
        if let Some(bad) = input.token_ids.iter().find(|t| **t >= vocab) {
            return Err(Error::Shape(format!("token id {bad} out of range {vocab}")));
        }
        if let Some(bad) = input.position_ids.iter().find(|p| **p as usize >= self.config.max_positions) {
            return Err(Error::Overflow { len: *bad as usize + 1, max: self.config.max_positions });
        }
        match (&input.pinyin_ids, self.config.variant) {
            (Some(p), Variant::Embed) => {
                if p.len() != n {
                    return Err(Error::Shape("pinyin_ids length differs from token_ids".into()));
                }
                if p.iter().any(|x| *x as usize > self.config.pinyin_vocab_size) {
                    return Err(Error::Shape("pinyin id out of range".into()));
                }
            }
            (None, Variant::Embed) => return Err(Error::Shape("embed variant needs pinyin_ids".into())),
            (Some(_), _) => return Err(Error::Shape("pinyin_ids given to a non-embed model".into())),
            (None, _) => {}
        }
        Ok(())
    }

    fn embed_row(&self, token: u32, position: u32, pinyin: Option<u32>, out: &mut [f64]) {
        let d = self.config.d_model;
        let p = &self.params;
        let t = token as usize;
        let pos = position as usize;
        out.copy_from_slice(&p.tok_emb[t * d..(t + 1) * d]);
        nn::axpy(1.0, &p.pos_emb[pos * d..(pos + 1) * d], out);
        if let Some(pid) = pinyin {
            let q = pid as usize;
            nn::axpy(1.0, &p.pin_emb[q * d..(q + 1) * d], out);
        }
    }

    /// Full causal forward pass keeping activations. `rng` enables dropout.
    pub(crate) fn trace(&self, input: &EncodedInput, mut rng: Option<&mut dyn RngCore>) -> Result<Trace> {
        self.check_input(input)?;
        let cfg = &self.config;
        let (rows, d, ff, heads, hd) = (input.token_ids.len(), cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
        let p_drop = if rng.is_some() { cfg.dropout } else { 0.0 };

        let mut x = vec![0.0; rows * d];
        for t in 0..rows {
            let pin = input.pinyin_ids.as_ref().map(|p| p[t]);
            self.embed_row(input.token_ids[t], input.position_ids[t], pin, &mut x[t * d..(t + 1) * d]);
        }
        let drop_emb = match rng.as_deref_mut() {
            Some(r) if p_drop > 0.0 => {
                let m = dropout_mask(r, rows * d, p_drop);
                x.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                Some(m)
            }
            _ => None,
        };

        let scale = 1.0 / libm::sqrt(hd as f64);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lp in &self.params.layers {
            let mut ln1_out = vec![0.0; rows * d];
            let mut ln1_xhat = vec![0.0; rows * d];
            let mut ln1_rstd = vec![0.0; rows];
            layer_norm(&x, rows, d, &lp.ln1_gain, &lp.ln1_bias, &mut ln1_out, &mut ln1_xhat, &mut ln1_rstd);
            let mut qkv = vec![0.0; rows * 3 * d];
            linear(&ln1_out, rows, &lp.w_qkv, &lp.b_qkv, d, 3 * d, &mut qkv);

            let mut probs = vec![0.0; heads * rows * rows];
            let mut attn = vec![0.0; rows * d];
            for h in 0..heads {
                for t in 0..rows {
                    let q = &qkv[t * 3 * d + h * hd..t * 3 * d + (h + 1) * hd];
                    let row = &mut probs[(h * rows + t) * rows..(h * rows + t + 1) * rows];
                    let mut m = f64::NEG_INFINITY;
                    for s in 0..=t {
                        let k = &qkv[s * 3 * d + d + h * hd..s * 3 * d + d + (h + 1) * hd];
                        row[s] = dot(q, k) * scale;
                        m = m.max(row[s]);
                    }
                    let mut z = 0.0;
                    for v in row[..=t].iter_mut() {
                        *v = libm::exp(*v - m);
                        z += *v;
                    }
                    let out = &mut attn[t * d + h * hd..t * d + (h + 1) * hd];
                    for s in 0..=t {
                        row[s] /= z;
                        let v = &qkv[s * 3 * d + 2 * d + h * hd..s * 3 * d + 2 * d + (h + 1) * hd];
                        nn::axpy(row[s], v, out);
                    }
                }
            }
            let mut proj = vec![0.0; rows * d];
            linear(&attn, rows, &lp.w_out, &lp.b_out, d, d, &mut proj);
            let drop_attn = match rng.as_deref_mut() {
                Some(r) if p_drop > 0.0 => {
                    let m = dropout_mask(r, rows * d, p_drop);
                    proj.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    Some(m)
                }
                _ => None,
            };
            x.iter_mut().zip(&proj).for_each(|(a, b)| *a += b);

            let mut ln2_out = vec![0.0; rows * d];
            let mut ln2_xhat = vec![0.0; rows * d];
            let mut ln2_rstd = vec![0.0; rows];
            layer_norm(&x, rows, d, &lp.ln2_gain, &lp.ln2_bias, &mut ln2_out, &mut ln2_xhat, &mut ln2_rstd);
            let mut fc = vec![0.0; rows * ff];
            linear(&ln2_out, rows, &lp.w_fc, &lp.b_fc, d, ff, &mut fc);
            let act: Vec<f64> = fc.iter().map(|v| gelu(*v)).collect();
            let mut mlp = vec![0.0; rows * d];
            linear(&act, rows, &lp.w_proj, &lp.b_proj, ff, d, &mut mlp);
            let drop_mlp = match rng.as_deref_mut() {
                Some(r) if p_drop > 0.0 => {
                    let m = dropout_mask(r, rows * d, p_drop);
                    mlp.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    Some(m)
                }
                _ => None,
            };
            x.iter_mut().zip(&mlp).for_each(|(a, b)| *a += b);

            layers.push(LayerTrace {
                ln1_xhat,
                ln1_rstd,
                ln1_out,
                qkv,
                probs,
                attn,
                drop_attn,
                ln2_xhat,
                ln2_rstd,
                ln2_out,
                fc,
                act,
                drop_mlp,
            });
        }
        let mut hidden = vec![0.0; rows * d];
        let mut lnf_xhat = vec![0.0; rows * d];
        let mut lnf_rstd = vec![0.0; rows];
        let p = &self.params;
        layer_norm(&x, rows, d, &p.lnf_gain, &p.lnf_bias, &mut hidden, &mut lnf_xhat, &mut lnf_rstd);
        Ok(Trace { rows, drop_emb, layers, lnf_xhat, lnf_rstd, hidden })
    }

    /// Logits over the whole character vocabulary at every position.
    pub fn forward(&self, input: &EncodedInput) -> Result<Vec<Vec<f64>>> {
        let trace = self.trace(input, None)?;
        let d = self.config.d_model;
        Ok((0..trace.rows).map(|t| self.logits(&trace.hidden[t * d..(t + 1) * d])).collect())
    }

    pub fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let d = self.config.d_model;
        self.params.head.chunks_exact(d).map(|w| dot(hidden, w)).collect()
    }

    /// Logits restricted to the characters `ids`, in the same order.
    pub fn class_logits(&self, hidden: &[f64], ids: &[u32], out: &mut Vec<f64>) {
        let d = self.config.d_model;
        out.clear();
        out.extend(ids.iter().map(|c| {
            let c = *c as usize;
            dot(hidden, &self.params.head[c * d..(c + 1) * d])
        }));
    }

    pub fn start(&self) -> DecodeState {
        DecodeState {
            keys: vec![Vec::new(); self.config.n_layers],
            values: vec![Vec::new(); self.config.n_layers],
            len: 0,
            hidden: vec![0.0; self.config.d_model],
        }
    }

    /// Appends one token to a cached prefix.
    pub fn feed(&self, state: &mut DecodeState, token: u32, position: u32, pinyin: Option<u32>) -> Result<()> {
        let cfg = &self.config;
        if state.len + 1 > cfg.max_positions {
            return Err(Error::Overflow { len: state.len + 1, max: cfg.max_positions });
        }
        if position as usize >= cfg.max_positions {
            return Err(Error::Overflow { len: position as usize + 1, max: cfg.max_positions });
        }
        if token as usize >= cfg.input_vocab_size() {
            return Err(Error::Shape(format!("token id {token} out of range")));
        }
        match (pinyin, cfg.variant) {
            (Some(p), Variant::Embed) if (p as usize) <= cfg.pinyin_vocab_size => {}
            (None, v) if v != Variant::Embed => {}
            _ => return Err(Error::Shape("pinyin id does not match the model variant".into())),
        }
        let (d, ff, heads, hd) = (cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
        let scale = 1.0 / libm::sqrt(hd as f64);
        let mut x = vec![0.0; d];
        self.embed_row(token, position, pinyin, &mut x);

        let mut ln = vec![0.0; d];
        let mut xhat = vec![0.0; d];
        let mut rstd = [0.0];
        let mut qkv = vec![0.0; 3 * d];
        let mut attn = vec![0.0; d];
        let mut proj = vec![0.0; d];
        let mut fc = vec![0.0; ff];
        let len = state.len + 1;
        let mut scores = vec![0.0; len];
        for (l, lp) in self.params.layers.iter().enumerate() {
            layer_norm(&x, 1, d, &lp.ln1_gain, &lp.ln1_bias, &mut ln, &mut xhat, &mut rstd);
            linear(&ln, 1, &lp.w_qkv, &lp.b_qkv, d, 3 * d, &mut qkv);
            state.keys[l].extend_from_slice(&qkv[d..2 * d]);
            state.values[l].extend_from_slice(&qkv[2 * d..]);
            let keys = &state.keys[l];
            let values = &state.values[l];
            attn.fill(0.0);
            for h in 0..heads {
                let q = &qkv[h * hd..(h + 1) * hd];
                let mut m = f64::NEG_INFINITY;
                for s in 0..len {
                    scores[s] = dot(q, &keys[s * d + h * hd..s * d + (h + 1) * hd]) * scale;
                    m = m.max(scores[s]);
                }
                let mut z = 0.0;
                for v in scores.iter_mut() {
                    *v = libm::exp(*v - m);
                    z += *v;
                }
                let out = &mut attn[h * hd..(h + 1) * hd];
                for s in 0..len {
                    nn::axpy(scores[s] / z, &values[s * d + h * hd..s * d + (h + 1) * hd], out);
                }
            }
            linear(&attn, 1, &lp.w_out, &lp.b_out, d, d, &mut proj);
            x.iter_mut().zip(&proj).for_each(|(a, b)| *a += b);
            layer_norm(&x, 1, d, &lp.ln2_gain, &lp.ln2_bias, &mut ln, &mut xhat, &mut rstd);
            linear(&ln, 1, &lp.w_fc, &lp.b_fc, d, ff, &mut fc);
            fc.iter_mut().for_each(|v| *v = gelu(*v));
            linear(&fc, 1, &lp.w_proj, &lp.b_proj, ff, d, &mut proj);
            x.iter_mut().zip(&proj).for_each(|(a, b)| *a += b);
        }
        let p = &self.params;
        layer_norm(&x, 1, d, &p.lnf_gain, &p.lnf_bias, &mut state.hidden, &mut xhat, &mut rstd);
        state.len = len;
        Ok(())
    }
}

fn check_vocab(config: &ModelConfig, vocab: &Vocab) -> Result<()> {
    if config.char_vocab_size != vocab.n_chars() {
        return Err(Error::Config(format!(
            "char_vocab_size {} but vocabulary has {} characters",
            config.char_vocab_size,
            vocab.n_chars()
        )));
    }
    if config.variant != Variant::Baseline && config.pinyin_vocab_size != vocab.n_pinyin() {
        return Err(Error::Config(format!(
            "pinyin_vocab_size {} but vocabulary has {} pinyin tokens",
            config.pinyin_vocab_size,
            vocab.n_pinyin()
        )));
    }
    Ok(())
}
