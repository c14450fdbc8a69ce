//! Checkpoint container.
//!
//! A UTF-8 header of `key=value` lines, opened by `PYIME-CHECKPOINT <version>`
//! and closed by `end`, followed by binary tensor blocks and a checksum:
//!
//! ```text
//! per tensor:  u32 name_len | name bytes | u32 ndim | u64 dims[ndim] | f64 values[prod(dims)]
//! trailer:     u64 FNV-1a hash of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken};
use crate::model::{Model, ModelConfig, Params, Variant};
use crate::vocab::{Modes, Vocab};

pub const MAGIC: &str = "PYIME-CHECKPOINT";
pub const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Everything in the text header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub config: ModelConfig,
    pub modes: Modes,
    pub chars: Vec<char>,
    pub pinyin: Vec<PinyinToken>,
    pub tensors: usize,
}

pub fn encode(model: &Model) -> Vec<u8> {
    let c = &model.config;
    let mut head = String::new();
    let mut line = |k: &str, v: String| {
        head.push_str(k);
        head.push('=');
        head.push_str(&v);
        head.push('\n');
    };
    line("variant", c.variant.name().into());
    line("modes", model.vocab.modes().name().into());
    line("n_layers", c.n_layers.to_string());
    line("d_model", c.d_model.to_string());
    line("n_heads", c.n_heads.to_string());
    line("d_ff", c.d_ff.to_string());
    line("max_positions", c.max_positions.to_string());
    line("char_vocab_size", c.char_vocab_size.to_string());
    line("pinyin_vocab_size", c.pinyin_vocab_size.to_string());
    line("dropout", format!("{}", c.dropout));
    line("seed", c.seed.to_string());
    let chars: Vec<String> = model.vocab.chars().iter().map(|ch| format!("{:x}", *ch as u32)).collect();
    line("chars", chars.join(" "));
    for mode in [PinyinMode::Perfect, PinyinMode::Abbreviated] {
        let tokens: Vec<&str> =
            model.vocab.pinyin().iter().filter(|t| t.mode == mode).map(|t| t.value.as_str()).collect();
        line(&format!("pinyin_{}", mode.name()), tokens.join(" "));
    }
    let layout = c.layout();
    line("tensors", layout.len().to_string());

    let mut out = format!("{MAGIC} {VERSION}\n{head}end\n").into_bytes();
    for ((name, shape), data) in layout.iter().zip(model.params.tensors()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

/// Parses the header; returns it with the byte offset of the tensor blocks.
/// Only the header bytes need to be present.
pub fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let bad = |m: String| Error::Checkpoint(m);
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let nl = rest.iter().position(|b| *b == b'\n').ok_or_else(|| bad("truncated header".into()))?;
        let line = core::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not UTF-8".into()))?;
        offset += nl + 1;
        if line == "end" {
            break;
        }
        lines.push(line);
    }
    let first = lines.first().ok_or_else(|| bad("empty header".into()))?;
    let version = first.strip_prefix(MAGIC).map(str::trim).ok_or_else(|| bad("not a checkpoint file".into()))?;
    if version != VERSION.to_string() {
        return Err(Error::Version { found: version.into(), expected: VERSION });
    }
    let get = |key: &str| -> Result<&str> {
        lines[1..]
            .iter()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| bad(format!("missing header key {key}")))
    };
    fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| Error::Checkpoint(format!("bad value for {key}: {v:?}")))
    }
    let variant = Variant::from_name(get("variant")?).ok_or_else(|| bad("unknown variant".into()))?;
    let modes = Modes::from_name(get("modes")?).ok_or_else(|| bad("unknown modes".into()))?;
    let config = ModelConfig {
        variant,
        n_layers: num("n_layers", get("n_layers")?)?,
        d_model: num("d_model", get("d_model")?)?,
        n_heads: num("n_heads", get("n_heads")?)?,
        d_ff: num("d_ff", get("d_ff")?)?,
        max_positions: num("max_positions", get("max_positions")?)?,
        char_vocab_size: num("char_vocab_size", get("char_vocab_size")?)?,
        pinyin_vocab_size: num("pinyin_vocab_size", get("pinyin_vocab_size")?)?,
        dropout: num("dropout", get("dropout")?)?,
        seed: num("seed", get("seed")?)?,
    };
    let chars = get("chars")?
        .split_whitespace()
        .map(|h| u32::from_str_radix(h, 16).ok().and_then(char::from_u32).ok_or_else(|| bad(format!("bad char {h:?}"))))
        .collect::<Result<Vec<char>>>()?;
    let mut pinyin = Vec::new();
    for mode in [PinyinMode::Perfect, PinyinMode::Abbreviated] {
        let key = format!("pinyin_{}", mode.name());
        pinyin.extend(get(&key)?.split_whitespace().map(|v| PinyinToken { mode, value: v.to_string() }));
    }
    let tensors = num("tensors", get("tensors")?)?;
    Ok((Header { config, modes, chars, pinyin, tensors }, offset))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint("truncated tensor data".into())
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a full checkpoint, rebuilding pinyin classes from `lexicon`.
pub fn decode(bytes: &[u8], lexicon: &Lexicon) -> Result<Model> {
    let (header, offset) = read_header(bytes)?;
    if bytes.len() < offset + 8 {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8 bytes"));
    if stored != fnv1a(&bytes[..body_end]) {
        return Err(Error::Checkpoint("checksum mismatch (truncated or corrupt file)".into()));
    }
    let config = header.config;
    config.validate()?;
    let layout = config.layout();
    if layout.len() != header.tensors {
        return Err(Error::Checkpoint(format!("header lists {} tensors, config implies {}", header.tensors, layout.len())));
    }
    let mut params = Params::zeros(&config);
    let mut r = Reader { bytes: &bytes[..body_end], pos: offset };
    for ((name, shape), dst) in layout.iter().zip(params.tensors_mut()) {
        let len = r.u32()? as usize;
        let got = core::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("tensor name not UTF-8".into()))?;
        if got != name {
            return Err(Error::Checkpoint(format!("expected tensor {name}, found {got}")));
        }
        let ndim = r.u32()? as usize;
        let dims = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(Error::Shape(format!("{name}: expected {shape:?}, found {dims:?}")));
        }
        for v in dst.iter_mut() {
            *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        }
    }
    if r.pos != body_end {
        return Err(Error::Checkpoint("trailing bytes after tensors".into()));
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("checkpoint parameters".into()));
    }
    let vocab = Vocab::from_parts(header.chars, header.modes, header.pinyin, lexicon)?;
    Model::from_parts(config, vocab, params)
}
