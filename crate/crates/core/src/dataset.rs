//! Evaluation instances: bucketed (context, target) sampling from sentences
//! and the pre-segmented perfect-pinyin row format.
//!
//! Lengths are counted in characters. The open-ended `10+` buckets are capped
//! at 30 context and 25 target characters when sampling.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken, Syllable};

pub const CONTEXT_CAP: usize = 30;
pub const TARGET_CAP: usize = 25;
const SENTENCE_END: [char; 4] = ['。', '！', '？', '；'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ContextBucket {
    #[cfg_attr(feature = "serde", serde(rename = "0-3"))]
    B0_3,
    #[cfg_attr(feature = "serde", serde(rename = "4-9"))]
    B4_9,
    #[cfg_attr(feature = "serde", serde(rename = "10+"))]
    B10p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TargetBucket {
    #[cfg_attr(feature = "serde", serde(rename = "1-3"))]
    B1_3,
    #[cfg_attr(feature = "serde", serde(rename = "4-9"))]
    B4_9,
    #[cfg_attr(feature = "serde", serde(rename = "10+"))]
    B10p,
}

impl ContextBucket {
    pub const ALL: [ContextBucket; 3] = [ContextBucket::B0_3, ContextBucket::B4_9, ContextBucket::B10p];

    /// Inclusive sampling range.
    pub fn range(self) -> (usize, usize) {
        match self {
            ContextBucket::B0_3 => (0, 3),
            ContextBucket::B4_9 => (4, 9),
            ContextBucket::B10p => (10, CONTEXT_CAP),
        }
    }

    pub fn of_len(n: usize) -> Self {
        match n {
            0..=3 => ContextBucket::B0_3,
            4..=9 => ContextBucket::B4_9,
            _ => ContextBucket::B10p,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ContextBucket::B0_3 => "0-3",
            ContextBucket::B4_9 => "4-9",
            ContextBucket::B10p => "10+",
        }
    }
}

impl TargetBucket {
    pub const ALL: [TargetBucket; 3] = [TargetBucket::B1_3, TargetBucket::B4_9, TargetBucket::B10p];

    pub fn range(self) -> (usize, usize) {
        match self {
            TargetBucket::B1_3 => (1, 3),
            TargetBucket::B4_9 => (4, 9),
            TargetBucket::B10p => (10, TARGET_CAP),
        }
    }

    pub fn of_len(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1..=3 => Some(TargetBucket::B1_3),
            4..=9 => Some(TargetBucket::B4_9),
            _ => Some(TargetBucket::B10p),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetBucket::B1_3 => "1-3",
            TargetBucket::B4_9 => "4-9",
            TargetBucket::B10p => "10+",
        }
    }
}

/// The nine (context, target) configurations in report order.
pub fn configurations() -> impl Iterator<Item = (ContextBucket, TargetBucket)> {
    ContextBucket::ALL.into_iter().flat_map(|c| TargetBucket::ALL.into_iter().map(move |t| (c, t)))
}

impl fmt::Display for ContextBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for TargetBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalInstance {
    pub domain: String,
    pub context: String,
    pub target: String,
    pub pinyin_perfect: Vec<String>,
    pub pinyin_abbrev: Vec<String>,
    pub context_bucket: ContextBucket,
    pub target_bucket: TargetBucket,
}

impl EvalInstance {
    pub fn pinyin(&self, mode: PinyinMode) -> Vec<PinyinToken> {
        let src = match mode {
            PinyinMode::Perfect => &self.pinyin_perfect,
            PinyinMode::Abbreviated => &self.pinyin_abbrev,
        };
        src.iter().map(|v| PinyinToken { mode, value: v.clone() }).collect()
    }

    pub fn raw_pinyin(&self, mode: PinyinMode) -> &[String] {
        match mode {
            PinyinMode::Perfect => &self.pinyin_perfect,
            PinyinMode::Abbreviated => &self.pinyin_abbrev,
        }
    }

    /// Checks lengths, bucket labels and perfect/abbreviated alignment.
    pub fn check(&self) -> Result<()> {
        let k = self.target.chars().count();
        let n = self.context.chars().count();
        if self.pinyin_perfect.len() != k || self.pinyin_abbrev.len() != k {
            return Err(Error::LengthMismatch { pinyin: self.pinyin_perfect.len(), target: k });
        }
        if ContextBucket::of_len(n) != self.context_bucket {
            return Err(Error::Bucket { len: n });
        }
        if TargetBucket::of_len(k) != Some(self.target_bucket) {
            return Err(Error::Bucket { len: k });
        }
        for (p, a) in self.pinyin_perfect.iter().zip(&self.pinyin_abbrev) {
            let s = Syllable::parse(p).ok_or_else(|| Error::UnknownSyllable(p.clone()))?;
            if s.abbreviation() != a {
                return Err(Error::InvalidRequest {
                    field: "pinyin_abbrev",
                    message: format!("{a:?} is not the abbreviation of {p:?}"),
                });
            }
        }
        Ok(())
    }
}

/// Splits text into sentences after 。！？；, keeping the terminator.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c == '\n' || c == '\r' {
            push_trimmed(&mut out, &mut cur);
            continue;
        }
        cur.push(c);
        if SENTENCE_END.contains(&c) {
            push_trimmed(&mut out, &mut cur);
        }
    }
    push_trimmed(&mut out, &mut cur);
    out
}

fn push_trimmed(out: &mut Vec<String>, cur: &mut String) {
    let t = cur.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
    cur.clear();
}

/// All (context length, target length) pairs satisfying both buckets with a
/// fully readable target inside the sentence.
pub fn feasible_cases(readable: &[bool], cb: ContextBucket, tb: TargetBucket) -> Vec<(usize, usize)> {
    let (clo, chi) = cb.range();
    let (tlo, thi) = tb.range();
    let mut out = Vec::new();
    for split in clo..=chi.min(readable.len()) {
        let mut len = 0;
        while split + len < readable.len() && readable[split + len] && len < thi {
            len += 1;
            if len >= tlo {
                out.push((split, len));
            }
        }
    }
    out
}

/// Builds the instance for a chosen split.
pub fn instance_at(domain: &str, sentence: &[char], lexicon: &Lexicon, split: usize, len: usize) -> Option<EvalInstance> {
    let target = &sentence[split..split + len];
    let mut perfect = Vec::with_capacity(len);
    let mut abbrev = Vec::with_capacity(len);
    for c in target {
        let s = lexicon.default_reading(*c)?;
        perfect.push(s.as_str().to_string());
        abbrev.push(s.abbreviation().to_string());
    }
    Some(EvalInstance {
        domain: domain.to_string(),
        context: sentence[..split].iter().collect(),
        target: target.iter().collect(),
        pinyin_perfect: perfect,
        pinyin_abbrev: abbrev,
        context_bucket: ContextBucket::of_len(split),
        target_bucket: TargetBucket::of_len(len)?,
    })
}

/// Draws one case uniformly among feasible (split, length) pairs, or `None`
/// when the sentence cannot satisfy the buckets.
pub fn sample_case<R: Rng + ?Sized>(
    domain: &str,
    sentence: &[char],
    cb: ContextBucket,
    tb: TargetBucket,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Option<EvalInstance> {
    let readable: Vec<bool> = sentence.iter().map(|c| lexicon.default_reading(*c).is_some()).collect();
    let cases = feasible_cases(&readable, cb, tb);
    if cases.is_empty() {
        return None;
    }
    let (split, len) = cases[rng.gen_range(0..cases.len())];
    instance_at(domain, sentence, lexicon, split, len)
}

/// Outcome of filling one (context, target) configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBuild {
    pub context_bucket: ContextBucket,
    pub target_bucket: TargetBucket,
    pub instances: Vec<EvalInstance>,
    pub requested: usize,
}

impl CellBuild {
    pub fn shortfall(&self) -> usize {
        self.requested - self.instances.len()
    }
}

/// Fills every configuration of one domain with up to `per_config`
/// instances without duplicate (context, target) pairs. `rng_for` supplies
/// an independent generator per configuration index.
pub fn build_domain<R: Rng, F: FnMut(usize) -> R>(
    domain: &str,
    sentences: &[String],
    lexicon: &Lexicon,
    per_config: usize,
    mut rng_for: F,
) -> Result<Vec<CellBuild>> {
    if sentences.is_empty() {
        return Err(Error::InvalidRequest { field: "corpus", message: format!("domain {domain:?} has no sentences") });
    }
    let prepared: Vec<(Vec<char>, Vec<bool>)> = sentences
        .iter()
        .map(|s| {
            let chars: Vec<char> = s.chars().collect();
            let readable = chars.iter().map(|c| lexicon.default_reading(*c).is_some()).collect();
            (chars, readable)
        })
        .collect();
    let mut out = Vec::with_capacity(9);
    for (idx, (cb, tb)) in configurations().enumerate() {
        let mut rng = rng_for(idx);
        let pools: Vec<(usize, Vec<(usize, usize)>)> = prepared
            .iter()
            .enumerate()
            .map(|(i, (_, r))| (i, feasible_cases(r, cb, tb)))
            .filter(|(_, c)| !c.is_empty())
            .collect();
        let distinct_cap: usize = pools.iter().map(|(_, c)| c.len()).sum();
        let mut seen = BTreeSet::new();
        let mut instances = Vec::new();
        let mut attempts = 0usize;
        let max_attempts = 50 * per_config + 1000;
        while instances.len() < per_config && !pools.is_empty() && seen.len() < distinct_cap && attempts < max_attempts {
            attempts += 1;
            let (si, cases) = &pools[rng.gen_range(0..pools.len())];
            let (split, len) = cases[rng.gen_range(0..cases.len())];
            let inst = match instance_at(domain, &prepared[*si].0, lexicon, split, len) {
                Some(i) => i,
                None => continue,
            };
            if seen.insert((inst.context.clone(), inst.target.clone())) {
                instances.push(inst);
            }
        }
        out.push(CellBuild { context_bucket: cb, target_bucket: tb, instances, requested: per_config });
    }
    Ok(out)
}

/// Parses one `<syllables>\t<target>` row (empty context, perfect pinyin).
pub fn parse_pd_line(line: &str, line_no: usize, domain: &str) -> Result<EvalInstance> {
    let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
    let err = |message: String| Error::Format { line: line_no, message };
    if fields.len() != 2 {
        return Err(err(format!("expected `<pinyin>\\t<target>`, got {} fields", fields.len())));
    }
    let perfect: Vec<String> = fields[0].split_whitespace().map(str::to_string).collect();
    let target = fields[1].trim();
    let k = target.chars().count();
    if perfect.len() != k {
        return Err(err(format!("{} syllables for {} characters", perfect.len(), k)));
    }
    let mut abbrev = Vec::with_capacity(k);
    for p in &perfect {
        let s = Syllable::parse(p).ok_or_else(|| err(format!("{p:?} is not a perfect pinyin syllable")))?;
        abbrev.push(s.abbreviation().to_string());
    }
    Ok(EvalInstance {
        domain: domain.to_string(),
        context: String::new(),
        target: target.to_string(),
        pinyin_perfect: perfect,
        pinyin_abbrev: abbrev,
        context_bucket: ContextBucket::B0_3,
        target_bucket: TargetBucket::of_len(k).ok_or_else(|| err("empty target".into()))?,
    })
}
