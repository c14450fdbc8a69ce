//! Input layouts for the three model variants.
//!
//! Position ids (BOS occupies position 0, so context character `i`, 1-based,
//! sits at position `i`):
//!
//! ```text
//! concat   [BOS  w1 .. wn  SEP   p1    ..  pk    SEP    w'1   ..  w'k  ]
//! position  0    1  .. n   n+1   n+2   ..  n+k+1 n+k+2  n+2   ..  n+k+1
//! ```
//!
//! Each target character `w'j` shares the position of its pinyin token `pj`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken};
use crate::model::Variant;
use crate::vocab::{Vocab, UNK_PINYIN};

/// Which softmax normalizes a masked prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassRef {
    /// The whole character vocabulary.
    Whole,
    /// The legitimate class of a pinyin token id.
    Pinyin(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub token_ids: Vec<u32>,
    pub position_ids: Vec<u32>,
    /// Embed variant only: pinyin-table id of the next character per position.
    pub pinyin_ids: Option<Vec<u32>>,
    /// True where the prediction of token `t + 1` contributes to the loss.
    pub target_mask: Vec<bool>,
    /// `Some` exactly where `target_mask` is true.
    pub classes: Vec<Option<ClassRef>>,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.target_mask.iter().filter(|m| **m).count()
    }

    /// Masked positions with the character id they must predict.
    pub fn targets(&self) -> impl Iterator<Item = (usize, u32, ClassRef)> + '_ {
        self.target_mask.iter().enumerate().filter(|(_, m)| **m).map(move |(t, _)| {
            (t, self.token_ids[t + 1], self.classes[t].expect("masked position carries a class"))
        })
    }
}

/// Encodes examples against one vocabulary and position budget.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    pub vocab: &'a Vocab,
    pub max_positions: usize,
}

impl<'a> Encoder<'a> {
    pub fn new(vocab: &'a Vocab, max_positions: usize) -> Self {
        Encoder { vocab, max_positions }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.max_positions {
            Err(Error::Overflow { len, max: self.max_positions })
        } else {
            Ok(())
        }
    }

    fn target_ids(&self, target: &[char]) -> Result<Vec<u32>> {
        target
            .iter()
            .map(|c| {
                self.vocab.char_id(*c).ok_or_else(|| Error::InvalidRequest {
                    field: "target",
                    message: alloc::format!("character {c:?} is not in the model vocabulary"),
                })
            })
            .collect()
    }

    /// Pinyin ids of a uniform-mode token sequence matching the vocabulary.
    pub fn pinyin_ids(&self, pinyin: &[PinyinToken]) -> Result<Vec<u32>> {
        if let Some(first) = pinyin.first() {
            if pinyin.iter().any(|p| p.mode != first.mode) {
                return Err(Error::MixedModes);
            }
        }
        pinyin
            .iter()
            .enumerate()
            .map(|(position, p)| {
                self.vocab.pinyin_id(p).ok_or_else(|| Error::UnknownToken {
                    position,
                    value: p.value.clone(),
                    mode: p.mode.name(),
                })
            })
            .collect()
    }

    fn classes_for(pinyin: Option<&[u32]>, k: usize) -> impl Iterator<Item = ClassRef> + '_ {
        (0..k).map(move |j| match pinyin {
            Some(p) => ClassRef::Pinyin(p[j]),
            None => ClassRef::Whole,
        })
    }

    /// `[BOS, context, target]`; the `|target|` predictions of target
    /// characters are masked in.
    pub fn baseline(&self, context: &[char], pinyin: Option<&[PinyinToken]>, target: &[char]) -> Result<EncodedInput> {
        let len = 1 + context.len() + target.len();
        self.check_len(len)?;
        let pids = match pinyin {
            Some(p) => {
                if p.len() != target.len() {
                    return Err(Error::LengthMismatch { pinyin: p.len(), target: target.len() });
                }
                Some(self.pinyin_ids(p)?)
            }
            None => None,
        };
        let mut token_ids = Vec::with_capacity(len);
        token_ids.push(self.vocab.bos());
        token_ids.extend(context.iter().map(|c| self.vocab.input_id(*c)));
        token_ids.extend(self.target_ids(target)?);
        let position_ids = (0..len as u32).collect();
        let mut target_mask = alloc::vec![false; len];
        let mut classes = alloc::vec![None; len];
        for (j, class) in Self::classes_for(pids.as_deref(), target.len()).enumerate() {
            let t = context.len() + j;
            target_mask[t] = true;
            classes[t] = Some(class);
        }
        Ok(EncodedInput { token_ids, position_ids, pinyin_ids: None, target_mask, classes })
    }

    /// `[BOS, context, SEP, pinyin, SEP, target]`. An empty `target` gives
    /// the inference prefix.
    pub fn concat(&self, context: &[char], pinyin: &[PinyinToken], target: &[char]) -> Result<EncodedInput> {
        if !target.is_empty() && pinyin.len() != target.len() {
            return Err(Error::LengthMismatch { pinyin: pinyin.len(), target: target.len() });
        }
        let (n, k) = (context.len(), pinyin.len());
        let len = n + k + target.len() + 3;
        self.check_len(len)?;
        let pids = self.pinyin_ids(pinyin)?;
        let mut token_ids = Vec::with_capacity(len);
        let mut position_ids = Vec::with_capacity(len);
        token_ids.push(self.vocab.bos());
        token_ids.extend(context.iter().map(|c| self.vocab.input_id(*c)));
        token_ids.push(self.vocab.sep());
        token_ids.extend(pids.iter().map(|p| self.vocab.pinyin_token(*p)));
        token_ids.push(self.vocab.sep());
        token_ids.extend(self.target_ids(target)?);
        position_ids.extend(0..=(n as u32 + 1));
        position_ids.extend((0..k as u32).map(|j| n as u32 + 2 + j));
        position_ids.push((n + k + 2) as u32);
        position_ids.extend((0..target.len() as u32).map(|j| n as u32 + 2 + j));
        let mut target_mask = alloc::vec![false; len];
        let mut classes = alloc::vec![None; len];
        for (j, pid) in pids.iter().take(target.len()).enumerate() {
            let t = n + k + 2 + j;
            target_mask[t] = true;
            classes[t] = Some(ClassRef::Pinyin(*pid));
        }
        Ok(EncodedInput { token_ids, position_ids, pinyin_ids: None, target_mask, classes })
    }

    /// `[BOS, context, target]` with `pinyin_of_next[t]` the pinyin of token
    /// `t + 1` (`None` -> `[unk]`). Every prediction is masked in; the target
    /// span is normalized over its pinyin class, the context over the whole
    /// vocabulary.
    pub fn embed(
        &self,
        context: &[char],
        pinyin_of_next: &[Option<PinyinToken>],
        target: &[char],
    ) -> Result<EncodedInput> {
        let len = 1 + context.len() + target.len();
        self.check_len(len)?;
        if pinyin_of_next.len() != len {
            return Err(Error::Shape(alloc::format!(
                "pinyin_of_next has {} entries for {} positions",
                pinyin_of_next.len(),
                len
            )));
        }
        let mut pinyin_ids = Vec::with_capacity(len);
        for (position, p) in pinyin_of_next.iter().enumerate() {
            pinyin_ids.push(match p {
                None => UNK_PINYIN,
                Some(tok) => {
                    1 + self.vocab.pinyin_id(tok).ok_or_else(|| Error::UnknownToken {
                        position,
                        value: tok.value.clone(),
                        mode: tok.mode.name(),
                    })?
                }
            });
        }
        let mut token_ids = Vec::with_capacity(len);
        token_ids.push(self.vocab.bos());
        token_ids.extend(context.iter().map(|c| self.vocab.input_id(*c)));
        token_ids.extend(self.target_ids(target)?);
        let position_ids = (0..len as u32).collect();
        let n = context.len();
        let mut target_mask = alloc::vec![false; len];
        let mut classes = alloc::vec![None; len];
        for t in 0..len - 1 {
            if token_ids[t + 1] as usize >= self.vocab.n_chars() {
                continue; // unknown context character: nothing to predict
            }
            target_mask[t] = true;
            classes[t] = Some(if t >= n {
                ClassRef::Pinyin(pinyin_ids[t] - 1)
            } else {
                ClassRef::Whole
            });
        }
        Ok(EncodedInput { token_ids, position_ids, pinyin_ids: Some(pinyin_ids), target_mask, classes })
    }

    /// Encodes a training example for `variant`. `pinyin` covers `target`.
    pub fn example(
        &self,
        variant: Variant,
        lexicon: &Lexicon,
        context: &[char],
        pinyin: &[PinyinToken],
        target: &[char],
    ) -> Result<EncodedInput> {
        if pinyin.len() != target.len() {
            return Err(Error::LengthMismatch { pinyin: pinyin.len(), target: target.len() });
        }
        match variant {
            Variant::Baseline => self.baseline(context, Some(pinyin), target),
            Variant::Concat => self.concat(context, pinyin, target),
            Variant::Embed => {
                let mode = pinyin.first().map_or(self.vocab.default_mode(), |p| p.mode);
                let next = next_pinyin(lexicon, mode, context, pinyin, true);
                self.embed(context, &next, target)
            }
        }
    }
}

/// Next-character pinyin for `[BOS, context, target...]`: context characters
/// use their default reading, the target span uses `pinyin`. With
/// `include_last` the list also covers the final target position (`[unk]`).
pub fn next_pinyin(
    lexicon: &Lexicon,
    mode: PinyinMode,
    context: &[char],
    pinyin: &[PinyinToken],
    include_last: bool,
) -> Vec<Option<PinyinToken>> {
    let mut out: Vec<Option<PinyinToken>> =
        context.iter().map(|c| lexicon.default_reading(*c).map(|s| s.token(mode))).collect();
    out.extend(pinyin.iter().cloned().map(Some));
    if include_last {
        out.push(None);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn setup() -> (Lexicon, Vocab, Vocab) {
        let lex = Lexicon::parse("我\two\n们\tmen\n下\txia\n一\tyi\n").unwrap();
        let perfect = Vocab::build(&lex, PinyinMode::Perfect, "，1".chars());
        let abbrev = Vocab::build(&lex, PinyinMode::Abbreviated, "，1".chars());
        (lex, perfect, abbrev)
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn baseline_layout_and_boundary() {
        let (_, v, _) = setup();
        let enc = Encoder::new(&v, 8);
        let e = enc.baseline(&[], None, &['我']).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.masked_count(), 1);
        assert_eq!(e.targets().collect::<Vec<_>>(), vec![(0, 0, ClassRef::Whole)]);
        let ctx = chars("我们下一我们");
        assert!(enc.baseline(&ctx, None, &['一']).is_ok()); // 1 + 6 + 1 = 8
        assert_eq!(enc.baseline(&ctx, None, &['一', '一']), Err(Error::Overflow { len: 9, max: 8 }));
    }

    #[test]
    fn concat_positions_shared() {
        let (_, v, _) = setup();
        let enc = Encoder::new(&v, 128);
        let py = [PinyinToken::perfect("wo"), PinyinToken::perfect("men")];
        let e = enc.concat(&chars("下一"), &py, &chars("我们")).unwrap();
        assert_eq!(e.token_ids, vec![v.bos(), 2, 3, v.sep(), v.pinyin_token(0), v.pinyin_token(1), v.sep(), 0, 1]);
        assert_eq!(e.position_ids, vec![0, 1, 2, 3, 4, 5, 6, 4, 5]);
        assert_eq!(
            e.targets().collect::<Vec<_>>(),
            vec![(6, 0, ClassRef::Pinyin(0)), (7, 1, ClassRef::Pinyin(1))]
        );
        let prefix = enc.concat(&[], &py[..1], &[]).unwrap();
        assert_eq!(prefix.token_ids, vec![v.bos(), v.sep(), v.pinyin_token(0), v.sep()]);
        assert_eq!(prefix.masked_count(), 0);
    }

    #[test]
    fn concat_errors() {
        let (_, v, _) = setup();
        let enc = Encoder::new(&v, 128);
        let py = [PinyinToken::perfect("wo")];
        assert!(matches!(enc.concat(&[], &py, &chars("我们")), Err(Error::LengthMismatch { .. })));
        let mixed = [PinyinToken::perfect("wo"), PinyinToken::abbreviated("m")];
        assert_eq!(enc.concat(&[], &mixed, &chars("我们")), Err(Error::MixedModes));
        let small = Encoder::new(&v, 4);
        assert!(matches!(small.concat(&['我'], &py, &['我']), Err(Error::Overflow { .. })));
    }

    #[test]
    fn embed_next_pinyin_ids() {
        let (lex, _, v) = setup();
        let enc = Encoder::new(&v, 128);
        let ctx = chars("我1");
        let py = [PinyinToken::abbreviated("m")];
        let e = enc.example(Variant::Embed, &lex, &ctx, &py, &['们']).unwrap();
        let m = 1 + v.pinyin_id(&PinyinToken::abbreviated("m")).unwrap();
        let w = 1 + v.pinyin_id(&PinyinToken::abbreviated("w")).unwrap();
        // BOS -> 我 (w), 我 -> 1 (unk), 1 -> 们 (m), 们 -> end (unk)
        assert_eq!(e.pinyin_ids, Some(vec![w, UNK_PINYIN, m, UNK_PINYIN]));
        assert_eq!(e.target_mask, vec![true, true, true, false]);
        assert_eq!(e.classes[2], Some(ClassRef::Pinyin(m - 1)));
        assert_eq!(e.classes[0], Some(ClassRef::Whole));
    }
}
