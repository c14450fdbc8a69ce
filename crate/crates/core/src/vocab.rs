//! Token ids shared by the model, the encoders and the decoder.
//!
//! Layout of the input embedding table:
//!
//! ```text
//! 0 .. C          characters (also the output classes of the LM head)
//! C, C+1, C+2     [BOS], [SEP], [UNK]
//! C+3 .. C+3+P    pinyin tokens (concat variant only)
//! ```
//!
//! The pinyin embedding table of the embed variant has `P + 1` rows, row 0
//! being `[unk]`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PinyinMode, PinyinToken};

pub const UNK_PINYIN: u32 = 0;

/// The pinyin input modes a vocabulary, and so a model, accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Modes {
    Perfect,
    #[cfg_attr(feature = "serde", serde(rename = "abbrev"))]
    Abbreviated,
    Both,
}

impl Modes {
    pub fn list(self) -> &'static [PinyinMode] {
        match self {
            Modes::Perfect => &[PinyinMode::Perfect],
            Modes::Abbreviated => &[PinyinMode::Abbreviated],
            Modes::Both => &[PinyinMode::Perfect, PinyinMode::Abbreviated],
        }
    }

    pub fn contains(self, mode: PinyinMode) -> bool {
        self.list().contains(&mode)
    }

    pub fn name(self) -> &'static str {
        match self {
            Modes::Perfect => "perfect",
            Modes::Abbreviated => "abbrev",
            Modes::Both => "both",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "both" => Some(Modes::Both),
            other => PinyinMode::from_name(other).map(Modes::from),
        }
    }
}

impl From<PinyinMode> for Modes {
    fn from(mode: PinyinMode) -> Self {
        match mode {
            PinyinMode::Perfect => Modes::Perfect,
            PinyinMode::Abbreviated => Modes::Abbreviated,
        }
    }
}

impl core::fmt::Display for Modes {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    chars: Vec<char>,
    char_ids: BTreeMap<char, u32>,
    modes: Modes,
    pinyin: Vec<PinyinToken>,
    pinyin_ids: BTreeMap<PinyinToken, u32>,
    classes: Vec<Vec<u32>>,
}

impl Vocab {
    /// Lexicon characters (file order) followed by `extra` characters not in
    /// the lexicon, e.g. punctuation and digits seen in a corpus. Pinyin ids
    /// list perfect syllables before abbreviation keys.
    pub fn build(lexicon: &Lexicon, modes: impl Into<Modes>, extra: impl IntoIterator<Item = char>) -> Self {
        let modes = modes.into();
        let mut chars: Vec<char> = lexicon.chars().to_vec();
        let mut seen: BTreeMap<char, ()> = chars.iter().map(|c| (*c, ())).collect();
        let mut extras: Vec<char> = extra.into_iter().filter(|c| seen.insert(*c, ()).is_none()).collect();
        extras.sort_unstable();
        chars.extend(extras);
        let pinyin = modes
            .list()
            .iter()
            .flat_map(|m| lexicon.tokens(*m).iter().map(move |v| PinyinToken { mode: *m, value: v.clone() }))
            .collect();
        Self::from_parts(chars, modes, pinyin, lexicon).expect("lexicon-derived vocabulary is consistent")
    }

    /// Rebuilds a vocabulary from stored parts, deriving the pinyin classes
    /// from `lexicon`. Class members missing from `chars` are unreachable.
    pub fn from_parts(chars: Vec<char>, modes: Modes, pinyin: Vec<PinyinToken>, lexicon: &Lexicon) -> Result<Self> {
        let mut char_ids = BTreeMap::new();
        for (i, c) in chars.iter().enumerate() {
            if char_ids.insert(*c, i as u32).is_some() {
                return Err(Error::Config(alloc::format!("duplicate vocabulary character {c:?}")));
            }
        }
        let mut pinyin_ids = BTreeMap::new();
        let mut classes = Vec::with_capacity(pinyin.len());
        for (i, token) in pinyin.iter().enumerate() {
            if !modes.contains(token.mode) {
                return Err(Error::Config(alloc::format!("{} token {:?} in a {modes} vocabulary", token.mode, token.value)));
            }
            if pinyin_ids.insert(token.clone(), i as u32).is_some() {
                return Err(Error::Config(alloc::format!("duplicate pinyin token {:?}", token.value)));
            }
            let class = match lexicon.legitimate_chars(token) {
                Ok(members) => members.iter().filter_map(|c| char_ids.get(c).copied()).collect(),
                Err(_) => Vec::new(),
            };
            classes.push(class);
        }
        Ok(Vocab { chars, char_ids, modes, pinyin, pinyin_ids, classes })
    }

    pub fn modes(&self) -> Modes {
        self.modes
    }

    /// The mode used when none is given: perfect if accepted.
    pub fn default_mode(&self) -> PinyinMode {
        self.modes.list()[0]
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn pinyin(&self) -> &[PinyinToken] {
        &self.pinyin
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn n_pinyin(&self) -> usize {
        self.pinyin.len()
    }

    pub fn bos(&self) -> u32 {
        self.chars.len() as u32
    }

    pub fn sep(&self) -> u32 {
        self.chars.len() as u32 + 1
    }

    pub fn unk(&self) -> u32 {
        self.chars.len() as u32 + 2
    }

    /// Input-table id of pinyin token `pid` (concat layout).
    pub fn pinyin_token(&self, pid: u32) -> u32 {
        self.chars.len() as u32 + 3 + pid
    }

    pub fn char_id(&self, c: char) -> Option<u32> {
        self.char_ids.get(&c).copied()
    }

    pub fn char_at(&self, id: u32) -> char {
        self.chars[id as usize]
    }

    /// Input id of a context character; unknown characters map to `[UNK]`.
    pub fn input_id(&self, c: char) -> u32 {
        self.char_id(c).unwrap_or_else(|| self.unk())
    }

    pub fn pinyin_id(&self, token: &PinyinToken) -> Option<u32> {
        self.pinyin_ids.get(token).copied()
    }

    /// Character ids legitimate for pinyin token `pid`, lexicon order.
    pub fn class(&self, pid: u32) -> &[u32] {
        &self.classes[pid as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let lex = Lexicon::parse("我\two\n们\tmen\n").unwrap();
        let v = Vocab::build(&lex, PinyinMode::Abbreviated, "，我1".chars());
        assert_eq!(v.chars(), &['我', '们', '1', '，']);
        assert_eq!((v.bos(), v.sep(), v.unk()), (4, 5, 6));
        assert_eq!(v.pinyin(), &[PinyinToken::abbreviated("w"), PinyinToken::abbreviated("m")]);
        assert_eq!(v.pinyin_token(1), 8);
        assert_eq!(v.class(v.pinyin_id(&PinyinToken::abbreviated("m")).unwrap()), &[1]);
        assert_eq!(v.pinyin_id(&PinyinToken::perfect("wo")), None);
        assert_eq!(v.input_id('x'), v.unk());
    }

    #[test]
    fn both_modes_get_distinct_ids() {
        let lex = Lexicon::parse("啊\ta\n爱\tai\n").unwrap();
        let v = Vocab::build(&lex, Modes::Both, []);
        let syllable = v.pinyin_id(&PinyinToken::perfect("a")).unwrap();
        let key = v.pinyin_id(&PinyinToken::abbreviated("a")).unwrap();
        assert_ne!(syllable, key);
        assert_eq!(v.class(syllable), &[0]);
        assert_eq!(v.class(key), &[0, 1]);
        assert_eq!(v.n_pinyin(), 3);
        assert_eq!(v.default_mode(), PinyinMode::Perfect);
    }
}
