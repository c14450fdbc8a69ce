//! Character/pinyin mappings and the legitimate-character classes.
//!
//! A [`Lexicon`] is loaded from tab-separated rows `<char>\t<syllable>[\t<rank>]`.
//! Rows for one character are ordered by preference; the first row is the
//! default reading used for corpus annotation. Class members (all characters
//! readable as a syllable, or as any syllable behind an abbreviation key) keep
//! file order, so frequency-sorted files give frequency-sorted classes.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Initials, two-letter ones first so prefix matching is longest-first.
pub const INITIALS: [&str; 23] = [
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s", "y", "w",
];

/// Finals in toneless spelling; `v` stands for ü.
pub const FINALS: [&str; 35] = [
    "a", "ai", "an", "ang", "ao", "e", "ei", "en", "eng", "er", "i", "ia", "ian", "iang", "iao", "ie", "in", "ing",
    "iong", "iu", "o", "ong", "ou", "u", "ua", "uai", "uan", "uang", "ue", "ui", "un", "uo", "v", "ve", "ueng",
];

/// Splits a syllable into (initial, final) by longest-prefix match over
/// [`INITIALS`]. Returns `None` unless the remainder is one of [`FINALS`].
pub fn split_syllable(text: &str) -> Option<(&str, &str)> {
    let initial = INITIALS.iter().find(|i| text.starts_with(**i)).copied().unwrap_or("");
    let fin = &text[initial.len()..];
    FINALS.contains(&fin).then_some((initial, fin))
}

/// Abbreviation key of a well-formed syllable: its initial, or the first
/// letter of the final for zero-initial syllables ("an" -> "a").
fn key_of(text: &str) -> Option<&str> {
    let (initial, fin) = split_syllable(text)?;
    Some(if initial.is_empty() { &fin[..1] } else { initial })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    text: String,
    initial_len: usize,
}

impl Syllable {
    pub fn parse(text: &str) -> Option<Self> {
        let (initial, _) = split_syllable(text)?;
        Some(Syllable { text: text.to_owned(), initial_len: initial.len() })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn initial(&self) -> &str {
        &self.text[..self.initial_len]
    }

    pub fn final_part(&self) -> &str {
        &self.text[self.initial_len..]
    }

    pub fn abbreviation(&self) -> &str {
        if self.initial_len == 0 {
            &self.text[..1]
        } else {
            self.initial()
        }
    }

    pub fn token(&self, mode: PinyinMode) -> PinyinToken {
        match mode {
            PinyinMode::Perfect => PinyinToken::perfect(&self.text),
            PinyinMode::Abbreviated => PinyinToken::abbreviated(self.abbreviation()),
        }
    }
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PinyinMode {
    Perfect,
    #[cfg_attr(feature = "serde", serde(rename = "abbrev"))]
    Abbreviated,
}

impl PinyinMode {
    pub fn name(self) -> &'static str {
        match self {
            PinyinMode::Perfect => "perfect",
            PinyinMode::Abbreviated => "abbrev",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "perfect" => Some(PinyinMode::Perfect),
            "abbrev" | "abbreviated" => Some(PinyinMode::Abbreviated),
            _ => None,
        }
    }
}

impl fmt::Display for PinyinMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One typed pinyin unit: a full syllable or an abbreviation key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PinyinToken {
    pub mode: PinyinMode,
    pub value: String,
}

impl PinyinToken {
    pub fn perfect(value: &str) -> Self {
        PinyinToken { mode: PinyinMode::Perfect, value: value.to_owned() }
    }

    pub fn abbreviated(value: &str) -> Self {
        PinyinToken { mode: PinyinMode::Abbreviated, value: value.to_owned() }
    }
}

impl fmt::Display for PinyinToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    readings: BTreeMap<char, Vec<Syllable>>,
    char_order: Vec<char>,
    rows: Vec<(char, usize)>,
    perfect: BTreeMap<String, Vec<char>>,
    perfect_order: Vec<String>,
    abbrev_to_perfect: BTreeMap<String, Vec<String>>,
    abbrev: BTreeMap<String, Vec<char>>,
    abbrev_order: Vec<String>,
}

impl Lexicon {
    /// Parses lexicon text. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() || row.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::LexiconParse {
                    line,
                    message: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let mut chars = fields[0].chars();
            let ch = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(Error::LexiconParse {
                        line,
                        message: format!("first field must be one character, got {:?}", fields[0]),
                    })
                }
            };
            if fields.len() == 3 && fields[2].trim().parse::<i64>().is_err() {
                return Err(Error::LexiconParse {
                    line,
                    message: format!("rank {:?} is not an integer", fields[2]),
                });
            }
            let syllable = Syllable::parse(fields[1].trim()).ok_or_else(|| Error::Undecomposable {
                line,
                syllable: fields[1].to_owned(),
            })?;
            rows.push((line, ch, syllable));
        }
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<(usize, char, Syllable)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        let mut lex = Lexicon {
            readings: BTreeMap::new(),
            char_order: Vec::new(),
            rows: Vec::new(),
            perfect: BTreeMap::new(),
            perfect_order: Vec::new(),
            abbrev_to_perfect: BTreeMap::new(),
            abbrev: BTreeMap::new(),
            abbrev_order: Vec::new(),
        };
        for (line, ch, syllable) in rows {
            let readings = lex.readings.entry(ch).or_default();
            if readings.contains(&syllable) {
                return Err(Error::DuplicateReading { line, ch, syllable: syllable.text });
            }
            if readings.is_empty() {
                lex.char_order.push(ch);
            }
            lex.rows.push((ch, readings.len()));
            readings.push(syllable.clone());

            let text = syllable.as_str().to_owned();
            let key = syllable.abbreviation().to_owned();
            let class = lex.perfect.entry(text.clone()).or_insert_with(|| {
                lex.perfect_order.push(text.clone());
                Vec::new()
            });
            if !class.contains(&ch) {
                class.push(ch);
            }
            let members = lex.abbrev_to_perfect.entry(key.clone()).or_insert_with(|| {
                lex.abbrev_order.push(key.clone());
                Vec::new()
            });
            if !members.contains(&text) {
                members.push(text);
            }
            let class = lex.abbrev.entry(key).or_default();
            if !class.contains(&ch) {
                class.push(ch);
            }
        }
        Ok(lex)
    }

    /// All readings of `ch`, default first.
    pub fn readings(&self, ch: char) -> Option<&[Syllable]> {
        self.readings.get(&ch).map(Vec::as_slice)
    }

    pub fn default_reading(&self, ch: char) -> Option<&Syllable> {
        self.readings.get(&ch).and_then(|r| r.first())
    }

    /// Characters in file order of their first row.
    pub fn chars(&self) -> &[char] {
        &self.char_order
    }

    /// Perfect syllable inventory in file order of first appearance.
    pub fn syllables(&self) -> &[String] {
        &self.perfect_order
    }

    /// Abbreviation keys in file order of first appearance.
    pub fn abbreviation_keys(&self) -> &[String] {
        &self.abbrev_order
    }

    /// Token inventory for one input mode.
    pub fn tokens(&self, mode: PinyinMode) -> &[String] {
        match mode {
            PinyinMode::Perfect => &self.perfect_order,
            PinyinMode::Abbreviated => &self.abbrev_order,
        }
    }

    pub fn syllables_for_key(&self, key: &str) -> Option<&[String]> {
        self.abbrev_to_perfect.get(key).map(Vec::as_slice)
    }

    pub fn is_syllable(&self, text: &str) -> bool {
        self.perfect.contains_key(text)
    }

    pub fn decompose<'a>(&self, text: &'a str) -> Result<(&'a str, &'a str)> {
        if !self.is_syllable(text) {
            return Err(Error::UnknownSyllable(text.to_owned()));
        }
        split_syllable(text).ok_or_else(|| Error::UnknownSyllable(text.to_owned()))
    }

    pub fn abbreviation_key<'a>(&self, text: &'a str) -> Result<&'a str> {
        if !self.is_syllable(text) {
            return Err(Error::UnknownSyllable(text.to_owned()));
        }
        key_of(text).ok_or_else(|| Error::UnknownSyllable(text.to_owned()))
    }

    /// Characters that may be produced for `token`. Never empty.
    pub fn legitimate_chars(&self, token: &PinyinToken) -> Result<&[char]> {
        let class = match token.mode {
            PinyinMode::Perfect => self.perfect.get(&token.value),
            PinyinMode::Abbreviated => self.abbrev.get(&token.value),
        };
        match class {
            Some(c) if !c.is_empty() => Ok(c),
            Some(_) => Err(Error::EmptyClass),
            None => Err(Error::UnknownToken {
                position: 0,
                value: token.value.clone(),
                mode: token.mode.name(),
            }),
        }
    }

    /// Whether some reading of `ch` matches `token`.
    pub fn matches(&self, ch: char, token: &PinyinToken) -> bool {
        self.readings(ch).is_some_and(|rs| {
            rs.iter().any(|s| match token.mode {
                PinyinMode::Perfect => s.as_str() == token.value,
                PinyinMode::Abbreviated => s.abbreviation() == token.value,
            })
        })
    }

    /// Default reading per character; `None` for characters without pinyin.
    pub fn annotate(&self, sentence: &[char]) -> Vec<Option<&Syllable>> {
        sentence.iter().map(|c| self.default_reading(*c)).collect()
    }

    /// Validates raw strings as tokens of one mode.
    pub fn resolve<S: AsRef<str>>(&self, raw: &[S], mode: PinyinMode) -> Result<Vec<PinyinToken>> {
        raw.iter()
            .enumerate()
            .map(|(position, r)| {
                let value = r.as_ref().trim().to_ascii_lowercase();
                let known = match mode {
                    PinyinMode::Perfect => self.perfect.contains_key(&value),
                    PinyinMode::Abbreviated => self.abbrev.contains_key(&value),
                };
                if known {
                    Ok(PinyinToken { mode, value })
                } else {
                    Err(Error::UnknownToken { position, value: r.as_ref().to_string(), mode: mode.name() })
                }
            })
            .collect()
    }

    /// One row per reading in the original row order, ranks renumbered.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (rank, (ch, i)) in self.rows.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", ch, self.readings[ch][*i], rank));
        }
        out
    }

    pub fn reading_count(&self) -> usize {
        self.readings.values().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const SMALL: &str = "# test\n我\two\t1\n们\tmen\t2\n为\twei\n为\two\n王\twang\n外\twai\n无\twu\n安\tan\n中\tzhong\n张\tzhang\n长\tchang\n长\tzhang\n";

    fn small() -> Lexicon {
        Lexicon::parse(SMALL).unwrap()
    }

    #[test]
    fn table_one_decompositions() {
        let lex = small();
        let wo = &lex.readings('我').unwrap()[0];
        assert_eq!((wo.initial(), wo.final_part()), ("w", "o"));
        assert_eq!(lex.decompose("men").unwrap(), ("m", "en"));
        assert_eq!(lex.decompose("zhang").unwrap(), ("zh", "ang"));
        assert_eq!(lex.decompose("an").unwrap(), ("", "an"));
        assert!(matches!(lex.decompose("xyz"), Err(Error::UnknownSyllable(_))));
    }

    #[test]
    fn abbreviation_keys() {
        let lex = small();
        assert_eq!(lex.abbreviation_key("wo").unwrap(), "w");
        assert_eq!(lex.abbreviation_key("men").unwrap(), "m");
        assert_eq!(lex.abbreviation_key("zhong").unwrap(), "zh");
        assert_eq!(lex.abbreviation_key("an").unwrap(), "a");
        assert!(lex.abbreviation_key("qq").is_err());
    }

    #[test]
    fn classes() {
        let lex = small();
        assert!(lex.legitimate_chars(&PinyinToken::perfect("wo")).unwrap().contains(&'我'));
        let w = lex.legitimate_chars(&PinyinToken::abbreviated("w")).unwrap();
        for s in ["wo", "wei", "wang", "wai", "wu"] {
            for c in lex.legitimate_chars(&PinyinToken::perfect(s)).unwrap() {
                assert!(w.contains(c));
            }
        }
        // file order, deduplicated ('为' reads both wei and wo)
        assert_eq!(w, &['我', '为', '王', '外', '无']);
        assert_eq!(lex.legitimate_chars(&PinyinToken::perfect("wo")).unwrap(), &['我', '为']);
        assert!(matches!(
            lex.legitimate_chars(&PinyinToken::perfect("xx")),
            Err(Error::UnknownToken { .. })
        ));
        assert_eq!(lex.syllables_for_key("zh").unwrap(), &["zhong".to_string(), "zhang".to_string()]);
    }

    #[test]
    fn annotation_uses_default_reading() {
        let lex = small();
        let s: Vec<char> = "我们123长".chars().collect();
        let ann: Vec<Option<&str>> = lex.annotate(&s).into_iter().map(|o| o.map(Syllable::as_str)).collect();
        assert_eq!(ann, vec![Some("wo"), Some("men"), None, None, None, Some("chang")]);
    }

    #[test]
    fn load_errors() {
        assert_eq!(Lexicon::parse(""), Err(Error::EmptyLexicon));
        assert_eq!(Lexicon::parse("# only comments\n"), Err(Error::EmptyLexicon));
        assert!(matches!(
            Lexicon::parse("我\two\n我\two\n"),
            Err(Error::DuplicateReading { line: 2, .. })
        ));
        assert!(matches!(Lexicon::parse("我\tzh\n"), Err(Error::Undecomposable { line: 1, .. })));
        assert!(matches!(Lexicon::parse("我\tWo\n"), Err(Error::Undecomposable { .. })));
        assert!(matches!(Lexicon::parse("我们\two\n"), Err(Error::LexiconParse { line: 1, .. })));
        assert!(matches!(Lexicon::parse("我\two\tx\n"), Err(Error::LexiconParse { line: 1, .. })));
        assert!(matches!(Lexicon::parse("我\n"), Err(Error::LexiconParse { line: 1, .. })));
    }

    #[test]
    fn resolve_tokens() {
        let lex = small();
        assert_eq!(lex.resolve(&["wo", "men"], PinyinMode::Perfect).unwrap().len(), 2);
        let err = lex.resolve(&["w", "li"], PinyinMode::Abbreviated).unwrap_err();
        assert_eq!(err, Error::UnknownToken { position: 1, value: "li".into(), mode: "abbrev" });
        assert!(lex.resolve(&["wo"], PinyinMode::Abbreviated).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let lex = small();
        assert_eq!(Lexicon::parse(&lex.to_tsv()).unwrap(), lex);
    }
}
