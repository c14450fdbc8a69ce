use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("lexicon line {line}: {message}")]
    LexiconParse { line: usize, message: String },
    #[error("lexicon line {line}: duplicate reading {syllable} for {ch}")]
    DuplicateReading { line: usize, ch: char, syllable: String },
    #[error("lexicon line {line}: syllable {syllable:?} has no valid initial/final split")]
    Undecomposable { line: usize, syllable: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("unknown syllable {0:?}")]
    UnknownSyllable(String),
    #[error("pinyin token {value:?} at position {position} is not a valid {mode} token")]
    UnknownToken { position: usize, value: String, mode: &'static str },
    #[error("pinyin tokens mix perfect and abbreviated modes")]
    MixedModes,
    #[error("pinyin length {pinyin} does not match target length {target}")]
    LengthMismatch { pinyin: usize, target: usize },
    #[error("encoded length {len} exceeds max_positions {max}")]
    Overflow { len: usize, max: usize },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("target id {0} is not in its pinyin class")]
    TargetNotInClass(u32),
    #[error("empty candidate class")]
    EmptyClass,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid request: {field}: {message}")]
    InvalidRequest { field: &'static str, message: String },
    #[error("length {len} not in the requested bucket")]
    Bucket { len: usize },
}
