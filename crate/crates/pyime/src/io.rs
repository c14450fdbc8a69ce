//! Reading and writing the on-disk formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use pyime_core::checkpoint::{self, Header};
use pyime_core::dataset::{parse_pd_line, EvalInstance};
use pyime_core::{Lexicon, Model};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let tmp = path.with_extension(format!(
        "{}tmp",
        path.extension().map(|e| format!("{}.", e.to_string_lossy())).unwrap_or_default()
    ));
    let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(bytes).map_err(Error::io(&tmp))?;
    f.sync_all().map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    Lexicon::parse(&read_text(path)?).map_err(|source| Error::Load { path: path.into(), source })
}

/// One sentence per non-empty line, surrounding whitespace removed.
pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let lines: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if lines.is_empty() {
        return Err(Error::Invalid(format!("{}: corpus is empty", path.display())));
    }
    Ok(lines)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    write_atomic(path, &checkpoint::encode(model))
}

pub fn load_model(path: &Path, lexicon: &Lexicon) -> Result<Model> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    checkpoint::decode(&bytes, lexicon).map_err(|source| Error::Load { path: path.into(), source })
}

/// Reads only as much of the file as the header needs.
pub fn read_model_header(path: &Path) -> Result<Header> {
    use std::io::{BufRead, BufReader};
    let f = fs::File::open(path).map_err(Error::io(path))?;
    let mut reader = BufReader::new(f);
    let mut head = Vec::new();
    loop {
        let before = head.len();
        let n = reader.read_until(b'\n', &mut head).map_err(Error::io(path))?;
        if n == 0 || &head[before..] == b"end\n" {
            break;
        }
    }
    checkpoint::read_header(&head).map(|(h, _)| h).map_err(|source| Error::Load { path: path.into(), source })
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("in-memory serialization");
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| Error::Json { path: path.into(), line: i + 1, source }))
        .collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("in-memory serialization");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| Error::Json { path: path.into(), line: 0, source })
}

/// Loads a `<pinyin>\t<target>` file: empty contexts, perfect pinyin.
pub fn load_pd(path: &Path, domain: &str) -> Result<Vec<EvalInstance>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_pd_line(l, i + 1, domain).map_err(|source| Error::Load { path: path.into(), source }))
        .collect()
}

/// Identifier reported for a checkpoint: its file stem.
pub fn model_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}
