//! Evaluation-set builds: JSONL per (domain, configuration) plus a manifest.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pyime_core::dataset::{build_domain, split_sentences, CellBuild, ContextBucket, EvalInstance, TargetBucket};
use pyime_core::Lexicon;

use crate::error::{Error, Result};
use crate::io;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BuildSpec {
    pub domains: Vec<DomainSource>,
    pub instances_per_config: usize,
    pub seed: u64,
}

impl BuildSpec {
    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Invalid("at least one domain is required".into()));
        }
        if self.instances_per_config == 0 {
            return Err(Error::Invalid("instances_per_config must be at least 1".into()));
        }
        for (i, d) in self.domains.iter().enumerate() {
            let ok = !d.name.is_empty() && d.name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(Error::Invalid(format!("domain name {:?} must be alphanumeric, '-' or '_'", d.name)));
            }
            if self.domains[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Invalid(format!("domain {:?} listed twice", d.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellEntry {
    pub context_bucket: ContextBucket,
    pub target_bucket: TargetBucket,
    /// Relative to the manifest's directory.
    pub file: String,
    pub count: usize,
    pub requested: usize,
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainEntry {
    pub name: String,
    pub source: PathBuf,
    pub sentences: usize,
    pub cells: Vec<CellEntry>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub instances_per_config: usize,
    pub total: usize,
    pub domains: Vec<DomainEntry>,
}

pub fn cell_file(domain: &str, cb: ContextBucket, tb: TargetBucket) -> String {
    format!("{domain}/{cb}_{tb}.jsonl")
}

fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Generator for one (domain, configuration): independent of the other
/// domains in the spec, so adding a domain leaves existing files unchanged.
fn cell_rng(seed: u64, domain: &str, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(name_hash(domain).wrapping_add(cell as u64));
    rng
}

fn build_one(spec: &BuildSpec, source: &DomainSource, lexicon: &Lexicon) -> Result<(usize, Vec<CellBuild>)> {
    let sentences = split_sentences(&io::read_text(&source.path)?);
    if sentences.is_empty() {
        return Err(Error::Invalid(format!("domain {:?}: corpus {} is empty", source.name, source.path.display())));
    }
    let cells = build_domain(&source.name, &sentences, lexicon, spec.instances_per_config, |i| {
        cell_rng(spec.seed, &source.name, i)
    })?;
    Ok((sentences.len(), cells))
}

/// Builds every domain (one thread each), writes the JSONL files under `out`
/// and then the manifest.
pub fn build(spec: &BuildSpec, lexicon: &Lexicon, out: &Path) -> Result<Manifest> {
    spec.validate()?;
    let results: Vec<Result<(usize, Vec<CellBuild>)>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            spec.domains.iter().map(|d| s.spawn(move || build_one(spec, d, lexicon))).collect();
        handles.into_iter().map(|h| h.join().expect("domain build thread panicked")).collect()
    });
    let mut domains = Vec::with_capacity(spec.domains.len());
    let mut total = 0;
    for (source, result) in spec.domains.iter().zip(results) {
        let (sentences, cells) = result?;
        let mut entries = Vec::with_capacity(cells.len());
        for cell in cells {
            let file = cell_file(&source.name, cell.context_bucket, cell.target_bucket);
            io::write_jsonl(&out.join(&file), &cell.instances)?;
            total += cell.instances.len();
            entries.push(CellEntry {
                context_bucket: cell.context_bucket,
                target_bucket: cell.target_bucket,
                file,
                count: cell.instances.len(),
                requested: cell.requested,
                shortfall: cell.shortfall(),
            });
        }
        domains.push(DomainEntry { name: source.name.clone(), source: source.path.clone(), sentences, cells: entries });
    }
    let manifest = Manifest { seed: spec.seed, instances_per_config: spec.instances_per_config, total, domains };
    io::write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Loads an evaluation set from a build directory (or its manifest), a
/// single JSONL file, or a `<pinyin>\t<target>` file (`.tsv`/`.txt`).
pub fn load_dataset(path: &Path) -> Result<Vec<EvalInstance>> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let instances = if manifest_path.file_name().is_some_and(|n| n == MANIFEST) {
        let manifest: Manifest = io::read_json(&manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let mut out = Vec::with_capacity(manifest.total);
        for d in &manifest.domains {
            for c in &d.cells {
                let rows: Vec<EvalInstance> = io::read_jsonl(&dir.join(&c.file))?;
                if rows.len() != c.count {
                    return Err(Error::Invalid(format!("{}: {} rows, manifest says {}", c.file, rows.len(), c.count)));
                }
                out.extend(rows);
            }
        }
        out
    } else {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => {
                let domain = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                io::load_pd(path, &domain)?
            }
            _ => io::read_jsonl(path)?,
        }
    };
    for (i, inst) in instances.iter().enumerate() {
        inst.check().map_err(|source| Error::Decode { id: i, source })?;
    }
    Ok(instances)
}
