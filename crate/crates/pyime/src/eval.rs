//! Decoding a dataset, P@K aggregation and latency comparison.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use pyime_core::dataset::{instance_at, EvalInstance};
use pyime_core::metrics::{precision_at_k, rank_of, EvalReport, HitRecord, ReportMeta, Score};
use pyime_core::training::{sample_target, TrainConfig};
use pyime_core::{predict, Lexicon, Model, PinyinMode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub mode: PinyinMode,
    pub beam_size: usize,
    pub ks: Vec<usize>,
    pub model_id: String,
    pub seed: u64,
}

impl EvalOptions {
    pub fn new(mode: PinyinMode, beam_size: usize) -> Self {
        EvalOptions { mode, beam_size, ks: vec![1, 5, 10], model_id: String::new(), seed: 0 }
    }
}

/// Decodes every instance; returns the hit log and the aggregated report.
pub fn evaluate(model: &Model, lexicon: &Lexicon, data: &[EvalInstance], opts: &EvalOptions) -> Result<(Vec<HitRecord>, EvalReport)> {
    if data.is_empty() {
        return Err(Error::Invalid("evaluation dataset is empty".into()));
    }
    let max_k = opts.ks.iter().copied().max().ok_or_else(|| Error::Invalid("no K values given".into()))?;
    if opts.ks.contains(&0) {
        return Err(Error::Invalid("K values must be positive".into()));
    }
    if opts.beam_size < max_k {
        return Err(Error::Invalid(format!("beam_size {} is smaller than the largest K {max_k}", opts.beam_size)));
    }
    let mut hits = Vec::with_capacity(data.len());
    for (id, inst) in data.iter().enumerate() {
        let decode = |e| Error::Decode { id, source: e };
        let start = Instant::now();
        let candidates =
            predict(model, lexicon, &inst.context, inst.raw_pinyin(opts.mode), opts.mode, opts.beam_size, max_k)
                .map_err(decode)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let rank = rank_of(&candidates, &inst.target).map_err(decode)?;
        debug_assert_eq!(precision_at_k(&candidates, &inst.target, &opts.ks).ok().map(|v| v.len()), Some(opts.ks.len()));
        hits.push(HitRecord {
            id,
            domain: inst.domain.clone(),
            context_bucket: inst.context_bucket,
            target_bucket: inst.target_bucket,
            rank: rank.map_or(-1, |r| r as i64),
            ms,
        });
    }
    let report = EvalReport::from_hits(&hits, &opts.ks, meta(opts));
    Ok((hits, report))
}

fn meta(opts: &EvalOptions) -> ReportMeta {
    ReportMeta { model_id: opts.model_id.clone(), mode: opts.mode.name().into(), beam_size: opts.beam_size, seed: opts.seed }
}

/// Rebuilds the report from a saved hit log.
pub fn replay(hits: &[HitRecord], opts: &EvalOptions) -> EvalReport {
    EvalReport::from_hits(hits, &opts.ks, meta(opts))
}

/// Draws `n` instances the way training draws target spans: a uniform
/// sentence, then a span from the training length distribution, with the
/// whole preceding text as context.
pub fn draw_instances<R: Rng>(domain: &str, sentences: &[String], lexicon: &Lexicon, n: usize, rng: &mut R) -> Vec<EvalInstance> {
    let cfg = TrainConfig::default();
    let prepared: Vec<(Vec<char>, Vec<bool>)> = sentences
        .iter()
        .map(|s| {
            let c: Vec<char> = s.chars().collect();
            let r = c.iter().map(|ch| lexicon.default_reading(*ch).is_some()).collect();
            (c, r)
        })
        .filter(|(_, r): &(Vec<char>, Vec<bool>)| r.iter().any(|x| *x))
        .collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n && !prepared.is_empty() {
        let (chars, readable) = &prepared[rng.gen_range(0..prepared.len())];
        if let Some((start, len)) = sample_target(readable, &cfg, rng) {
            out.extend(instance_at(domain, chars, lexicon, start, len));
        }
    }
    out
}

fn score_row(out: &mut String, label: &str, score: &Score) {
    let _ = write!(out, "{label:<22}{:>7}", score.count);
    for p in &score.precision {
        let _ = write!(out, "{p:>9.2}");
    }
    let _ = writeln!(out, "{:>10.3}", score.mean_ms);
}

/// Aligned plain-text rendering: one row per configuration, per domain and
/// overall.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let m = &report.meta;
    let _ = writeln!(out, "model {}  mode {}  beam {}  seed {}", m.model_id, m.mode, m.beam_size, m.seed);
    let _ = write!(out, "{:<22}{:>7}", "context/target", "count");
    for k in &report.ks {
        let _ = write!(out, "{:>9}", format!("P@{k}"));
    }
    let _ = writeln!(out, "{:>10}", "ms");
    for c in &report.cells {
        score_row(&mut out, &format!("{} / {}", c.context_bucket, c.target_bucket), &c.score);
    }
    for d in &report.domains {
        score_row(&mut out, &format!("domain {}", d.domain), &d.score);
    }
    score_row(&mut out, "overall", &report.overall);
    out
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencyRow {
    pub model_id: String,
    pub n_layers: usize,
    pub mean_ms: f64,
    pub p_at_5: f64,
}

/// Times each model over the same instances, one model at a time, and
/// returns rows sorted by layer count.
pub fn latency_compare(
    models: &[(String, &Model)],
    lexicon: &Lexicon,
    data: &[EvalInstance],
    mode: PinyinMode,
    beam_size: usize,
) -> Result<Vec<LatencyRow>> {
    if models.len() < 2 {
        return Err(Error::Invalid("latency comparison needs at least two models".into()));
    }
    let mut rows = Vec::with_capacity(models.len());
    for (id, model) in models {
        let mut opts = EvalOptions::new(mode, beam_size.max(5));
        opts.ks = vec![5];
        opts.model_id = id.clone();
        let (_, report) = evaluate(model, lexicon, data, &opts)?;
        rows.push(LatencyRow {
            model_id: id.clone(),
            n_layers: model.config.n_layers,
            mean_ms: report.overall.mean_ms,
            p_at_5: report.overall.precision[0],
        });
    }
    rows.sort_by_key(|r| r.n_layers);
    Ok(rows)
}

pub fn render_latency(rows: &[LatencyRow]) -> String {
    let mut out = format!("{:<24}{:>8}{:>12}{:>9}\n", "model", "layers", "mean ms", "P@5");
    for r in rows {
        let _ = writeln!(out, "{:<24}{:>8}{:>12.3}{:>9.2}", r.model_id, r.n_layers, r.mean_ms, r.p_at_5);
    }
    out
}
