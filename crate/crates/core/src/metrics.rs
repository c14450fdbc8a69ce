//! P@K hit flags and their aggregation into per-cell, per-domain and
//! overall precision tables.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{configurations, ContextBucket, TargetBucket};
use crate::decoder::Candidate;
use crate::error::{Error, Result};

/// 1-based rank of `truth` among the candidate texts, if present.
pub fn rank_of(candidates: &[Candidate], truth: &str) -> Result<Option<usize>> {
    let k = truth.chars().count();
    for c in candidates {
        let n = c.text.chars().count();
        if n != k {
            return Err(Error::LengthMismatch { pinyin: n, target: k });
        }
    }
    Ok(candidates.iter().position(|c| c.text == truth).map(|i| i + 1))
}

/// For each K, whether `truth` is among the first K candidates.
pub fn precision_at_k(candidates: &[Candidate], truth: &str, ks: &[usize]) -> Result<Vec<bool>> {
    let rank = rank_of(candidates, truth)?;
    Ok(ks.iter().map(|k| rank.is_some_and(|r| r <= *k)).collect())
}

/// One decoded instance, as written to the hit log.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HitRecord {
    pub id: usize,
    pub domain: String,
    pub context_bucket: ContextBucket,
    pub target_bucket: TargetBucket,
    /// 1-based rank of the ground truth, or -1 when absent.
    pub rank: i64,
    pub ms: f64,
}

impl HitRecord {
    pub fn hit_at(&self, k: usize) -> bool {
        self.rank >= 1 && self.rank as usize <= k
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Score {
    pub count: usize,
    /// Percentages aligned with the report's `ks`.
    pub precision: Vec<f64>,
    pub mean_ms: f64,
}

impl Score {
    fn from_hits<'a>(hits: impl Iterator<Item = &'a HitRecord>, ks: &[usize]) -> Self {
        let mut count = 0usize;
        let mut hit_counts = alloc::vec![0usize; ks.len()];
        let mut ms = 0.0;
        for h in hits {
            count += 1;
            ms += h.ms;
            for (i, k) in ks.iter().enumerate() {
                if h.hit_at(*k) {
                    hit_counts[i] += 1;
                }
            }
        }
        let denom = count.max(1) as f64;
        Score {
            count,
            precision: hit_counts.iter().map(|h| 100.0 * *h as f64 / denom).collect(),
            mean_ms: ms / denom,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellScore {
    pub context_bucket: ContextBucket,
    pub target_bucket: TargetBucket,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainScore {
    pub domain: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub score: Score,
    pub cells: Vec<CellScore>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportMeta {
    pub model_id: String,
    pub mode: String,
    pub beam_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub ks: Vec<usize>,
    /// Instance-weighted over all domains.
    pub overall: Score,
    /// The nine configurations, pooled over domains; empty cells omitted.
    pub cells: Vec<CellScore>,
    pub domains: Vec<DomainScore>,
}

fn cells_of(hits: &[&HitRecord], ks: &[usize]) -> Vec<CellScore> {
    configurations()
        .filter_map(|(cb, tb)| {
            let score = Score::from_hits(
                hits.iter().copied().filter(|h| h.context_bucket == cb && h.target_bucket == tb),
                ks,
            );
            (score.count > 0).then_some(CellScore { context_bucket: cb, target_bucket: tb, score })
        })
        .collect()
}

impl EvalReport {
    /// Aggregates a hit log. Deterministic in the order-independent sense:
    /// any permutation of `hits` yields the same report.
    pub fn from_hits(hits: &[HitRecord], ks: &[usize], meta: ReportMeta) -> Self {
        let all: Vec<&HitRecord> = hits.iter().collect();
        let mut by_domain: BTreeMap<&str, Vec<&HitRecord>> = BTreeMap::new();
        for h in hits {
            by_domain.entry(h.domain.as_str()).or_default().push(h);
        }
        let domains = by_domain
            .into_iter()
            .map(|(d, hs)| DomainScore {
                domain: d.into(),
                score: Score::from_hits(hs.iter().copied(), ks),
                cells: cells_of(&hs, ks),
            })
            .collect();
        EvalReport {
            meta,
            ks: ks.to_vec(),
            overall: Score::from_hits(all.iter().copied(), ks),
            cells: cells_of(&all, ks),
            domains,
        }
    }

    /// Precision at `k` (percent) overall, if `k` was evaluated.
    pub fn overall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|x| *x == k).map(|i| self.overall.precision[i])
    }
}
