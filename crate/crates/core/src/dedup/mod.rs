//! Merging extractor variants of the same pages, fuzzy deduplication and
//! subsampling.
//!
//! Documents from different extractors share a [`PageId`] when they come
//! from the same crawl record. [`union_merge`] keeps one version per id,
//! chosen by a fixed preference order or by a generator keyed on the id
//! itself. [`fuzzy_dedup`] then removes near duplicates that differ in id.

mod minhash;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::extract::{ExtractedDoc, ExtractorId};
use crate::warc::PageId;

pub use minhash::{
    clusters, fuzzy_dedup, minhash_signature, shingles, true_jaccard, MinHashConfig,
    MinHashSignature, MinHasher,
};

#[derive(Debug, Error, PartialEq)]
pub enum DedupError {
    #[error("invalid dedup config: {0}")]
    Config(String),
    #[error("manual preference does not list extractor `{0}`")]
    MissingPreference(ExtractorId),
    #[error("manual preference lists `{0}` more than once")]
    RepeatedPreference(ExtractorId),
    #[error("dataset {dataset} contains page `{page}` twice")]
    DuplicatePage { dataset: usize, page: PageId },
    #[error("fraction {0} is outside (0, 1]")]
    Fraction(f64),
    #[error("dataset token count is zero")]
    ZeroDataset,
    #[error("union plan has no inputs")]
    NoInputs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Random { seed: u64 },
    Manual { preference: Vec<ExtractorId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionInput {
    pub dataset: String,
    pub extractor: ExtractorId,
    pub quality_threshold: f64,
    /// Documents for this input, as JSONL; relative to the plan file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionPlan {
    #[serde(default)]
    pub name: String,
    pub inputs: Vec<UnionInput>,
    pub strategy: Strategy,
    #[serde(default)]
    pub rededup: bool,
}

impl UnionPlan {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.inputs.is_empty() {
            return Err(DedupError::NoInputs);
        }
        if let Strategy::Manual { preference } = &self.strategy {
            check_preference(preference, self.inputs.iter().map(|i| &i.extractor))?;
        }
        Ok(())
    }
}

fn check_preference<'a>(
    preference: &[ExtractorId],
    used: impl Iterator<Item = &'a ExtractorId>,
) -> Result<BTreeMap<ExtractorId, usize>, DedupError> {
    let mut rank = BTreeMap::new();
    for (i, e) in preference.iter().enumerate() {
        if rank.insert(e.clone(), i).is_some() {
            return Err(DedupError::RepeatedPreference(e.clone()));
        }
    }
    let used: HashSet<&ExtractorId> = used.collect();
    for e in &used {
        if !rank.contains_key(*e) {
            return Err(DedupError::MissingPreference((*e).clone()));
        }
    }
    Ok(rank)
}

/// Uniform index in `0..n` from a 64-bit hash.
fn pick(hash: u64, n: usize) -> usize {
    ((u128::from(hash) * n as u128) >> 64) as usize
}

/// One document per page id across all datasets, sorted by page id.
pub fn union_merge(
    datasets: &[(ExtractorId, Vec<ExtractedDoc>)],
    strategy: &Strategy,
) -> Result<Vec<ExtractedDoc>, DedupError> {
    let rank = match strategy {
        Strategy::Manual { preference } => Some(check_preference(
            preference,
            datasets.iter().map(|(e, _)| e),
        )?),
        Strategy::Random { .. } => None,
    };
    let mut versions: BTreeMap<&PageId, Vec<(usize, &ExtractorId, &ExtractedDoc)>> =
        BTreeMap::new();
    for (d, (extractor, docs)) in datasets.iter().enumerate() {
        let mut seen = HashSet::new();
        for doc in docs {
            if !seen.insert(&doc.page_id) {
                return Err(DedupError::DuplicatePage {
                    dataset: d,
                    page: doc.page_id.clone(),
                });
            }
            versions
                .entry(&doc.page_id)
                .or_default()
                .push((d, extractor, doc));
        }
    }
    Ok(versions
        .into_iter()
        .map(|(id, mut candidates)| {
            let chosen = match (strategy, &rank) {
                (Strategy::Manual { .. }, Some(rank)) => candidates
                    .iter()
                    .min_by_key(|(d, e, _)| (rank[*e], *d))
                    .expect("non-empty"),
                (Strategy::Random { seed }, _) => {
                    // Independent of dataset order: candidates sorted by extractor, then text.
                    candidates.sort_by(|a, b| a.1.cmp(b.1).then_with(|| a.2.text.cmp(&b.2.text)));
                    &candidates[pick(
                        xxh3_64_with_seed(id.as_str().as_bytes(), *seed),
                        candidates.len(),
                    )]
                }
                _ => unreachable!("manual strategy always has ranks"),
            };
            chosen.2.clone()
        })
        .collect())
}

/// Union merge followed, if the plan asks for it, by fuzzy dedup of the
/// merged set. Inputs must already satisfy the plan's quality thresholds.
pub fn run_union(
    plan: &UnionPlan,
    datasets: &[(ExtractorId, Vec<ExtractedDoc>)],
    minhash: &MinHashConfig,
) -> Result<Vec<ExtractedDoc>, DedupError> {
    plan.validate()?;
    let merged = union_merge(datasets, &plan.strategy)?;
    if plan.rededup {
        fuzzy_dedup(merged, minhash)
    } else {
        Ok(merged)
    }
}

/// Uniform sample without replacement of `round(fraction × n)` documents,
/// kept in input order.
pub fn subsample(
    docs: Vec<ExtractedDoc>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<ExtractedDoc>, DedupError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DedupError::Fraction(fraction));
    }
    let n = docs.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    if k == n {
        return Ok(docs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        chosen[i] = true;
    }
    Ok(docs
        .into_iter()
        .zip(chosen)
        .filter_map(|(d, c)| c.then_some(d))
        .collect())
}

/// Training budget over dataset size, to one decimal.
pub fn compute_repeats(train_tokens: u64, dataset_tokens: u64) -> Result<f64, DedupError> {
    if dataset_tokens == 0 {
        return Err(DedupError::ZeroDataset);
    }
    Ok((train_tokens as f64 / dataset_tokens as f64 * 10.0).round() / 10.0)
}
