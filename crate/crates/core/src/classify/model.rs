//! Hashed bag-of-n-grams with a multinomial logistic output layer.
//!
//! Each text becomes a sparse vector: every n-gram of token keys (orders 1
//! through `n_max`) is hashed into one of `bucket_count` buckets, counts are
//! accumulated and the vector is L2-normalised. Class scores are a softmax
//! over `x · W` (no bias, so a featureless text scores uniformly).
//!
//! Training is plain SGD on the weighted cross-entropy with iterate
//! averaging; the returned weights are the average of every SGD iterate.
//! Example order is reshuffled each epoch by a ChaCha8 generator seeded
//! from the config, so a fixed seed and input order give identical weights.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::{xxh3_64, xxh3_64_with_seed};

use super::bpe::BpeVocab;
use super::tokenize::tokenize_words;

const MAGIC: &[u8; 4] = b"NGLM";
const VERSION: u32 = 1;
/// Upper bound on `bucket_count`, keeping the dense matrix allocatable.
pub const MAX_BUCKETS: u64 = 1 << 26;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data has {0} distinct label(s); at least 2 are required")]
    TooFewClasses(usize),
    #[error("example {index} has non-positive or non-finite weight")]
    BadWeight { index: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("model has no label `{0}`")]
    UnknownLabel(String),
    #[error("model is untrained")]
    Untrained,
    #[error("model file: {0}")]
    Format(String),
    #[error("model needs the subword vocabulary with digest {0}")]
    VocabMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl LabeledExample {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        LabeledExample {
            text: text.into(),
            label: label.into(),
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_max: u32,
    pub bucket_count: u64,
    pub epochs: u32,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_max: 2,
            bucket_count: 1 << 21,
            epochs: 5,
            lr: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.n_max == 0 {
            return Err(ModelError::Config("n_max must be at least 1".into()));
        }
        if self.bucket_count == 0 || self.bucket_count > MAX_BUCKETS {
            return Err(ModelError::Config(format!(
                "bucket_count must be in 1..={MAX_BUCKETS}"
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config("lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub labels: Vec<String>,
    /// Weighted mean cross-entropy of the averaged model over the training set.
    pub final_loss: f64,
}

/// How text is turned into token keys before n-gram hashing.
#[derive(Debug, Clone)]
pub enum Tokenizer {
    /// Lower-cased [`tokenize_words`] tokens.
    Word,
    /// Byte-level BPE ids under a loaded vocabulary.
    Subword(Arc<BpeVocab>),
}

impl Tokenizer {
    fn keys(&self, text: &str) -> Vec<u64> {
        match self {
            Tokenizer::Word => tokenize_words(text)
                .into_iter()
                .map(|t| xxh3_64(t.to_lowercase().as_bytes()))
                .collect(),
            Tokenizer::Subword(vocab) => vocab.encode(text).into_iter().map(u64::from).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Tokenizer::Word => "word",
            Tokenizer::Subword(_) => "subword",
        }
    }
}

/// Hash of the n-gram `keys`, salted by its order.
fn ngram_hash(keys: &[u64]) -> u64 {
    keys.iter().fold(keys.len() as u64, |h, k| {
        xxh3_64_with_seed(&k.to_le_bytes(), h)
    })
}

/// Sparse L2-normalised feature vector, sorted by bucket.
pub fn featurize(
    tokenizer: &Tokenizer,
    text: &str,
    n_max: u32,
    bucket_count: u64,
) -> Vec<(u64, f64)> {
    let keys = tokenizer.keys(text);
    let mut counts: HashMap<u64, f64> = HashMap::new();
    for n in 1..=n_max as usize {
        for gram in keys.windows(n) {
            *counts.entry(ngram_hash(gram) % bucket_count).or_default() += 1.0;
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let mut feats: Vec<(u64, f64)> = counts.into_iter().map(|(b, c)| (b, c / norm)).collect();
    feats.sort_unstable_by_key(|&(b, _)| b);
    feats
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone)]
pub struct NGramLinearModel {
    n_max: u32,
    bucket_count: u64,
    labels: Vec<String>,
    /// Row-major `[bucket_count × labels.len()]`.
    weights: Vec<f32>,
    tokenizer: Tokenizer,
    seed: u64,
    epochs: u32,
}

impl NGramLinearModel {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn bucket_count(&self) -> u64 {
        self.bucket_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epochs(&self) -> u32 {
        self.epochs
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Models trained for zero epochs have all-zero weights.
    pub fn is_trained(&self) -> bool {
        self.epochs > 0
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn featurize(&self, text: &str) -> Vec<(u64, f64)> {
        featurize(&self.tokenizer, text, self.n_max, self.bucket_count)
    }

    fn scores_for(&self, feats: &[(u64, f64)]) -> Vec<f64> {
        let k = self.labels.len();
        let mut z = vec![0.0; k];
        for &(b, x) in feats {
            let row = &self.weights[b as usize * k..(b as usize + 1) * k];
            for (zc, &w) in z.iter_mut().zip(row) {
                *zc += x * f64::from(w);
            }
        }
        softmax_in_place(&mut z);
        z
    }

    /// Class probabilities in label order.
    pub fn predict(&self, text: &str) -> Vec<f64> {
        self.scores_for(&self.featurize(text))
    }

    /// Probability of `label`.
    pub fn score(&self, text: &str, label: &str) -> Result<f64, ModelError> {
        let i = self
            .label_index(label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))?;
        Ok(self.predict(text)[i])
    }

    /// A trained model's probability for one fixed label.
    pub fn scorer(&self, label: &str) -> Result<ClassScorer<'_>, ModelError> {
        if !self.is_trained() {
            return Err(ModelError::Untrained);
        }
        let class = self
            .label_index(label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))?;
        Ok(ClassScorer { model: self, class })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<(), ModelError> {
        let k = self.labels.len();
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(VERSION)?;
        out.write_u32::<LittleEndian>(self.n_max)?;
        out.write_u64::<LittleEndian>(self.bucket_count)?;
        out.write_u32::<LittleEndian>(k as u32)?;
        out.write_u64::<LittleEndian>(self.seed)?;
        out.write_u32::<LittleEndian>(self.epochs)?;
        match &self.tokenizer {
            Tokenizer::Word => out.write_u8(0)?,
            Tokenizer::Subword(vocab) => {
                out.write_u8(1)?;
                out.write_all(&vocab.digest())?;
            }
        }
        for label in &self.labels {
            out.write_u32::<LittleEndian>(label.len() as u32)?;
            out.write_all(label.as_bytes())?;
        }
        // Only rows with a non-zero entry are stored.
        let rows: Vec<usize> = (0..self.bucket_count as usize)
            .filter(|&b| self.weights[b * k..(b + 1) * k].iter().any(|&w| w != 0.0))
            .collect();
        out.write_u64::<LittleEndian>(rows.len() as u64)?;
        for b in rows {
            out.write_u64::<LittleEndian>(b as u64)?;
            for &w in &self.weights[b * k..(b + 1) * k] {
                out.write_f32::<LittleEndian>(w)?;
            }
        }
        Ok(())
    }

    /// Loads a model file. Subword models need the vocabulary they were
    /// trained with; its digest is checked.
    pub fn load(path: impl AsRef<Path>, vocab: Option<Arc<BpeVocab>>) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice(), vocab)
    }

    pub fn read_from(
        input: &mut impl Read,
        vocab: Option<Arc<BpeVocab>>,
    ) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Format(m.to_string());
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(ModelError::Format(format!("unsupported version {version}")));
        }
        let n_max = input.read_u32::<LittleEndian>()?;
        let bucket_count = input.read_u64::<LittleEndian>()?;
        let k = input.read_u32::<LittleEndian>()? as usize;
        let seed = input.read_u64::<LittleEndian>()?;
        let epochs = input.read_u32::<LittleEndian>()?;
        if n_max == 0 || bucket_count == 0 || bucket_count > MAX_BUCKETS || !(2..=1024).contains(&k)
        {
            return Err(bad("header out of range"));
        }
        let tokenizer = match input.read_u8()? {
            0 => Tokenizer::Word,
            1 => {
                let mut digest = [0u8; 32];
                input.read_exact(&mut digest)?;
                match vocab {
                    Some(v) if v.digest() == digest => Tokenizer::Subword(v),
                    _ => return Err(ModelError::VocabMismatch(hex::encode(digest))),
                }
            }
            _ => return Err(bad("unknown tokenizer")),
        };
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            let len = input.read_u32::<LittleEndian>()? as usize;
            if len > 4096 {
                return Err(bad("label too long"));
            }
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf)?;
            labels.push(String::from_utf8(buf).map_err(|_| bad("label is not UTF-8"))?);
        }
        if labels.iter().collect::<BTreeSet<_>>().len() != k {
            return Err(bad("duplicate labels"));
        }
        let mut weights = vec![0f32; bucket_count as usize * k];
        let rows = input.read_u64::<LittleEndian>()?;
        let mut last: Option<u64> = None;
        for _ in 0..rows {
            let b = input.read_u64::<LittleEndian>()?;
            if b >= bucket_count || last.is_some_and(|l| b <= l) {
                return Err(bad("row index out of order or range"));
            }
            last = Some(b);
            for w in &mut weights[b as usize * k..(b as usize + 1) * k] {
                *w = input.read_f32::<LittleEndian>()?;
            }
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(NGramLinearModel {
            n_max,
            bucket_count,
            labels,
            weights,
            tokenizer,
            seed,
            epochs,
        })
    }
}

/// Anything that maps text to a score in `[0, 1]`.
pub trait Scorer: Sync {
    fn score(&self, text: &str) -> f64;
}

impl<F: Fn(&str) -> f64 + Sync> Scorer for F {
    fn score(&self, text: &str) -> f64 {
        self(text)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassScorer<'a> {
    model: &'a NGramLinearModel,
    class: usize,
}

impl ClassScorer<'_> {
    pub fn label(&self) -> &str {
        &self.model.labels[self.class]
    }
}

impl Scorer for ClassScorer<'_> {
    fn score(&self, text: &str) -> f64 {
        self.model.predict(text)[self.class]
    }
}

/// Sparse features, class index and example weight.
type Row = (Vec<(usize, f64)>, usize, f64);

/// Trains a model. Labels are the sorted set of example labels.
pub fn train(
    examples: &[LabeledExample],
    config: &TrainConfig,
    tokenizer: Tokenizer,
) -> Result<(NGramLinearModel, TrainReport), ModelError> {
    config.validate()?;
    let labels: Vec<String> = examples
        .iter()
        .map(|e| e.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() < 2 {
        return Err(ModelError::TooFewClasses(labels.len()));
    }
    if let Some(index) = examples
        .iter()
        .position(|e| !(e.weight.is_finite() && e.weight > 0.0))
    {
        return Err(ModelError::BadWeight { index });
    }
    let k = labels.len();
    let index_of: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    // Compact the touched buckets into dense rows for training.
    let mut row_of: HashMap<u64, usize> = HashMap::new();
    let mut buckets: Vec<u64> = Vec::new();
    let data: Vec<Row> = examples
        .iter()
        .map(|e| {
            let feats = featurize(&tokenizer, &e.text, config.n_max, config.bucket_count)
                .into_iter()
                .map(|(b, x)| {
                    let r = *row_of.entry(b).or_insert_with(|| {
                        buckets.push(b);
                        buckets.len() - 1
                    });
                    (r, x)
                })
                .collect();
            (feats, index_of[e.label.as_str()], e.weight)
        })
        .collect();

    let mut w = vec![0f64; buckets.len() * k];
    // Sum of (step index × update); the average iterate is w - u / steps.
    let mut u = vec![0f64; buckets.len() * k];
    let mut steps = 0f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut z = vec![0f64; k];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, y, weight) = &data[i];
            z.iter_mut().for_each(|v| *v = 0.0);
            for &(r, x) in feats {
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc += x * w[r * k + c];
                }
            }
            softmax_in_place(&mut z);
            for (c, zc) in z.iter_mut().enumerate() {
                let target = if c == *y { 1.0 } else { 0.0 };
                *zc = config.lr * weight * (*zc - target);
            }
            for &(r, x) in feats {
                for (c, g) in z.iter().enumerate() {
                    let delta = -g * x;
                    w[r * k + c] += delta;
                    u[r * k + c] += steps * delta;
                }
            }
            steps += 1.0;
        }
    }

    let mut weights = vec![0f32; config.bucket_count as usize * k];
    if steps > 0.0 {
        for (r, &b) in buckets.iter().enumerate() {
            for c in 0..k {
                weights[b as usize * k + c] = (w[r * k + c] - u[r * k + c] / steps) as f32;
            }
        }
    }
    let model = NGramLinearModel {
        n_max: config.n_max,
        bucket_count: config.bucket_count,
        labels: labels.clone(),
        weights,
        tokenizer,
        seed: config.seed,
        epochs: config.epochs,
    };

    let mut loss = 0.0;
    let mut total = 0.0;
    for (e, (_, y, weight)) in examples.iter().zip(&data) {
        let p = model.scores_for(&model.featurize(&e.text));
        loss -= weight * p[*y].max(f64::MIN_POSITIVE).ln();
        total += weight;
    }
    let report = TrainReport {
        examples: examples.len(),
        labels,
        final_loss: if total > 0.0 { loss / total } else { 0.0 },
    };
    Ok((model, report))
}

pub const ENGLISH_LABEL: &str = "en";

/// `P(en)` under a language-ID model.
pub fn language_score(model: &NGramLinearModel, text: &str) -> Result<f64, ModelError> {
    model.score(text, ENGLISH_LABEL)
}
