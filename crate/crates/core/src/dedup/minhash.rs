//! MinHash signatures over word shingles with LSH banding.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::DedupError;
use crate::classify::tokenize_words;
use crate::extract::ExtractedDoc;
use crate::warc::PageId;

/// Mersenne prime 2^61 - 1, the modulus of every permutation.
const PRIME: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinHashConfig {
    pub num_perm: usize,
    pub shingle_width: usize,
    pub bands: usize,
    pub rows: usize,
    pub verify_threshold: f64,
    pub seed: u64,
}

impl Default for MinHashConfig {
    fn default() -> Self {
        MinHashConfig {
            num_perm: 128,
            shingle_width: 5,
            bands: 16,
            rows: 8,
            verify_threshold: 0.7,
            seed: 0,
        }
    }
}

impl MinHashConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        let bad = |m: &str| Err(DedupError::Config(m.to_string()));
        if self.num_perm == 0 || self.shingle_width == 0 || self.bands == 0 || self.rows == 0 {
            return bad("num_perm, shingle_width, bands and rows must be positive");
        }
        if self.bands * self.rows > self.num_perm {
            return bad("bands × rows exceeds num_perm");
        }
        if !(0.0..=1.0).contains(&self.verify_threshold) {
            return bad("verify_threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub page_id: PageId,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// Fraction of coordinates on which the two signatures agree.
    pub fn jaccard(&self, other: &MinHashSignature) -> f64 {
        let n = self.values.len().min(other.values.len());
        if n == 0 {
            return 0.0;
        }
        let same = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / n as f64
    }
}

/// Hashes of the distinct `width`-word shingles of `text`. Words are
/// lower-cased counting-tokenizer tokens; a text shorter than `width`
/// yields one shingle of everything it has.
pub fn shingles(text: &str, width: usize) -> BTreeSet<u64> {
    let words: Vec<String> = tokenize_words(text)
        .into_iter()
        .map(str::to_lowercase)
        .collect();
    let hash = |ws: &[String]| xxh3_64(ws.join(" ").as_bytes());
    if words.len() < width {
        return BTreeSet::from([hash(&words)]);
    }
    words.windows(width).map(hash).collect()
}

/// Exact Jaccard similarity of two shingle sets.
pub fn true_jaccard(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// The `(a, b)` coefficients of the universal-hash permutations.
#[derive(Debug, Clone)]
pub struct MinHasher {
    config: MinHashConfig,
    coefficients: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(config: MinHashConfig) -> Result<Self, DedupError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let coefficients = (0..config.num_perm)
            .map(|_| (rng.gen_range(1..PRIME), rng.gen_range(0..PRIME)))
            .collect();
        Ok(MinHasher {
            config,
            coefficients,
        })
    }

    pub fn config(&self) -> &MinHashConfig {
        &self.config
    }

    fn permute(&self, (a, b): (u64, u64), x: u64) -> u64 {
        ((u128::from(a) * u128::from(x % PRIME) + u128::from(b)) % u128::from(PRIME)) as u64
    }

    pub fn signature_of_text(&self, page_id: PageId, text: &str) -> MinHashSignature {
        let set = shingles(text, self.config.shingle_width);
        let values = self
            .coefficients
            .iter()
            .map(|&c| {
                set.iter()
                    .map(|&x| self.permute(c, x))
                    .min()
                    .unwrap_or(u64::MAX)
            })
            .collect();
        MinHashSignature { page_id, values }
    }

    pub fn signature(&self, doc: &ExtractedDoc) -> MinHashSignature {
        self.signature_of_text(doc.page_id.clone(), &doc.text)
    }
}

pub fn minhash_signature(
    doc: &ExtractedDoc,
    config: &MinHashConfig,
) -> Result<MinHashSignature, DedupError> {
    Ok(MinHasher::new(*config)?.signature(doc))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Near-duplicate clusters as sorted index lists, singletons included,
/// ordered by their first index.
pub fn clusters(
    docs: &[ExtractedDoc],
    config: &MinHashConfig,
) -> Result<Vec<Vec<usize>>, DedupError> {
    let hasher = MinHasher::new(*config)?;
    let sigs: Vec<MinHashSignature> = docs.par_iter().map(|d| hasher.signature(d)).collect();
    let mut uf = UnionFind::new(docs.len());
    for band in 0..config.bands {
        let range = band * config.rows..(band + 1) * config.rows;
        let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for (i, s) in sigs.iter().enumerate() {
            buckets.entry(&s.values[range.clone()]).or_default().push(i);
        }
        let mut groups: Vec<Vec<usize>> = buckets.into_values().filter(|g| g.len() > 1).collect();
        groups.sort_unstable();
        for group in groups {
            for (x, &i) in group.iter().enumerate() {
                for &j in &group[x + 1..] {
                    if uf.find(i) != uf.find(j)
                        && sigs[i].jaccard(&sigs[j]) >= config.verify_threshold
                    {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..docs.len() {
        by_root.entry(uf.find(i)).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    out.sort_unstable_by_key(|c| c[0]);
    Ok(out)
}

/// Keeps one document per near-duplicate cluster, the one with the
/// smallest page id. Survivors stay in input order.
pub fn fuzzy_dedup(
    docs: Vec<ExtractedDoc>,
    config: &MinHashConfig,
) -> Result<Vec<ExtractedDoc>, DedupError> {
    let mut keep = vec![false; docs.len()];
    for cluster in clusters(&docs, config)? {
        let survivor = cluster
            .iter()
            .copied()
            .min_by(|&a, &b| docs[a].page_id.cmp(&docs[b].page_id).then(a.cmp(&b)))
            .expect("clusters are non-empty");
        keep[survivor] = true;
    }
    Ok(docs
        .into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect())
}
