#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use corpus_core::classify::{
    train, BpeVocab, LabeledExample, NGramLinearModel, Tokenizer, TrainConfig,
};
use corpus_core::extract::{ExtractedDoc, ExtractorId};
use corpus_core::filters::{BlockView, DomainLabels, UrlLabelRules};
use corpus_core::html::{PreBlock, TableCandidate};
use corpus_core::pipeline::training::{code_examples, table_examples};
use corpus_core::pipeline::{PagePipeline, PipelineConfig};
use corpus_core::warc::{read_warc, PageId, RawPage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

const CODE_WORDS: &[&str] = &[
    "int", "return", "void", "struct", "fn", "let", "mut", "while", "for", "if", "else", "class",
    "def", "import", "const", "static", "public", "private", "null", "true", "false", "printf",
    "malloc", "self", "async", "await", "match", "enum", "impl", "try", "catch", "throw", "switch",
    "case", "break",
];
const LYRIC_WORDS: &[&str] = &[
    "love", "heart", "baby", "tonight", "dance", "dream", "forever", "kiss", "tears", "rain",
    "moon", "night", "fire", "soul", "sky", "hold", "cry", "sweet", "darling", "song", "sing",
    "yeah", "oh", "shine", "lonely", "dreams", "arms", "stars", "goodbye", "remember", "alone",
    "falling", "hearts",
];
/// Words shared by both classes, carrying no signal.
const FILLER: &[&str] = &[
    "the", "a", "and", "to", "of", "in", "it", "is", "on", "with", "my", "you",
];

fn doc(rng: &mut ChaCha8Rng, vocab: &[&str]) -> String {
    let len = rng.gen_range(15..40);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.4) {
                *FILLER.choose(rng).unwrap()
            } else {
                *vocab.choose(rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two-class corpus: `code` docs draw from code keywords, `lyrics` docs
/// from song words, both padded with shared filler.
pub fn separable_corpus(seed: u64, per_class: usize) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        out.push(LabeledExample::new(doc(&mut rng, CODE_WORDS), "code"));
        out.push(LabeledExample::new(doc(&mut rng, LYRIC_WORDS), "lyrics"));
    }
    out
}

pub fn accuracy(model: &NGramLinearModel, examples: &[LabeledExample]) -> f64 {
    let correct = examples
        .iter()
        .filter(|e| {
            let p = model.predict(&e.text);
            let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            model.labels()[best] == e.label
        })
        .count();
    correct as f64 / examples.len() as f64
}

pub fn small_config() -> TrainConfig {
    TrainConfig {
        bucket_count: 1 << 16,
        ..TrainConfig::default()
    }
}

/// `en` vs `other` model trained on the bundled bilingual lines.
pub fn language_model() -> NGramLinearModel {
    let mut examples = Vec::new();
    for line in read_fixture("lang/en.txt").lines() {
        examples.push(LabeledExample::new(line, "en"));
    }
    for line in read_fixture("lang/fr.txt").lines() {
        examples.push(LabeledExample::new(line, "other"));
    }
    let config = TrainConfig {
        epochs: 20,
        ..small_config()
    };
    train(&examples, &config, Tokenizer::Word).unwrap().0
}

pub fn crawl_inputs() -> Vec<PathBuf> {
    vec![
        fixture("crawl/crawl-0.warc.gz"),
        fixture("crawl/crawl-1.warc.gz"),
    ]
}

pub fn crawl_pages() -> Vec<RawPage> {
    let mut pages = Vec::new();
    for path in crawl_inputs() {
        let file = std::io::BufReader::new(std::fs::File::open(path).unwrap());
        pages.extend(read_warc(file).unwrap().0);
    }
    pages
}

pub struct ModelFiles {
    pub vocab: PathBuf,
    pub table: PathBuf,
    pub code_html: PathBuf,
    pub code_text: PathBuf,
    pub lang: PathBuf,
    pub quality: PathBuf,
}

/// Trains every pipeline model on the fixture crawl and writes it to `dir`.
pub fn write_models(dir: &Path) -> ModelFiles {
    let vocab_path = fixture("test-vocab.tiktoken");
    let vocab = Arc::new(BpeVocab::load(&vocab_path).unwrap());
    let pages = crawl_pages();
    let config = TrainConfig {
        epochs: 10,
        ..small_config()
    };
    let fit = |examples: &[LabeledExample], tok: Tokenizer, name: &str| {
        let path = dir.join(name);
        train(examples, &config, tok)
            .unwrap()
            .0
            .save(&path)
            .unwrap();
        path
    };
    let table = fit(
        &table_examples(&pages, &UrlLabelRules::default()),
        Tokenizer::Subword(vocab.clone()),
        "table.nglm",
    );
    let domains = DomainLabels::parse(&read_fixture("crawl/domains.tsv")).unwrap();
    let code_html = fit(
        &code_examples(&pages, &domains, BlockView::Html),
        Tokenizer::Subword(vocab.clone()),
        "code-html.nglm",
    );
    let code_text = fit(
        &code_examples(&pages, &domains, BlockView::Text),
        Tokenizer::Word,
        "code-text.nglm",
    );
    let lang = dir.join("lang.nglm");
    language_model().save(&lang).unwrap();
    let mut quality_examples: Vec<LabeledExample> = read_fixture("lang/en.txt")
        .lines()
        .map(|l| LabeledExample::new(l, "hq"))
        .collect();
    quality_examples.extend(
        separable_corpus(3, 32)
            .into_iter()
            .map(|e| LabeledExample::new(e.text, "lq")),
    );
    let quality = fit(&quality_examples, Tokenizer::Word, "quality.nglm");
    ModelFiles {
        vocab: vocab_path,
        table,
        code_html,
        code_text,
        lang,
        quality,
    }
}

/// The fixture crawl through the table pipeline with language and quality
/// filters, writing to `dir/out`.
pub fn table_pipeline_config(dir: &Path, models: &ModelFiles) -> PipelineConfig {
    let mut config =
        PipelineConfig::from_toml("inputs = []\noutput_dir = \"out\"\nshard_size = 8\n").unwrap();
    config.inputs = crawl_inputs();
    config.output_dir = dir.join("out");
    config.reports.min_pages = 2;
    let f = &mut config.filters;
    f.pipeline = PagePipeline::Tables;
    f.vocab = Some(models.vocab.clone());
    f.table_model = Some(models.table.clone());
    f.lang_model = Some(models.lang.clone());
    f.quality_model = Some(models.quality.clone());
    config
}

/// A table with random header, row count and per-row cell counts, biased
/// towards the structural thresholds.
pub fn random_table(rng: &mut ChaCha8Rng) -> TableCandidate {
    let n_rows = rng.gen_range(0..16);
    let base = rng.gen_range(1..6);
    let column_counts: Vec<usize> = (0..n_rows)
        .map(|_| {
            if rng.gen_bool(0.15) {
                rng.gen_range(1..6)
            } else {
                base
            }
        })
        .collect();
    TableCandidate {
        table_html: format!("<table id=\"{}\"></table>", rng.gen::<u32>()),
        n_rows,
        column_counts,
        has_header: rng.gen_bool(0.8),
        source_page: PageId::from_joined("random"),
    }
}

/// The three structural rules evaluated directly.
pub fn structural_oracle(t: &TableCandidate) -> bool {
    let consistent = t.column_counts.windows(2).all(|w| w[0] == w[1]);
    let max_cols = t.column_counts.iter().copied().max().unwrap_or(0);
    t.has_header && consistent && t.n_rows >= 10 && max_cols >= 3
}

pub fn pre_block(i: usize) -> PreBlock {
    PreBlock {
        pre_html: format!("<pre>{i}</pre>"),
        visible_text: i.to_string(),
        has_code_child: false,
        source_page: PageId::from_joined("random"),
    }
}

pub fn make_doc(id: &str, extractor: &str, text: &str) -> ExtractedDoc {
    ExtractedDoc::new(
        PageId::from_joined(id),
        ExtractorId::new(extractor),
        format!("https://{id}.example/"),
        text.to_string(),
    )
}

/// Three datasets over a shared id pool, one per builtin extractor.
pub fn random_triple(rng: &mut ChaCha8Rng) -> Vec<(ExtractorId, Vec<ExtractedDoc>)> {
    let pool = rng.gen_range(1..=700);
    ExtractorId::builtins()
        .into_iter()
        .map(|e| {
            let n = rng.gen_range(0..=pool.min(500));
            let ids = rand::seq::index::sample(rng, pool, n);
            let docs = ids
                .iter()
                .map(|i| make_doc(&format!("p{i:04}"), e.as_str(), &format!("{e} {i}")))
                .collect();
            (e, docs)
        })
        .collect()
}

const WORDS: [&str; 40] = [
    "river", "stone", "lamp", "cloud", "orbit", "garden", "signal", "copper", "maple", "harbor",
    "window", "engine", "meadow", "silver", "bridge", "candle", "forest", "rocket", "island",
    "marble", "thunder", "violet", "canyon", "pepper", "saddle", "lantern", "glacier", "falcon",
    "quartz", "velvet", "tunnel", "ember", "walnut", "compass", "beacon", "cobalt", "prairie",
    "anchor", "timber", "summit",
];

pub fn random_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

/// A document and a copy with a random share of its words replaced, so the
/// true shingle overlap spans the whole range.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (String, String) {
    let n = rng.gen_range(20..200);
    let a = random_words(rng, n);
    let p: f64 = rng.gen_range(0.0..0.5);
    let b: Vec<&str> = a
        .iter()
        .map(|w| {
            if rng.gen_bool(p) {
                *WORDS.choose(rng).unwrap()
            } else {
                *w
            }
        })
        .collect();
    (a.join(" "), b.join(" "))
}

/// Two near-duplicate pages x1, x2 seen through extractors e1, e2, where
/// each extractor's dedup kept a different page. Returns
/// (full e1 set, full e2 set, e1 after dedup, e2 after dedup).
pub type Datasets = Vec<ExtractedDoc>;

pub fn rededup_scenario() -> (Datasets, Datasets, Datasets, Datasets) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let body = random_words(&mut rng, 80).join(" ");
    let x1 = format!("{body} alpha");
    let x2 = format!("{body} omega");
    let fillers: Vec<String> = (0..4)
        .map(|_| random_words(&mut rng, 60).join(" "))
        .collect();
    let view = |e: &str, text: &str| match e {
        "e1" => text.to_string(),
        _ => format!("{text} footer"),
    };
    let full = |e: &str| {
        let mut docs = vec![
            make_doc("x1", e, &view(e, &x1)),
            make_doc("x2", e, &view(e, &x2)),
        ];
        docs.extend(
            fillers
                .iter()
                .enumerate()
                .map(|(i, t)| make_doc(&format!("f{i}"), e, &view(e, t))),
        );
        docs
    };
    let (e1, e2) = (full("e1"), full("e2"));
    let without = |docs: &[ExtractedDoc], drop: &str| -> Vec<ExtractedDoc> {
        docs.iter()
            .filter(|d| d.page_id.as_str() != drop)
            .cloned()
            .collect()
    };
    let (k1, k2) = (without(&e1, "x1"), without(&e2, "x2"));
    (e1, e2, k1, k2)
}

/// Random sets drawn from a small universe, two or three of them.
pub fn random_sets(rng: &mut ChaCha8Rng) -> Vec<BTreeSet<u32>> {
    let k = rng.gen_range(2..=3);
    let universe = rng.gen_range(1..60);
    (0..k)
        .map(|_| (0..universe).filter(|_| rng.gen_bool(0.4)).collect())
        .collect()
}

/// Cell counts by membership mask, computed item by item.
pub fn venn_oracle(sets: &[BTreeSet<u32>]) -> (Vec<usize>, usize, f64) {
    let all: BTreeSet<u32> = sets.iter().flatten().copied().collect();
    let mut cells = vec![0; 1 << sets.len()];
    for x in &all {
        let mask: usize = sets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(x))
            .map(|(i, _)| 1 << i)
            .sum();
        cells[mask] += 1;
    }
    let unique: usize = (0..sets.len()).map(|i| cells[1 << i]).sum();
    let frac = if all.is_empty() {
        0.0
    } else {
        unique as f64 / all.len() as f64
    };
    (cells[1..].to_vec(), all.len(), frac)
}

/// URL groups per extractor with their expected registrable domains.
pub fn random_url_groups(rng: &mut ChaCha8Rng) -> Vec<(ExtractorId, Vec<(String, String)>)> {
    let suffixes = ["com", "org", "co.uk", "com.au"];
    ExtractorId::builtins()
        .into_iter()
        .map(|e| {
            let n = rng.gen_range(0..120);
            let urls = (0..n)
                .map(|_| {
                    let site = format!(
                        "site{}.{}",
                        rng.gen_range(0..8),
                        suffixes.choose(rng).unwrap()
                    );
                    let sub = ["", "www.", "blog.", "a.b."].choose(rng).unwrap();
                    (format!("https://{sub}{site}/p/{}", rng.gen::<u16>()), site)
                })
                .collect();
            (e, urls)
        })
        .collect()
}

/// (domain, total, max share) for domains with at least `min_pages` pages.
pub fn imbalance_oracle(
    groups: &[(ExtractorId, Vec<(String, String)>)],
    min_pages: usize,
) -> Vec<(String, usize, f64)> {
    let domains: BTreeSet<&String> = groups
        .iter()
        .flat_map(|(_, u)| u.iter().map(|(_, d)| d))
        .collect();
    domains
        .into_iter()
        .filter_map(|d| {
            let counts: Vec<usize> = groups
                .iter()
                .map(|(_, u)| u.iter().filter(|(_, x)| x == d).count())
                .collect();
            let total: usize = counts.iter().sum();
            (total >= min_pages).then(|| {
                (
                    d.clone(),
                    total,
                    *counts.iter().max().unwrap() as f64 / total as f64,
                )
            })
        })
        .collect()
}
