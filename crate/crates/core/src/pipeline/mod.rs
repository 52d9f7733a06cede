//! End-to-end runs driven by one TOML config.
//!
//! Stages run in a fixed order: `ingest`, `extract`, `filter`, `dedup`,
//! `union`, `report`. Each writes JSONL shards under its own directory of
//! the output root and is recorded in `manifest.json` together with the
//! SHA-256 of every shard, input archive and model file. Paths in the
//! manifest are relative and nothing in it depends on the clock or on the
//! worker count, so identical inputs give a byte-identical manifest.
//!
//! The whole config is validated, and every model loaded, before the first
//! stage starts. When a stage fails its partial outputs are listed with
//! status `invalid`, later stages are `not_run`, and the manifest is still
//! written.

pub mod io;
pub mod training;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{BpeVocab, NGramLinearModel, Scorer, ENGLISH_LABEL};
use crate::dedup::{fuzzy_dedup, union_merge, MinHashConfig, Strategy, UnionInput, UnionPlan};
use crate::extract::{
    stopwords, BlockParams, BlockStopword, ExtractedDoc, ExtractorId, ExtractorRegistry,
    MarkdownTable, WhitespaceTable,
};
use crate::filters::{
    code_page_filter, english_filter, quality_filter, table_pipeline, FilterDecision, CODE_LABEL,
    CODE_THRESHOLD, ENGLISH_THRESHOLD, POSITIVE_LABEL, QUALITY_LABEL, QUALITY_THRESHOLDS,
    TABLE_THRESHOLD,
};
use crate::html::{build_dom, find_pre_blocks, find_tables};
use crate::report::{
    domain_imbalance, venn_report, yield_report, CorpusReport, DatasetTokens, ImbalanceConfig,
};
use crate::warc::{PageId, RawPage, WarcReader};
use io::{sha256_file, write_bytes, write_shards, ShardInfo};

pub const STAGES: [&str; 6] = ["ingest", "extract", "filter", "dedup", "union", "report"];
pub const MANIFEST_FORMAT: &str = "corpus-manifest/1";
pub const UNION_DATASET: &str = "union";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PagePipeline {
    /// No page-level content filter.
    #[default]
    None,
    Tables,
    Code,
}

fn default_shard_size() -> usize {
    1000
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub extractors: Vec<ExtractorId>,
    /// Stopword list for `block_stopword`, one word per line.
    pub stopwords: Option<PathBuf>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            extractors: ExtractorId::builtins().to_vec(),
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub pipeline: PagePipeline,
    pub table_threshold: f64,
    pub code_threshold: f64,
    pub english_threshold: f64,
    /// Quality threshold for extractors without an entry in `quality_thresholds`.
    pub quality_threshold: f64,
    pub quality_thresholds: BTreeMap<ExtractorId, f64>,
    /// Subword vocabulary for the table and code-HTML models.
    pub vocab: Option<PathBuf>,
    pub table_model: Option<PathBuf>,
    pub code_html_model: Option<PathBuf>,
    pub code_text_model: Option<PathBuf>,
    pub lang_model: Option<PathBuf>,
    pub quality_model: Option<PathBuf>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            pipeline: PagePipeline::None,
            table_threshold: TABLE_THRESHOLD,
            code_threshold: CODE_THRESHOLD,
            english_threshold: ENGLISH_THRESHOLD,
            quality_threshold: QUALITY_THRESHOLDS[0],
            quality_thresholds: BTreeMap::new(),
            vocab: None,
            table_model: None,
            code_html_model: None,
            code_text_model: None,
            lang_model: None,
            quality_model: None,
        }
    }
}

impl FilterConfig {
    pub fn quality_threshold_for(&self, extractor: &ExtractorId) -> f64 {
        self.quality_thresholds
            .get(extractor)
            .copied()
            .unwrap_or(self.quality_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    /// Per-extractor fuzzy dedup before the union.
    pub fuzzy: bool,
    pub minhash: MinHashConfig,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            fuzzy: true,
            minhash: MinHashConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnionConfig {
    /// Defaults to a manual preference in `extract.extractors` order.
    pub strategy: Option<Strategy>,
    pub rededup: bool,
}

impl Default for UnionConfig {
    fn default() -> Self {
        UnionConfig {
            strategy: None,
            rededup: yes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Dataset the yields are relative to; defaults to the first extractor.
    pub baseline: Option<String>,
    pub min_pages: usize,
    pub bin_width: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        let d = ImbalanceConfig::default();
        ReportConfig {
            baseline: None,
            min_pages: d.min_pages,
            bin_width: d.bin_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_shard_size")]
    pub shard_size: usize,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub union: UnionConfig,
    #[serde(default)]
    pub reports: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths in it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.inputs.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        let f = &mut self.filters;
        for p in [
            &mut self.extract.stopwords,
            &mut f.vocab,
            &mut f.table_model,
            &mut f.code_html_model,
            &mut f.code_text_model,
            &mut f.lang_model,
            &mut f.quality_model,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.union
            .strategy
            .clone()
            .unwrap_or_else(|| Strategy::Manual {
                preference: self.extract.extractors.clone(),
            })
    }

    pub fn baseline(&self) -> String {
        self.reports.baseline.clone().unwrap_or_else(|| {
            self.extract
                .extractors
                .first()
                .map(|e| e.to_string())
                .unwrap_or_default()
        })
    }

    /// The union step expressed as a plan, thresholds filled in.
    pub fn union_plan(&self) -> UnionPlan {
        let thresholds: Vec<String> = self
            .extract
            .extractors
            .iter()
            .map(|e| format!("{}", self.filters.quality_threshold_for(e)))
            .collect();
        UnionPlan {
            name: format!("Union ({})", thresholds.join(", ")),
            inputs: self
                .extract
                .extractors
                .iter()
                .map(|e| UnionInput {
                    dataset: e.to_string(),
                    extractor: e.clone(),
                    quality_threshold: self.filters.quality_threshold_for(e),
                    path: None,
                })
                .collect(),
            strategy: self.strategy(),
            rededup: self.union.rededup,
        }
    }

    /// Checks everything that can be checked without doing work, loading
    /// every referenced model and vocabulary.
    pub fn validate(&self) -> Result<Resources, PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        if self.inputs.is_empty() {
            return bad("no inputs".into());
        }
        for p in &self.inputs {
            if !p.is_file() {
                return bad(format!("input `{}` does not exist", display_name(p)));
            }
        }
        if self.shard_size == 0 {
            return bad("shard_size must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        let extractors = &self.extract.extractors;
        if extractors.is_empty() {
            return bad("no extractors".into());
        }
        if extractors.iter().collect::<BTreeSet<_>>().len() != extractors.len() {
            return bad("extractors are listed more than once".into());
        }
        let f = &self.filters;
        let thresholds = [
            ("table_threshold", f.table_threshold),
            ("code_threshold", f.code_threshold),
            ("english_threshold", f.english_threshold),
            ("quality_threshold", f.quality_threshold),
        ];
        for (name, t) in thresholds.into_iter().chain(
            f.quality_thresholds
                .values()
                .map(|&t| ("quality_thresholds", t)),
        ) {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if let Some(e) = f
            .quality_thresholds
            .keys()
            .find(|e| !extractors.contains(e))
        {
            return bad(format!("quality_thresholds names unknown extractor `{e}`"));
        }
        self.dedup
            .minhash
            .validate()
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        self.union_plan()
            .validate()
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let baseline = self.baseline();
        if baseline != UNION_DATASET && !extractors.iter().any(|e| e.as_str() == baseline) {
            return bad(format!(
                "report baseline `{baseline}` is not a dataset of this run"
            ));
        }
        if !(self.reports.bin_width > 0.0 && self.reports.bin_width <= 1.0) {
            return bad("bin_width must lie in (0, 1]".into());
        }

        let mut registry = ExtractorRegistry::default();
        let mut digests = Vec::new();
        let words = match &self.extract.stopwords {
            Some(p) => {
                let text = read_resource(p, "stopwords")?;
                digests.push(Digest::new("stopwords", p)?);
                stopwords::parse(&text)
            }
            None => stopwords::english(),
        };
        let block = BlockStopword::new(words, BlockParams::default())
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        for e in [
            Arc::new(block) as Arc<dyn crate::extract::Extractor>,
            Arc::new(WhitespaceTable),
            Arc::new(MarkdownTable),
        ] {
            registry.register(e).expect("built-in names are distinct");
        }
        for e in extractors {
            registry
                .get(e)
                .map_err(|e| PipelineError::Validation(e.to_string()))?;
        }

        let vocab = match &f.vocab {
            Some(p) => {
                let v = BpeVocab::load(p)
                    .map_err(|e| PipelineError::Validation(format!("vocab: {e}")))?;
                digests.push(Digest::new("vocab", p)?);
                Some(Arc::new(v))
            }
            None => None,
        };
        let mut load = |role: &'static str, path: &Option<PathBuf>, label: &str, required: bool| {
            let Some(p) = path else {
                return if required {
                    Err(PipelineError::Validation(format!(
                        "{role} model is required by this pipeline"
                    )))
                } else {
                    Ok(None)
                };
            };
            if !p.is_file() {
                return Err(PipelineError::Validation(format!(
                    "{role} model `{}` does not exist",
                    display_name(p)
                )));
            }
            let model = NGramLinearModel::load(p, vocab.clone())
                .map_err(|e| PipelineError::Validation(format!("{role} model: {e}")))?;
            model
                .scorer(label)
                .map_err(|e| PipelineError::Validation(format!("{role} model: {e}")))?;
            digests.push(Digest::new(role, p)?);
            Ok(Some(model))
        };
        let table = load(
            "table",
            &f.table_model,
            POSITIVE_LABEL,
            f.pipeline == PagePipeline::Tables,
        )?;
        let code_html = load(
            "code_html",
            &f.code_html_model,
            CODE_LABEL,
            f.pipeline == PagePipeline::Code,
        )?;
        let code_text = load(
            "code_text",
            &f.code_text_model,
            CODE_LABEL,
            f.pipeline == PagePipeline::Code,
        )?;
        let lang = load("lang", &f.lang_model, ENGLISH_LABEL, false)?;
        let quality = load("quality", &f.quality_model, QUALITY_LABEL, false)?;
        let mut inputs = Vec::new();
        for p in &self.inputs {
            inputs.push(Digest::new(&display_name(p), p)?);
        }
        inputs.sort_by(|a, b| (&a.name, &a.sha256).cmp(&(&b.name, &b.sha256)));
        Ok(Resources {
            registry,
            table,
            code_html,
            code_text,
            lang,
            quality,
            inputs,
            digests,
        })
    }
}

fn display_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "<unnamed>".into())
}

fn read_resource(p: &Path, role: &str) -> Result<String, PipelineError> {
    std::fs::read_to_string(p)
        .map_err(|e| PipelineError::Validation(format!("{role} `{}`: {e}", display_name(p))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest {
    pub name: String,
    pub sha256: String,
}

impl Digest {
    fn new(name: &str, path: &Path) -> Result<Self, PipelineError> {
        let sha256 = sha256_file(path).map_err(|e| {
            PipelineError::Validation(format!("{name} `{}`: {e}", display_name(path)))
        })?;
        Ok(Digest {
            name: name.to_string(),
            sha256,
        })
    }
}

/// Everything loaded during validation.
#[derive(Debug)]
pub struct Resources {
    pub registry: ExtractorRegistry,
    pub table: Option<NGramLinearModel>,
    pub code_html: Option<NGramLinearModel>,
    pub code_text: Option<NGramLinearModel>,
    pub lang: Option<NGramLinearModel>,
    pub quality: Option<NGramLinearModel>,
    pub inputs: Vec<Digest>,
    pub digests: Vec<Digest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Invalid,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub counters: BTreeMap<String, u64>,
    pub shards: Vec<ShardInfo>,
}

impl StageRecord {
    fn new(name: &str) -> Self {
        StageRecord {
            name: name.to_string(),
            status: StageStatus::NotRun,
            error: None,
            counters: BTreeMap::new(),
            shards: Vec::new(),
        }
    }

    fn count(&mut self, key: impl Into<String>, n: u64) {
        *self.counters.entry(key.into()).or_default() += n;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub inputs: Vec<Digest>,
    pub resources: Vec<Digest>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// One filter verdict written by the `filter` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub page_id: PageId,
    /// Absent for page-level decisions, which cover every extractor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<ExtractorId>,
    pub filter: String,
    #[serde(flatten)]
    pub decision: FilterDecision,
}

type Datasets = Vec<(ExtractorId, Vec<ExtractedDoc>)>;

struct Run<'a> {
    root: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&Path, &mut StageRecord) -> Result<T, String>,
    ) -> Result<T, PipelineError> {
        let mut record = StageRecord::new(name);
        let result = std::fs::remove_dir_all(self.root.join(name))
            .or_else(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    Ok(())
                } else {
                    Err(e)
                }
            })
            .map_err(|e| format!("clearing `{name}/`: {e}"))
            .and_then(|_| f(self.root, &mut record));
        match result {
            Ok(v) => {
                record.status = StageStatus::Ok;
                self.manifest.stages.push(record);
                Ok(v)
            }
            Err(message) => {
                record.status = StageStatus::Invalid;
                record.error = Some(message.clone());
                self.manifest.stages.push(record);
                self.manifest.valid = false;
                self.manifest.failed_stage = Some(name.to_string());
                for later in STAGES.iter().skip_while(|s| **s != name).skip(1) {
                    self.manifest.stages.push(StageRecord::new(later));
                }
                let _ = self.write_manifest();
                Err(PipelineError::Stage {
                    stage: name.to_string(),
                    message,
                })
            }
        }
    }

    fn write_manifest(&self) -> std::io::Result<()> {
        std::fs::write(self.root.join("manifest.json"), self.manifest.to_json())
    }
}

fn io_err(what: &str) -> impl Fn(std::io::Error) -> String + '_ {
    move |e| format!("{what}: {e}")
}

fn record_docs(record: &mut StageRecord, extractor: &ExtractorId, docs: &[ExtractedDoc]) {
    record.count(format!("{extractor}.docs"), docs.len() as u64);
    record.count(
        format!("{extractor}.tokens"),
        docs.iter().map(|d| d.token_count).sum(),
    );
}

fn write_datasets(
    root: &Path,
    dir: &str,
    data: &Datasets,
    shard_size: usize,
    record: &mut StageRecord,
) -> Result<(), String> {
    for (e, docs) in data {
        record_docs(record, e, docs);
        write_shards(root, dir, e.as_str(), docs, shard_size, &mut record.shards)
            .map_err(io_err(dir))?;
    }
    Ok(())
}

/// Name, scorer, threshold and filter of one document-level step.
type DocStep<'a> = (
    &'static str,
    Option<&'a dyn Scorer>,
    f64,
    fn(&mut ExtractedDoc, &dyn Scorer, f64) -> FilterDecision,
);

/// Validates `config`, then runs every stage. `workers` overrides the
/// config's worker count.
pub fn run_pipeline(
    config: &PipelineConfig,
    workers: Option<usize>,
) -> Result<Manifest, PipelineError> {
    let resources = config.validate()?;
    let workers = workers
        .or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(PipelineError::Validation("workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| PipelineError::Config(format!("output_dir: {e}")))?;
    let mut run = Run {
        root: &config.output_dir,
        manifest: Manifest {
            format: MANIFEST_FORMAT.to_string(),
            valid: true,
            failed_stage: None,
            inputs: resources.inputs.clone(),
            resources: resources.digests.clone(),
            stages: Vec::new(),
        },
    };
    pool.install(|| run_stages(config, &resources, &mut run))?;
    run.write_manifest().map_err(|e| PipelineError::Stage {
        stage: "report".into(),
        message: format!("manifest: {e}"),
    })?;
    Ok(run.manifest)
}

fn run_stages(
    config: &PipelineConfig,
    res: &Resources,
    run: &mut Run<'_>,
) -> Result<(), PipelineError> {
    let shard = config.shard_size;
    let extractors = &config.extract.extractors;

    let pages: Vec<RawPage> = run.stage("ingest", |root, record| {
        let per_input: Vec<Result<(Vec<RawPage>, _), String>> = config
            .inputs
            .par_iter()
            .map(|path| {
                let name = display_name(path);
                let file = std::fs::File::open(path).map_err(io_err(&name))?;
                let mut reader = WarcReader::new(std::io::BufReader::new(file));
                let pages = reader
                    .by_ref()
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("input `{name}`: {e}"))?;
                Ok((pages, reader.into_stats()))
            })
            .collect();
        let mut pages = Vec::new();
        for result in per_input {
            let (batch, stats) = result?;
            record.count("records", stats.records);
            for (reason, n) in stats.skipped {
                let key = serde_json::to_value(reason).expect("reason serializes");
                record.count(format!("skipped.{}", key.as_str().unwrap_or("other")), n);
            }
            pages.extend(batch);
        }
        // Page order, and the copy kept for a repeated id, must not depend on input order.
        pages.par_sort_unstable_by(|a, b| {
            (&a.page_id, &a.url, &a.html, &a.fetch_time).cmp(&(
                &b.page_id,
                &b.url,
                &b.html,
                &b.fetch_time,
            ))
        });
        let before = pages.len();
        pages.dedup_by(|b, a| a.page_id == b.page_id);
        record.count("duplicate_pages", (before - pages.len()) as u64);
        record.count("pages", pages.len() as u64);
        write_shards(root, "ingest", "pages", &pages, shard, &mut record.shards)
            .map_err(io_err("ingest"))?;
        Ok(pages)
    })?;

    let extracted: Datasets = run.stage("extract", |root, record| {
        let per_page: Vec<Vec<ExtractedDoc>> = pages
            .par_iter()
            .map(|p| {
                let dom = build_dom(&p.html);
                res.registry
                    .run_on_dom(&dom, &p.page_id, &p.url, extractors)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        let mut data: Datasets = extractors.iter().map(|e| (e.clone(), Vec::new())).collect();
        for docs in per_page {
            for (slot, doc) in data.iter_mut().zip(docs) {
                if doc.text.trim().is_empty() {
                    record.count(format!("{}.empty", slot.0), 1);
                } else {
                    slot.1.push(doc);
                }
            }
        }
        write_datasets(root, "extract", &data, shard, record)?;
        Ok(data)
    })?;

    let filtered: Datasets = run.stage("filter", |root, record| {
        let f = &config.filters;
        let table = res
            .table
            .as_ref()
            .map(|m| m.scorer(POSITIVE_LABEL).expect("validated"));
        let code = match (&res.code_html, &res.code_text) {
            (Some(h), Some(t)) => Some((
                h.scorer(CODE_LABEL).expect("validated"),
                t.scorer(CODE_LABEL).expect("validated"),
            )),
            _ => None,
        };
        let mut decisions: Vec<DecisionRecord> = Vec::new();
        let kept_pages: HashSet<PageId> = match f.pipeline {
            PagePipeline::None => pages.iter().map(|p| p.page_id.clone()).collect(),
            pipeline => {
                let name = if pipeline == PagePipeline::Tables {
                    "tables"
                } else {
                    "code"
                };
                let verdicts: Vec<FilterDecision> = pages
                    .par_iter()
                    .map(|p| {
                        let dom = build_dom(&p.html);
                        match pipeline {
                            PagePipeline::Tables => {
                                let s = table.as_ref().expect("validated");
                                table_pipeline(&find_tables(&dom, &p.page_id), s, f.table_threshold)
                            }
                            _ => {
                                let (h, t) = code.as_ref().expect("validated");
                                code_page_filter(
                                    &find_pre_blocks(&dom, &p.page_id),
                                    h,
                                    t,
                                    f.code_threshold,
                                )
                            }
                        }
                    })
                    .collect();
                let mut kept = HashSet::new();
                for (p, d) in pages.iter().zip(verdicts) {
                    match d.reason {
                        None => {
                            record.count("pages.kept", 1);
                            kept.insert(p.page_id.clone());
                        }
                        Some(r) => record.count(format!("pages.rejected.{}", r.as_str()), 1),
                    }
                    decisions.push(DecisionRecord {
                        page_id: p.page_id.clone(),
                        extractor: None,
                        filter: name.to_string(),
                        decision: d,
                    });
                }
                kept
            }
        };
        let lang = res
            .lang
            .as_ref()
            .map(|m| m.scorer(ENGLISH_LABEL).expect("validated"));
        let quality = res
            .quality
            .as_ref()
            .map(|m| m.scorer(QUALITY_LABEL).expect("validated"));
        let mut data: Datasets = Vec::new();
        for (e, docs) in &extracted {
            let threshold = f.quality_threshold_for(e);
            let results: Vec<(ExtractedDoc, Vec<DecisionRecord>)> = docs
                .par_iter()
                .filter(|d| kept_pages.contains(&d.page_id))
                .map(|d| {
                    let mut doc = d.clone();
                    let mut out = Vec::new();
                    let steps: [DocStep; 2] = [
                        (
                            "english",
                            lang.as_ref().map(|s| s as &dyn Scorer),
                            f.english_threshold,
                            english_filter,
                        ),
                        (
                            "quality",
                            quality.as_ref().map(|s| s as &dyn Scorer),
                            threshold,
                            quality_filter,
                        ),
                    ];
                    for (name, scorer, t, filter) in steps {
                        let Some(scorer) = scorer else { continue };
                        let decision = filter(&mut doc, scorer, t);
                        let stop = !decision.kept;
                        out.push(DecisionRecord {
                            page_id: doc.page_id.clone(),
                            extractor: Some(e.clone()),
                            filter: name.to_string(),
                            decision,
                        });
                        if stop {
                            break;
                        }
                    }
                    (doc, out)
                })
                .collect();
            let mut kept = Vec::new();
            for (doc, recs) in results {
                let rejected = recs
                    .iter()
                    .find(|r| !r.decision.kept)
                    .map(|r| r.filter.clone());
                decisions.extend(recs);
                match rejected {
                    Some(name) => record.count(format!("{e}.rejected.{name}"), 1),
                    None => kept.push(doc),
                }
            }
            data.push((e.clone(), kept));
        }
        write_shards(
            root,
            "filter",
            "decisions",
            &decisions,
            shard,
            &mut record.shards,
        )
        .map_err(io_err("filter"))?;
        write_datasets(root, "filter", &data, shard, record)?;
        Ok(data)
    })?;

    let deduped: Datasets = run.stage("dedup", |root, record| {
        let mut data = Vec::new();
        for (e, docs) in filtered {
            let before = docs.len();
            let kept = if config.dedup.fuzzy {
                fuzzy_dedup(docs, &config.dedup.minhash).map_err(|e| e.to_string())?
            } else {
                docs
            };
            record.count(format!("{e}.removed"), (before - kept.len()) as u64);
            data.push((e, kept));
        }
        write_datasets(root, "dedup", &data, shard, record)?;
        Ok(data)
    })?;

    let union: Vec<ExtractedDoc> = run.stage("union", |root, record| {
        let merged = union_merge(&deduped, &config.strategy()).map_err(|e| e.to_string())?;
        record.count("merged", merged.len() as u64);
        let docs = if config.union.rededup {
            let before = merged.len();
            let kept = fuzzy_dedup(merged, &config.dedup.minhash).map_err(|e| e.to_string())?;
            record.count("rededup_removed", (before - kept.len()) as u64);
            kept
        } else {
            merged
        };
        record_docs(record, &ExtractorId::new(UNION_DATASET), &docs);
        write_shards(
            root,
            "union",
            UNION_DATASET,
            &docs,
            shard,
            &mut record.shards,
        )
        .map_err(io_err("union"))?;
        Ok(docs)
    })?;

    run.stage("report", |root, record| {
        let report = build_report(config, &deduped, &union).map_err(|e| e.to_string())?;
        let json = report.to_json() + "\n";
        write_bytes(
            root,
            "report/report.json",
            json.as_bytes(),
            1,
            &mut record.shards,
        )
        .map_err(io_err("report"))?;
        let text = render_report_text(&report);
        write_bytes(
            root,
            "report/report.txt",
            text.as_bytes(),
            1,
            &mut record.shards,
        )
        .map_err(io_err("report"))?;
        Ok(())
    })
}

/// Token counts, overlap, imbalance and yield for one run's outputs.
pub fn build_report(
    config: &PipelineConfig,
    datasets: &Datasets,
    union: &[ExtractedDoc],
) -> Result<CorpusReport, crate::report::ReportError> {
    let quality_used = config.filters.quality_model.is_some();
    let mut tokens: Vec<DatasetTokens> = datasets
        .iter()
        .map(|(e, docs)| DatasetTokens {
            name: e.to_string(),
            thresholds: if quality_used {
                format!("{}", config.filters.quality_threshold_for(e))
            } else {
                String::new()
            },
            tokens: docs.iter().map(|d| d.token_count).sum(),
        })
        .collect();
    let plan = config.union_plan();
    tokens.push(DatasetTokens {
        name: UNION_DATASET.to_string(),
        thresholds: if quality_used {
            plan.name.trim_start_matches("Union ").to_string()
        } else {
            String::new()
        },
        tokens: union.iter().map(|d| d.token_count).sum(),
    });
    let id_sets: Vec<(String, BTreeSet<PageId>)> = datasets
        .iter()
        .map(|(e, docs)| {
            (
                e.to_string(),
                docs.iter().map(|d| d.page_id.clone()).collect(),
            )
        })
        .collect();
    let venn = if (2..=3).contains(&id_sets.len()) {
        let refs: Vec<(&str, &BTreeSet<PageId>)> =
            id_sets.iter().map(|(n, s)| (n.as_str(), s)).collect();
        Some(venn_report(&refs)?)
    } else {
        None
    };
    let groups: Vec<(ExtractorId, Vec<String>)> = datasets
        .iter()
        .map(|(e, docs)| (e.clone(), docs.iter().map(|d| d.url.clone()).collect()))
        .collect();
    let imbalance = domain_imbalance(
        &groups,
        &ImbalanceConfig {
            min_pages: config.reports.min_pages,
            bin_width: config.reports.bin_width,
        },
    )?;
    let yields = yield_report(&tokens, &config.baseline());
    Ok(CorpusReport {
        datasets: tokens,
        venn,
        imbalance: Some(imbalance),
        yields: match yields {
            Ok(y) => Some(y),
            Err(crate::report::ReportError::EmptyBaseline(_)) => None,
            Err(e) => return Err(e),
        },
    })
}

pub fn render_report_text(report: &CorpusReport) -> String {
    let mut out = String::new();
    match &report.yields {
        Some(y) => out.push_str(&y.to_table()),
        None => out.push_str("token yield: baseline is empty\n"),
    }
    if let Some(v) = &report.venn {
        out.push_str("\nOverlap\n");
        for c in &v.cells {
            out.push_str(&format!("  {:<50} {}\n", c.members.join(" & "), c.count));
        }
        out.push_str(&format!(
            "  union {}  unique fraction {:.4}\n",
            v.union, v.unique_fraction
        ));
    }
    if let Some(i) = &report.imbalance {
        out.push_str(&format!(
            "\nDomain imbalance ({} domains with >= {} pages)\n  ratio >= 0.6: {:.4}\n  ratio >= 0.8: {:.4}\n",
            i.domains.len(),
            i.min_pages,
            i.fraction_at_least_0_6,
            i.fraction_at_least_0_8
        ));
    }
    out
}
