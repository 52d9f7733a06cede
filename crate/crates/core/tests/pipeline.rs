mod common;

use std::path::Path;

use common::*;
use corpus_core::extract::ExtractedDoc;
use corpus_core::pipeline::io::{read_shards, sha256_file, sha256_hex};
use corpus_core::pipeline::{
    run_pipeline, Manifest, PagePipeline, PipelineConfig, PipelineError, StageStatus, STAGES,
};
use corpus_core::report::CorpusReport;

/// SHA-256 of `manifest.json` for the fixture table pipeline, frozen after
/// auditing the first run's outputs.
const GOLDEN_MANIFEST_SHA256: &str =
    "da66410ac0fcba7efa2e7db0fcab96f4541e0e2724e15d7a9398d9a504ccca48";

fn manifest_bytes(config: &PipelineConfig) -> Vec<u8> {
    std::fs::read(config.output_dir.join("manifest.json")).unwrap()
}

fn stage_docs(root: &Path, manifest: &Manifest, stage: &str, stem: &str) -> Vec<ExtractedDoc> {
    let prefix = format!("{stage}/{stem}-");
    let shards: Vec<_> = manifest
        .stage(stage)
        .unwrap()
        .shards
        .iter()
        .filter(|s| s.path.starts_with(&prefix))
        .cloned()
        .collect();
    read_shards(root, &shards).unwrap()
}

#[test]
fn table_pipeline_matches_golden_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let config = table_pipeline_config(dir.path(), &models);
    let manifest = run_pipeline(&config, Some(2)).unwrap();
    assert!(manifest.valid);
    assert_eq!(manifest.failed_stage, None);
    let names: Vec<&str> = manifest.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, STAGES);
    assert!(manifest.stages.iter().all(|s| s.status == StageStatus::Ok));

    let root = &config.output_dir;
    for stage in &manifest.stages {
        for shard in &stage.shards {
            assert_eq!(
                sha256_file(&root.join(&shard.path)).unwrap(),
                shard.sha256,
                "{}",
                shard.path
            );
        }
    }
    let ingest = manifest.stage("ingest").unwrap();
    assert_eq!(ingest.counters["pages"], 44);
    assert_eq!(ingest.counters["duplicate_pages"], 1);
    assert_eq!(ingest.counters["skipped.not_html"], 1);

    // Exactly the wiki and census pages carry tables the model accepts.
    let filter = manifest.stage("filter").unwrap();
    assert_eq!(filter.counters["pages.kept"], 13);
    assert_eq!(filter.counters["pages.rejected.table_score"], 9);
    let kept = stage_docs(root, &manifest, "filter", "whitespace_table");
    assert!(kept
        .iter()
        .all(|d| d.url.contains("wikipedia.org") || d.url.contains("census.gov")));

    let union = stage_docs(root, &manifest, "union", "union");
    assert_eq!(
        union.len() as u64,
        manifest.stage("union").unwrap().counters["union.docs"]
    );
    assert!(union.windows(2).all(|w| w[0].page_id < w[1].page_id));

    let json = std::fs::read_to_string(root.join("report/report.json")).unwrap();
    let report = CorpusReport::from_json(&json).unwrap();
    assert_eq!(report.venn.as_ref().unwrap().union, 13);
    assert!(std::fs::read_to_string(root.join("report/report.txt"))
        .unwrap()
        .contains("Token Yield"));

    assert_eq!(sha256_hex(&manifest_bytes(&config)), GOLDEN_MANIFEST_SHA256);
}

#[test]
fn manifest_is_independent_of_reruns_workers_and_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let config = table_pipeline_config(dir.path(), &models);
    run_pipeline(&config, Some(1)).unwrap();
    let first = manifest_bytes(&config);
    run_pipeline(&config, Some(1)).unwrap();
    assert_eq!(manifest_bytes(&config), first);
    run_pipeline(&config, Some(8)).unwrap();
    assert_eq!(manifest_bytes(&config), first);
    let mut reversed = config.clone();
    reversed.inputs.reverse();
    run_pipeline(&reversed, Some(3)).unwrap();
    assert_eq!(manifest_bytes(&config), first);
}

#[test]
fn missing_model_fails_validation_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let mut config = table_pipeline_config(dir.path(), &models);
    config.filters.table_model = Some(dir.path().join("absent.nglm"));
    let err = run_pipeline(&config, Some(1)).unwrap_err();
    assert!(
        matches!(err, PipelineError::Validation(ref m) if m.contains("absent.nglm")),
        "{err}"
    );
    assert!(!config.output_dir.exists());

    config.filters.table_model = None;
    assert!(matches!(
        run_pipeline(&config, Some(1)),
        Err(PipelineError::Validation(_))
    ));
}

#[test]
fn model_without_required_label_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let mut config = table_pipeline_config(dir.path(), &models);
    // The language model has no `positive` class.
    config.filters.table_model = Some(models.lang.clone());
    let err = run_pipeline(&config, Some(1)).unwrap_err();
    assert!(matches!(err, PipelineError::Validation(_)), "{err}");
}

#[test]
fn failing_stage_is_named_and_marked_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let config = table_pipeline_config(dir.path(), &models);
    std::fs::create_dir_all(&config.output_dir).unwrap();
    std::fs::write(config.output_dir.join("extract"), "in the way").unwrap();
    let err = run_pipeline(&config, Some(2)).unwrap_err();
    assert!(
        matches!(err, PipelineError::Stage { ref stage, .. } if stage == "extract"),
        "{err}"
    );

    let manifest: Manifest = serde_json::from_slice(&manifest_bytes(&config)).unwrap();
    assert!(!manifest.valid);
    assert_eq!(manifest.failed_stage.as_deref(), Some("extract"));
    let status: Vec<StageStatus> = manifest.stages.iter().map(|s| s.status).collect();
    use StageStatus::*;
    assert_eq!(status, [Ok, Invalid, NotRun, NotRun, NotRun, NotRun]);
    assert!(manifest.stage("extract").unwrap().error.is_some());
}

#[test]
fn truncated_archive_fails_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let mut config = table_pipeline_config(dir.path(), &models);
    let bytes = std::fs::read(fixture("crawl/crawl-0.warc.gz")).unwrap();
    let cut = dir.path().join("cut.warc.gz");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    config.inputs = vec![cut];
    let err = run_pipeline(&config, Some(2)).unwrap_err();
    match err {
        PipelineError::Stage { stage, message } => {
            assert_eq!(stage, "ingest");
            assert!(message.contains("cut.warc.gz"), "{message}");
        }
        other => panic!("{other}"),
    }
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes(&config)).unwrap();
    assert_eq!(
        manifest.stage("ingest").unwrap().status,
        StageStatus::Invalid
    );
}

#[test]
fn code_pipeline_keeps_code_pages() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    let mut config = table_pipeline_config(dir.path(), &models);
    config.filters.pipeline = PagePipeline::Code;
    config.filters.table_model = None;
    config.filters.code_html_model = Some(models.code_html.clone());
    config.filters.code_text_model = Some(models.code_text.clone());
    config.filters.code_threshold = 0.6;
    let manifest = run_pipeline(&config, Some(2)).unwrap();
    let kept = stage_docs(&config.output_dir, &manifest, "filter", "whitespace_table");
    let urls: Vec<&str> = kept.iter().map(|d| d.url.as_str()).collect();
    assert!(!kept.is_empty());
    assert!(
        urls.iter()
            .all(|u| u.contains("stackoverflow.com") || u.contains("docs.python.org")),
        "{urls:?}"
    );
    assert!(!kept.iter().any(|d| d.url.contains("songlyrics")));
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let models = write_models(dir.path());
    std::fs::copy(
        fixture("crawl/crawl-0.warc.gz"),
        dir.path().join("a.warc.gz"),
    )
    .unwrap();
    let toml = format!(
        r#"
inputs = ["a.warc.gz"]
output_dir = "run"

[extract]
extractors = ["markdown_table", "block_stopword"]

[filters]
pipeline = "tables"
vocab = "{vocab}"
table_model = "table.nglm"
table_threshold = 0.75
quality_thresholds = {{ markdown_table = 0.15 }}

[union]
strategy = {{ kind = "random", seed = 3 }}

[reports]
baseline = "block_stopword"
min_pages = 50
"#,
        vocab = models.vocab.display()
    );
    let path = dir.path().join("run.toml");
    std::fs::write(&path, toml).unwrap();
    let config = PipelineConfig::load(&path).unwrap();
    assert_eq!(config.output_dir, dir.path().join("run"));
    assert_eq!(
        config
            .filters
            .quality_threshold_for(&corpus_core::extract::ExtractorId::new("markdown_table")),
        0.15
    );
    let manifest = run_pipeline(&config, None).unwrap();
    assert!(manifest.valid);
    assert!(dir.path().join("run/manifest.json").is_file());

    assert!(matches!(
        PipelineConfig::from_toml("inputs = []\noutput_dir = \"o\"\nbogus = 1\n"),
        Err(PipelineError::Config(_))
    ));
}
