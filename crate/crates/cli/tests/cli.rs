use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn corpus(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corpus"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = corpus(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn staged_commands_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fx = fixtures();
    let warc0 = fx.join("crawl/crawl-0.warc.gz");
    let warc1 = fx.join("crawl/crawl-1.warc.gz");
    let vocab = fx.join("test-vocab.tiktoken");

    ok(
        d,
        &[
            "ingest",
            warc0.to_str().unwrap(),
            warc1.to_str().unwrap(),
            "--out",
            "pages.jsonl",
        ],
    );
    assert_eq!(lines(&d.join("pages.jsonl")), 44);

    let listing = ok(d, &["inspect", warc0.to_str().unwrap(), "--limit", "3"]);
    assert_eq!(listing.lines().count(), 4);
    assert!(listing.starts_with("page_id\turl"));

    ok(
        d,
        &["extract", "--pages", "pages.jsonl", "--out-dir", "docs"],
    );
    for name in ["block_stopword", "whitespace_table", "markdown_table"] {
        assert!(d.join(format!("docs/{name}.jsonl")).is_file());
    }

    ok(
        d,
        &[
            "train-classifier",
            "--role",
            "table",
            "--pages",
            "pages.jsonl",
            "--vocab",
            vocab.to_str().unwrap(),
            "--out",
            "table.nglm",
        ],
    );
    for name in ["whitespace_table", "markdown_table"] {
        ok(
            d,
            &[
                "filter",
                "--pipeline",
                "tables",
                "--pages",
                "pages.jsonl",
                "--docs",
                &format!("docs/{name}.jsonl"),
                "--model",
                "table.nglm",
                "--vocab",
                vocab.to_str().unwrap(),
                "--out",
                &format!("{name}.tables.jsonl"),
                "--decisions",
                &format!("{name}.decisions.jsonl"),
            ],
        );
        assert_eq!(lines(&d.join(format!("{name}.decisions.jsonl"))), 44);
        ok(
            d,
            &[
                "dedup",
                "--input",
                &format!("{name}.tables.jsonl"),
                "--out",
                &format!("{name}.dedup.jsonl"),
                "--fuzzy",
            ],
        );
    }
    let kept = lines(&d.join("whitespace_table.dedup.jsonl"));
    assert!(kept > 0 && kept < 44);

    std::fs::write(
        d.join("plan.toml"),
        r#"
name = "Union"
rededup = true
strategy = { kind = "manual", preference = ["whitespace_table", "markdown_table"] }

[[inputs]]
dataset = "ws"
extractor = "whitespace_table"
quality_threshold = 0.0
path = "whitespace_table.dedup.jsonl"

[[inputs]]
dataset = "md"
extractor = "markdown_table"
quality_threshold = 0.0
path = "markdown_table.dedup.jsonl"
"#,
    )
    .unwrap();
    ok(d, &["union", "--plan", "plan.toml", "--out", "union.jsonl"]);
    assert_eq!(lines(&d.join("union.jsonl")), kept);

    let table = ok(
        d,
        &[
            "report",
            "--dataset",
            "whitespace_table=whitespace_table.dedup.jsonl",
            "--dataset",
            "markdown_table=markdown_table.dedup.jsonl",
            "--dataset",
            "union=union.jsonl",
            "--min-pages",
            "2",
            "--json",
            "report.json",
        ],
    );
    assert!(table.contains("Token Yield"));
    assert!(table.contains("baseline"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["datasets"].as_array().unwrap().len(), 3);
}

#[test]
fn run_writes_manifest_and_rejects_missing_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fx = fixtures();
    let config = format!(
        "inputs = [\"{}\"]\noutput_dir = \"out\"\n",
        fx.join("crawl/crawl-1.warc.gz").display()
    );
    std::fs::write(d.join("run.toml"), &config).unwrap();
    let stdout = ok(d, &["run", "--config", "run.toml", "--workers", "2"]);
    assert!(stdout.trim_end().ends_with("manifest.json"));
    assert!(d.join("out/manifest.json").is_file());
    assert!(d.join("out/report/report.txt").is_file());

    std::fs::write(
        d.join("bad.toml"),
        config + "[filters]\npipeline = \"tables\"\ntable_model = \"nope.nglm\"\n",
    )
    .unwrap();
    let out = corpus(d, &["run", "--config", "bad.toml"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("validation"), "{stderr}");
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!corpus(
        dir.path(),
        &[
            "filter",
            "--pipeline",
            "nonsense",
            "--docs",
            "a",
            "--out",
            "b"
        ]
    )
    .status
    .success());
    let out = corpus(
        dir.path(),
        &["dedup", "--input", "missing.jsonl", "--out", "x.jsonl"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
}

#[test]
fn extract_reads_archives_and_inspect_dumps_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let warc = fixtures().join("crawl/crawl-0.warc.gz");
    let w = warc.to_str().unwrap();
    ok(
        d,
        &[
            "extract",
            "--in",
            w,
            "--extractor",
            "markdown_table",
            "--out",
            "md.jsonl",
        ],
    );
    let text = std::fs::read_to_string(d.join("md.jsonl")).unwrap();
    assert!(text.contains("| --- |"));
    let out = corpus(d, &["extract", "--in", w, "--out", "all.jsonl"]);
    assert!(!out.status.success());

    let tables = ok(d, &["inspect", w, "--tables"]);
    let first: serde_json::Value = serde_json::from_str(tables.lines().next().unwrap()).unwrap();
    assert_eq!(
        first["n_rows"].as_u64().unwrap() as usize,
        first["column_counts"].as_array().unwrap().len()
    );
    let pre = ok(d, &["inspect", w, "--pre"]);
    assert!(pre.lines().any(|l| l.contains("\"has_code_child\":true")));
}
