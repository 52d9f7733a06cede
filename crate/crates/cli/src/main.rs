use std::collections::HashSet;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use corpus_core::classify::{
    train, BpeVocab, LabeledExample, NGramLinearModel, Tokenizer, TrainConfig, ENGLISH_LABEL,
};
use corpus_core::dedup::{fuzzy_dedup, run_union, MinHashConfig, UnionPlan};
use corpus_core::extract::{
    stopwords, BlockParams, BlockStopword, ExtractedDoc, ExtractorId, ExtractorRegistry,
};
use corpus_core::filters::{
    code_page_filter, english_filter, quality_filter, table_pipeline, BlockView, DomainLabels,
    FilterDecision, UrlLabelRules, CODE_LABEL, CODE_THRESHOLD, ENGLISH_THRESHOLD, POSITIVE_LABEL,
    QUALITY_LABEL, QUALITY_THRESHOLDS, TABLE_THRESHOLD,
};
use corpus_core::html::{build_dom, find_pre_blocks, find_tables};
use corpus_core::pipeline::io::{read_jsonl, write_jsonl};
use corpus_core::pipeline::training::{code_examples, table_examples};
use corpus_core::pipeline::{run_pipeline, DecisionRecord, PipelineConfig};
use corpus_core::report::{
    domain_imbalance, venn_report, yield_report, CorpusReport, DatasetTokens, ImbalanceConfig,
};
use corpus_core::warc::{RawPage, WarcReader};

#[derive(Parser)]
#[command(
    name = "corpus",
    version,
    about = "Multi-extractor web corpus curation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read WARC archives into a pages JSONL file.
    Ingest {
        #[arg(required = true)]
        warcs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one line per HTML page of an archive, or dump its table or
    /// pre candidates as JSONL.
    Inspect {
        warc: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, conflicts_with = "pre")]
        tables: bool,
        #[arg(long)]
        pre: bool,
    },
    /// Run extractors over pages, one JSONL file per extractor.
    Extract {
        /// Pages JSONL written by `ingest`.
        #[arg(long, required_unless_present = "inputs", conflicts_with = "inputs")]
        pages: Option<PathBuf>,
        /// WARC archives to read directly.
        #[arg(long = "in")]
        inputs: Vec<PathBuf>,
        /// Output directory, one `<extractor>.jsonl` per extractor.
        #[arg(long, required_unless_present = "out", conflicts_with = "out")]
        out_dir: Option<PathBuf>,
        /// Output file; needs exactly one --extractor.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to every built-in extractor.
        #[arg(long = "extractor")]
        extractors: Vec<String>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Apply one filter to a docs file.
    Filter {
        #[arg(long, value_enum)]
        pipeline: FilterKind,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pages file; the table and code filters decide from the page HTML.
        #[arg(long)]
        pages: Option<PathBuf>,
        /// Defaults to the filter's standard threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Model for the table, quality or english filter.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        html_model: Option<PathBuf>,
        #[arg(long)]
        text_model: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Where to write one decision per page or doc.
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Train an n-gram classifier for one filter role.
    TrainClassifier {
        #[arg(long, value_enum)]
        role: Role,
        #[arg(long)]
        out: PathBuf,
        /// Pages file to weakly label (table and code roles).
        #[arg(long)]
        pages: Option<PathBuf>,
        /// Labelled examples JSONL (quality and lang roles).
        #[arg(long)]
        examples: Option<PathBuf>,
        /// `host<TAB>label` file for the code roles.
        #[arg(long)]
        domains: Option<PathBuf>,
        /// Subword vocabulary; required for table and code-html.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// TOML file with n_max, bucket_count, epochs, lr, seed.
        #[arg(long)]
        train_config: Option<PathBuf>,
    },
    /// Remove repeated page ids, and with --fuzzy near-duplicates.
    Dedup {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fuzzy: bool,
        #[arg(long, default_value_t = MinHashConfig::default().verify_threshold)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Merge per-extractor datasets as described by a plan file.
    Union {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlap, domain imbalance and token yield of named datasets.
    Report {
        /// `name=path` of a docs file; repeatable.
        #[arg(long = "dataset", required = true)]
        datasets: Vec<String>,
        /// Defaults to the first dataset.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = ImbalanceConfig::default().min_pages)]
        min_pages: usize,
        #[arg(long, default_value_t = ImbalanceConfig::default().bin_width)]
        bin_width: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterKind {
    Tables,
    Code,
    Quality,
    English,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Table,
    CodeHtml,
    CodeText,
    Quality,
    Lang,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { warcs, out } => ingest(&warcs, &out),
        Command::Inspect {
            warc,
            limit,
            tables,
            pre,
        } => inspect(&warc, limit, tables, pre),
        Command::Extract {
            pages,
            inputs,
            out_dir,
            out,
            extractors,
            stopwords,
        } => {
            let pages = match pages {
                Some(p) => read_jsonl(&p)?,
                None => read_archives(&inputs)?,
            };
            let target = match (out_dir, out) {
                (Some(d), _) => Output::Dir(d),
                (None, Some(f)) => Output::File(f),
                (None, None) => unreachable!("clap requires one"),
            };
            extract(&pages, target, &extractors, stopwords.as_deref())
        }
        Command::Filter {
            pipeline,
            docs,
            out,
            pages,
            threshold,
            model,
            html_model,
            text_model,
            vocab,
            decisions,
        } => {
            let vocab = vocab.as_deref().map(load_vocab).transpose()?;
            let docs: Vec<ExtractedDoc> = read_jsonl(&docs)?;
            let (kept, records) = match pipeline {
                FilterKind::Tables | FilterKind::Code => {
                    let pages: Vec<RawPage> =
                        read_jsonl(pages.as_deref().context("--pages is required")?)?;
                    page_filter(
                        pipeline, &pages, docs, threshold, model, html_model, text_model, vocab,
                    )?
                }
                FilterKind::Quality | FilterKind::English => {
                    doc_filter(pipeline, docs, threshold, model, vocab)?
                }
            };
            eprintln!("kept {} docs", kept.len());
            write_jsonl(&out, &kept)?;
            if let Some(path) = decisions {
                write_jsonl(&path, &records)?;
            }
            Ok(())
        }
        Command::TrainClassifier {
            role,
            out,
            pages,
            examples,
            domains,
            vocab,
            train_config,
        } => train_classifier(role, &out, pages, examples, domains, vocab, train_config),
        Command::Dedup {
            input,
            out,
            fuzzy,
            threshold,
            seed,
        } => {
            let docs: Vec<ExtractedDoc> = read_jsonl(&input)?;
            let before = docs.len();
            let mut seen = HashSet::new();
            let mut docs: Vec<ExtractedDoc> = docs
                .into_iter()
                .filter(|d| seen.insert(d.page_id.clone()))
                .collect();
            if fuzzy {
                let config = MinHashConfig {
                    verify_threshold: threshold,
                    seed,
                    ..MinHashConfig::default()
                };
                docs = fuzzy_dedup(docs, &config)?;
            }
            eprintln!("kept {} of {before} docs", docs.len());
            write_jsonl(&out, &docs)?;
            Ok(())
        }
        Command::Union { plan, out } => union(&plan, &out),
        Command::Report {
            datasets,
            baseline,
            min_pages,
            bin_width,
            json,
        } => report(
            &datasets,
            baseline,
            ImbalanceConfig {
                min_pages,
                bin_width,
            },
            json.as_deref(),
        ),
        Command::Run { config, workers } => {
            let config = PipelineConfig::load(&config)?;
            let manifest = run_pipeline(&config, workers)?;
            for stage in &manifest.stages {
                eprintln!(
                    "{:<8} {:?} {} shards",
                    stage.name,
                    stage.status,
                    stage.shards.len()
                );
            }
            println!("{}", config.output_dir.join("manifest.json").display());
            Ok(())
        }
    }
}

fn read_archive(path: &Path) -> Result<Vec<RawPage>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = WarcReader::new(BufReader::new(file));
    let pages = reader
        .by_ref()
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    let stats = reader.into_stats();
    eprintln!(
        "{}: {} records, {} pages, {} skipped",
        path.display(),
        stats.records,
        pages.len(),
        stats.skipped_total()
    );
    Ok(pages)
}

/// Pages of several archives, later copies of a page id dropped.
fn read_archives(warcs: &[PathBuf]) -> Result<Vec<RawPage>> {
    let mut pages = Vec::new();
    let mut seen = HashSet::new();
    for path in warcs {
        pages.extend(
            read_archive(path)?
                .into_iter()
                .filter(|p| seen.insert(p.page_id.clone())),
        );
    }
    Ok(pages)
}

fn ingest(warcs: &[PathBuf], out: &Path) -> Result<()> {
    write_jsonl(out, &read_archives(warcs)?)?;
    Ok(())
}

fn inspect(warc: &Path, limit: Option<usize>, tables: bool, pre: bool) -> Result<()> {
    let pages = read_archive(warc)?;
    let pages = &pages[..pages.len().min(limit.unwrap_or(usize::MAX))];
    if tables || pre {
        let mut out = std::io::stdout().lock();
        for page in pages {
            let dom = build_dom(&page.html);
            let lines: Vec<String> = if tables {
                find_tables(&dom, &page.page_id)
                    .iter()
                    .map(serde_json::to_string)
                    .collect::<Result<_, _>>()?
            } else {
                find_pre_blocks(&dom, &page.page_id)
                    .iter()
                    .map(serde_json::to_string)
                    .collect::<Result<_, _>>()?
            };
            for line in lines {
                writeln!(out, "{line}")?;
            }
        }
        return Ok(());
    }
    println!("page_id\turl\tbytes\ttables\tpre_blocks\tparse_errors");
    for page in pages {
        let dom = build_dom(&page.html);
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            page.page_id.as_str(),
            page.url,
            page.html.len(),
            find_tables(&dom, &page.page_id).len(),
            find_pre_blocks(&dom, &page.page_id).len(),
            dom.parse_errors()
        );
    }
    Ok(())
}

enum Output {
    Dir(PathBuf),
    File(PathBuf),
}

fn extract(
    pages: &[RawPage],
    target: Output,
    names: &[String],
    words: Option<&Path>,
) -> Result<()> {
    let mut registry = ExtractorRegistry::with_builtins();
    if let Some(path) = words {
        let list = stopwords::parse(&std::fs::read_to_string(path)?);
        let mut custom = ExtractorRegistry::default();
        for id in registry.ids() {
            if id.as_str() != "block_stopword" {
                custom.register(registry.get(id)?.clone())?;
            }
        }
        custom.register(Arc::new(BlockStopword::new(list, BlockParams::default())?))?;
        registry = custom;
    }
    let ids: Vec<ExtractorId> = if names.is_empty() {
        ExtractorId::builtins().to_vec()
    } else {
        names.iter().map(|n| ExtractorId::new(n.as_str())).collect()
    };
    for id in &ids {
        registry.get(id)?;
    }
    if matches!(target, Output::File(_)) && ids.len() != 1 {
        bail!("--out needs exactly one --extractor; use --out-dir for several");
    }
    let mut outputs: Vec<Vec<ExtractedDoc>> = vec![Vec::new(); ids.len()];
    for page in pages {
        let dom = build_dom(&page.html);
        for (slot, doc) in
            outputs
                .iter_mut()
                .zip(registry.run_on_dom(&dom, &page.page_id, &page.url, &ids)?)
        {
            if !doc.text.trim().is_empty() {
                slot.push(doc);
            }
        }
    }
    for (id, docs) in ids.iter().zip(&outputs) {
        let path = match &target {
            Output::Dir(dir) => {
                std::fs::create_dir_all(dir)?;
                dir.join(format!("{id}.jsonl"))
            }
            Output::File(f) => f.clone(),
        };
        write_jsonl(&path, docs)?;
        eprintln!("{id}: {} docs -> {}", docs.len(), path.display());
    }
    Ok(())
}

fn load_vocab(path: &Path) -> Result<Arc<BpeVocab>> {
    Ok(Arc::new(
        BpeVocab::load(path).with_context(|| format!("vocab {}", path.display()))?,
    ))
}

fn load_model(
    path: Option<PathBuf>,
    flag: &str,
    vocab: &Option<Arc<BpeVocab>>,
) -> Result<NGramLinearModel> {
    let path = path.with_context(|| format!("{flag} is required"))?;
    NGramLinearModel::load(&path, vocab.clone())
        .with_context(|| format!("model {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn page_filter(
    kind: FilterKind,
    pages: &[RawPage],
    docs: Vec<ExtractedDoc>,
    threshold: Option<f64>,
    model: Option<PathBuf>,
    html_model: Option<PathBuf>,
    text_model: Option<PathBuf>,
    vocab: Option<Arc<BpeVocab>>,
) -> Result<(Vec<ExtractedDoc>, Vec<DecisionRecord>)> {
    let decide: Box<dyn Fn(&RawPage) -> FilterDecision> = match kind {
        FilterKind::Tables => {
            let model = load_model(model, "--model", &vocab)?;
            model.scorer(POSITIVE_LABEL)?;
            let t = threshold.unwrap_or(TABLE_THRESHOLD);
            Box::new(move |p| {
                let scorer = model.scorer(POSITIVE_LABEL).expect("checked");
                table_pipeline(&find_tables(&build_dom(&p.html), &p.page_id), &scorer, t)
            })
        }
        _ => {
            let html = load_model(html_model, "--html-model", &vocab)?;
            let text = load_model(text_model, "--text-model", &vocab)?;
            html.scorer(CODE_LABEL)?;
            text.scorer(CODE_LABEL)?;
            let t = threshold.unwrap_or(CODE_THRESHOLD);
            Box::new(move |p| {
                let (h, x) = (
                    html.scorer(CODE_LABEL).expect("checked"),
                    text.scorer(CODE_LABEL).expect("checked"),
                );
                code_page_filter(&find_pre_blocks(&build_dom(&p.html), &p.page_id), &h, &x, t)
            })
        }
    };
    let filter = if matches!(kind, FilterKind::Tables) {
        "tables"
    } else {
        "code"
    };
    let mut kept_pages = HashSet::new();
    let mut records = Vec::new();
    for page in pages {
        let decision = decide(page);
        if decision.kept {
            kept_pages.insert(page.page_id.clone());
        }
        records.push(DecisionRecord {
            page_id: page.page_id.clone(),
            extractor: None,
            filter: filter.to_string(),
            decision,
        });
    }
    Ok((
        docs.into_iter()
            .filter(|d| kept_pages.contains(&d.page_id))
            .collect(),
        records,
    ))
}

fn doc_filter(
    kind: FilterKind,
    docs: Vec<ExtractedDoc>,
    threshold: Option<f64>,
    model: Option<PathBuf>,
    vocab: Option<Arc<BpeVocab>>,
) -> Result<(Vec<ExtractedDoc>, Vec<DecisionRecord>)> {
    let model = load_model(model, "--model", &vocab)?;
    let (label, name, t) = match kind {
        FilterKind::Quality => (
            QUALITY_LABEL,
            "quality",
            threshold.unwrap_or(QUALITY_THRESHOLDS[0]),
        ),
        _ => (
            ENGLISH_LABEL,
            "english",
            threshold.unwrap_or(ENGLISH_THRESHOLD),
        ),
    };
    let scorer = model.scorer(label)?;
    let mut kept = Vec::new();
    let mut records = Vec::new();
    for mut doc in docs {
        let decision = match kind {
            FilterKind::Quality => quality_filter(&mut doc, &scorer, t),
            _ => english_filter(&mut doc, &scorer, t),
        };
        let keep = decision.kept;
        records.push(DecisionRecord {
            page_id: doc.page_id.clone(),
            extractor: Some(doc.extractor.clone()),
            filter: name.to_string(),
            decision,
        });
        if keep {
            kept.push(doc);
        }
    }
    Ok((kept, records))
}

fn train_classifier(
    role: Role,
    out: &Path,
    pages: Option<PathBuf>,
    examples: Option<PathBuf>,
    domains: Option<PathBuf>,
    vocab: Option<PathBuf>,
    train_config: Option<PathBuf>,
) -> Result<()> {
    let vocab = vocab.as_deref().map(load_vocab).transpose()?;
    let config: TrainConfig = match train_config {
        Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)
            .with_context(|| format!("{}", p.display()))?,
        None => TrainConfig::default(),
    };
    let read_pages = || -> Result<Vec<RawPage>> {
        read_jsonl(pages.as_deref().context("--pages is required")?).map_err(Into::into)
    };
    let read_domains = || -> Result<DomainLabels> {
        let path = domains.as_deref().context("--domains is required")?;
        Ok(DomainLabels::parse(&std::fs::read_to_string(path)?)?)
    };
    let subword = |v: &Option<Arc<BpeVocab>>| -> Result<Tokenizer> {
        Ok(Tokenizer::Subword(
            v.clone().context("--vocab is required for this role")?,
        ))
    };
    let (data, tokenizer) = match role {
        Role::Table => (
            table_examples(&read_pages()?, &UrlLabelRules::default()),
            subword(&vocab)?,
        ),
        Role::CodeHtml => (
            code_examples(&read_pages()?, &read_domains()?, BlockView::Html),
            subword(&vocab)?,
        ),
        Role::CodeText => (
            code_examples(&read_pages()?, &read_domains()?, BlockView::Text),
            vocab.clone().map_or(Tokenizer::Word, Tokenizer::Subword),
        ),
        Role::Quality | Role::Lang => {
            let path = examples
                .as_deref()
                .context("--examples is required for this role")?;
            let data: Vec<LabeledExample> = read_jsonl(path)?;
            (
                data,
                vocab.clone().map_or(Tokenizer::Word, Tokenizer::Subword),
            )
        }
    };
    let required = match role {
        Role::Table => POSITIVE_LABEL,
        Role::CodeHtml | Role::CodeText => CODE_LABEL,
        Role::Quality => QUALITY_LABEL,
        Role::Lang => ENGLISH_LABEL,
    };
    if !data.iter().any(|e| e.label == required) {
        bail!("no training example carries the `{required}` label");
    }
    let (model, report) = train(&data, &config, tokenizer)?;
    model.save(out)?;
    eprintln!(
        "trained on {} examples, labels {:?}, final loss {:.4}",
        report.examples, report.labels, report.final_loss
    );
    Ok(())
}

fn union(plan_path: &Path, out: &Path) -> Result<()> {
    let plan: UnionPlan = toml::from_str(&std::fs::read_to_string(plan_path)?)
        .with_context(|| format!("plan {}", plan_path.display()))?;
    plan.validate()?;
    let base = plan_path.parent().unwrap_or(Path::new("."));
    let mut datasets = Vec::new();
    for input in &plan.inputs {
        let path = input
            .path
            .as_ref()
            .with_context(|| format!("input `{}` has no path", input.dataset))?;
        let docs: Vec<ExtractedDoc> = read_jsonl(&base.join(path))?;
        let docs = docs
            .into_iter()
            .filter(|d| d.quality_score.is_none_or(|s| s >= input.quality_threshold))
            .collect();
        datasets.push((input.extractor.clone(), docs));
    }
    let merged = run_union(&plan, &datasets, &MinHashConfig::default())?;
    eprintln!("{}: {} docs", plan.name, merged.len());
    write_jsonl(out, &merged)?;
    Ok(())
}

fn report(
    specs: &[String],
    baseline: Option<String>,
    imbalance: ImbalanceConfig,
    json: Option<&Path>,
) -> Result<()> {
    let mut named = Vec::new();
    for spec in specs {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("`{spec}` is not name=path"))?;
        let docs: Vec<ExtractedDoc> = read_jsonl(Path::new(path))?;
        named.push((name.to_string(), docs));
    }
    let tokens: Vec<DatasetTokens> = named
        .iter()
        .map(|(n, docs)| DatasetTokens::new(n.clone(), docs.iter().map(|d| d.token_count).sum()))
        .collect();
    let sets: Vec<(String, std::collections::BTreeSet<_>)> = named
        .iter()
        .map(|(n, docs)| (n.clone(), docs.iter().map(|d| d.page_id.clone()).collect()))
        .collect();
    let venn = if (2..=3).contains(&sets.len()) {
        let refs: Vec<_> = sets.iter().map(|(n, s)| (n.as_str(), s)).collect();
        Some(venn_report(&refs)?)
    } else {
        None
    };
    let groups: Vec<(ExtractorId, Vec<String>)> = named
        .iter()
        .map(|(n, docs)| {
            (
                ExtractorId::new(n.as_str()),
                docs.iter().map(|d| d.url.clone()).collect(),
            )
        })
        .collect();
    let baseline = baseline.unwrap_or_else(|| named[0].0.clone());
    let report = CorpusReport {
        yields: Some(yield_report(&tokens, &baseline)?),
        datasets: tokens,
        venn,
        imbalance: Some(domain_imbalance(&groups, &imbalance)?),
    };
    print!("{}", corpus_core::pipeline::render_report_text(&report));
    if let Some(path) = json {
        std::fs::write(path, report.to_json() + "\n")?;
    }
    Ok(())
}
