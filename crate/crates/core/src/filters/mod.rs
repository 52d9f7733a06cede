//! Page selection: table and code pipelines, quality and language
//! thresholds, and URL/domain weak labelling.
//!
//! Every filter is a pure function returning a [`FilterDecision`]. Score
//! comparisons are inclusive (`score >= threshold` keeps). Model-backed
//! filters take a [`Scorer`]; building one from an untrained model fails,
//! so the filters themselves cannot.

mod code;
mod tables;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Scorer;
use crate::extract::ExtractedDoc;

pub use code::{
    code_block_score, code_page_filter, label_code_domains, BlockView, DomainLabel, DomainLabels,
    CODE_LABEL, NONCODE_LABEL,
};
pub use tables::{
    label_table_url, structural_table_filter, table_page_filter, table_pipeline, UrlLabel,
    UrlLabelRules, MIN_COLUMNS, MIN_ROWS, NEGATIVE_LABEL, POSITIVE_LABEL,
};

pub const TABLE_THRESHOLD: f64 = 0.75;
pub const CODE_THRESHOLD: f64 = 0.9;
pub const ENGLISH_THRESHOLD: f64 = 0.25;
/// Quality tiers used for the union plans.
pub const QUALITY_THRESHOLDS: [f64; 3] = [0.11, 0.15, 0.18];
pub const QUALITY_LABEL: &str = "hq";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("domain file line {line}: {message}")]
    DomainFile { line: usize, message: String },
    #[error("URL rules: `{0}` must not be empty")]
    EmptyRule(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    NoHeader,
    InconsistentColumns,
    RowCount,
    ColumnCount,
    NoTables,
    TableScore,
    NoPreBlocks,
    CodeScore,
    QualityScore,
    LanguageScore,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::NoHeader => "no_header",
            Reason::InconsistentColumns => "inconsistent_columns",
            Reason::RowCount => "row_count",
            Reason::ColumnCount => "column_count",
            Reason::NoTables => "no_tables",
            Reason::TableScore => "table_score",
            Reason::NoPreBlocks => "no_pre_blocks",
            Reason::CodeScore => "code_score",
            Reason::QualityScore => "quality_score",
            Reason::LanguageScore => "language_score",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reason>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

impl FilterDecision {
    pub fn keep(scores: BTreeMap<String, f64>) -> Self {
        FilterDecision {
            kept: true,
            reason: None,
            scores,
        }
    }

    pub fn reject(reason: Reason, scores: BTreeMap<String, f64>) -> Self {
        FilterDecision {
            kept: false,
            reason: Some(reason),
            scores,
        }
    }

    fn threshold(kept: bool, reason: Reason, scores: BTreeMap<String, f64>) -> Self {
        if kept {
            Self::keep(scores)
        } else {
            Self::reject(reason, scores)
        }
    }
}

/// Keeps `doc` iff `P(hq) >= threshold`; records the score on the doc.
pub fn quality_filter(
    doc: &mut ExtractedDoc,
    scorer: &dyn Scorer,
    threshold: f64,
) -> FilterDecision {
    let score = scorer.score(&doc.text);
    doc.quality_score = Some(score);
    FilterDecision::threshold(
        score >= threshold,
        Reason::QualityScore,
        BTreeMap::from([("quality".into(), score)]),
    )
}

/// Keeps `doc` iff `P(en) >= threshold`; records the score on the doc.
pub fn english_filter(
    doc: &mut ExtractedDoc,
    scorer: &dyn Scorer,
    threshold: f64,
) -> FilterDecision {
    let score = scorer.score(&doc.text);
    doc.lang_score = Some(score);
    FilterDecision::threshold(
        score >= threshold,
        Reason::LanguageScore,
        BTreeMap::from([("lang".into(), score)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::ExtractorId;
    use crate::warc::PageId;

    fn doc() -> ExtractedDoc {
        ExtractedDoc::new(
            PageId::from_joined("<urn:uuid:a>2020-01-01T00:00:00Z"),
            ExtractorId::new(ExtractorId::BLOCK_STOPWORD),
            "http://example.com/",
            "some text".into(),
        )
    }

    fn fixed(v: f64) -> impl Fn(&str) -> f64 + Sync {
        move |_: &str| v
    }

    #[test]
    fn quality_boundaries() {
        assert!(quality_filter(&mut doc(), &fixed(0.12), 0.11).kept);
        assert!(quality_filter(&mut doc(), &fixed(0.11), 0.11).kept);
        let mut d = doc();
        let decision = quality_filter(&mut d, &fixed(0.10), 0.15);
        assert!(!decision.kept);
        assert_eq!(decision.reason, Some(Reason::QualityScore));
        assert_eq!(d.quality_score, Some(0.10));
    }

    #[test]
    fn english_boundaries() {
        let mut d = doc();
        assert!(english_filter(&mut d, &fixed(0.3), ENGLISH_THRESHOLD).kept);
        assert_eq!(d.lang_score, Some(0.3));
        assert!(!english_filter(&mut doc(), &fixed(0.2), ENGLISH_THRESHOLD).kept);
        assert!(english_filter(&mut doc(), &fixed(0.0), 0.0).kept);
    }

    #[test]
    fn decision_json_uses_snake_case_reason() {
        let d = FilterDecision::reject(Reason::InconsistentColumns, BTreeMap::new());
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"inconsistent_columns\""));
        let kept = serde_json::to_string(&FilterDecision::keep(BTreeMap::new())).unwrap();
        assert!(!kept.contains("reason"));
    }
}
