use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FilterDecision, FilterError, Reason};
use crate::classify::Scorer;
use crate::html::TableCandidate;

pub const MIN_ROWS: usize = 10;
pub const MIN_COLUMNS: usize = 3;
pub const POSITIVE_LABEL: &str = "positive";
pub const NEGATIVE_LABEL: &str = "negative";

/// Structural rules, checked in order: a header cell, a constant number of
/// cells per row, then at least [`MIN_ROWS`] rows and [`MIN_COLUMNS`]
/// columns (both required).
pub fn structural_table_filter(t: &TableCandidate) -> FilterDecision {
    let max_columns = t.column_counts.iter().copied().max().unwrap_or(0);
    let scores = BTreeMap::from([
        ("n_rows".to_string(), t.n_rows as f64),
        ("max_columns".to_string(), max_columns as f64),
    ]);
    let consistent = t.column_counts.windows(2).all(|w| w[0] == w[1]);
    let reason = if !t.has_header {
        Some(Reason::NoHeader)
    } else if !consistent {
        Some(Reason::InconsistentColumns)
    } else if t.n_rows < MIN_ROWS {
        Some(Reason::RowCount)
    } else if max_columns < MIN_COLUMNS {
        Some(Reason::ColumnCount)
    } else {
        None
    };
    match reason {
        Some(r) => FilterDecision::reject(r, scores),
        None => FilterDecision::keep(scores),
    }
}

/// Keeps the page iff some table scores at least `threshold`. Per-table
/// scores are recorded as `table_<i>`.
pub fn table_page_filter(
    tables: &[TableCandidate],
    scorer: &dyn Scorer,
    threshold: f64,
) -> FilterDecision {
    if tables.is_empty() {
        return FilterDecision::reject(Reason::NoTables, BTreeMap::new());
    }
    let mut scores = BTreeMap::new();
    let mut best = f64::NEG_INFINITY;
    for (i, t) in tables.iter().enumerate() {
        let s = scorer.score(&t.table_html);
        best = best.max(s);
        scores.insert(format!("table_{i}"), s);
    }
    FilterDecision::threshold(best >= threshold, Reason::TableScore, scores)
}

/// Structural filter on every table, then the content filter on survivors.
pub fn table_pipeline(
    tables: &[TableCandidate],
    scorer: &dyn Scorer,
    threshold: f64,
) -> FilterDecision {
    let survivors: Vec<TableCandidate> = tables
        .iter()
        .filter(|t| structural_table_filter(t).kept)
        .cloned()
        .collect();
    table_page_filter(&survivors, scorer, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlLabel {
    Positive,
    Negative,
    Unlabeled,
}

impl UrlLabel {
    /// Class name for training, if labelled.
    pub fn class(self) -> Option<&'static str> {
        match self {
            UrlLabel::Positive => Some(POSITIVE_LABEL),
            UrlLabel::Negative => Some(NEGATIVE_LABEL),
            UrlLabel::Unlabeled => None,
        }
    }
}

/// URL patterns for weakly labelling tables.
///
/// Subwords match at token boundaries of the lower-cased URL (so `forum`
/// does not match `forums`); a subword ending in punctuation, such as
/// `members-`, only needs a boundary before it. Suffixes are tested against
/// the URL without trailing slashes. Domains match the host or any
/// subdomain of it, and a leading `*.` is accepted (`*.gov`). Substrings
/// match anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UrlLabelRules {
    pub negative_subwords: Vec<String>,
    pub negative_suffixes: Vec<String>,
    pub negative_domains: Vec<String>,
    pub positive_domains: Vec<String>,
    pub positive_subwords: Vec<String>,
    pub positive_substrings: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for UrlLabelRules {
    fn default() -> Self {
        UrlLabelRules {
            negative_subwords: strings(&[
                "shop",
                "products",
                "cart",
                "items",
                "store",
                "promotion",
                "productdisplay",
                "forum",
                "forums",
                "users",
                "members-",
            ]),
            negative_suffixes: strings(&["metrics"]),
            negative_domains: strings(&["accuweather.com", "patents.google.com"]),
            positive_domains: strings(&["en.wikipedia.org", "*.gov"]),
            positive_subwords: strings(&["statistics", "database", "dataset", "article"]),
            positive_substrings: strings(&["docs."]),
        }
    }
}

fn contains_subword(haystack: &str, word: &str) -> bool {
    let word = word.to_lowercase();
    let needs_right_boundary = word.chars().last().is_some_and(|c| c.is_alphanumeric());
    haystack.match_indices(&word).any(|(i, m)| {
        let left_ok = haystack[..i]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let right_ok = !needs_right_boundary
            || haystack[i + m.len()..]
                .chars()
                .next()
                .is_none_or(|c| !c.is_alphanumeric());
        left_ok && right_ok
    })
}

fn host_matches(host: &str, pattern: &str) -> bool {
    let pattern = pattern.to_lowercase();
    let domain = pattern.strip_prefix("*.").unwrap_or(&pattern);
    host == domain
        || host
            .strip_suffix(domain)
            .is_some_and(|rest| rest.ends_with('.'))
}

impl UrlLabelRules {
    pub fn validate(&self) -> Result<(), FilterError> {
        let lists: [(&'static str, &Vec<String>); 6] = [
            ("negative_subwords", &self.negative_subwords),
            ("negative_suffixes", &self.negative_suffixes),
            ("negative_domains", &self.negative_domains),
            ("positive_domains", &self.positive_domains),
            ("positive_subwords", &self.positive_subwords),
            ("positive_substrings", &self.positive_substrings),
        ];
        for (name, list) in lists {
            if list.is_empty() || list.iter().any(|s| s.trim().is_empty()) {
                return Err(FilterError::EmptyRule(name));
            }
        }
        Ok(())
    }

    pub fn is_negative(&self, url: &str) -> bool {
        let lower = url.to_lowercase();
        let host = host_of(&lower);
        let trimmed = lower.trim_end_matches('/');
        self.negative_subwords
            .iter()
            .any(|w| contains_subword(&lower, w))
            || self
                .negative_suffixes
                .iter()
                .any(|s| trimmed.ends_with(&s.to_lowercase()))
            || self.negative_domains.iter().any(|d| host_matches(&host, d))
    }

    pub fn is_positive(&self, url: &str) -> bool {
        let lower = url.to_lowercase();
        let host = host_of(&lower);
        self.positive_domains.iter().any(|d| host_matches(&host, d))
            || self
                .positive_subwords
                .iter()
                .any(|w| contains_subword(&lower, w))
            || self
                .positive_substrings
                .iter()
                .any(|s| lower.contains(&s.to_lowercase()))
    }
}

fn host_of(url: &str) -> String {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(|h| h.trim_end_matches('.').to_string()))
        .unwrap_or_default()
}

/// Negative rules first; a URL matching both sides stays unlabelled.
pub fn label_table_url(url: &str, rules: &UrlLabelRules) -> UrlLabel {
    match (rules.is_negative(url), rules.is_positive(url)) {
        (true, false) => UrlLabel::Negative,
        (false, true) => UrlLabel::Positive,
        _ => UrlLabel::Unlabeled,
    }
}
