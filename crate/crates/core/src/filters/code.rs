use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FilterDecision, FilterError, Reason};
use crate::classify::{LabeledExample, Scorer};
use crate::html::PreBlock;

pub const CODE_LABEL: &str = "code";
pub const NONCODE_LABEL: &str = "noncode";

/// Mean of the HTML-view and text-view code probabilities.
pub fn code_block_score(block: &PreBlock, html: &dyn Scorer, text: &dyn Scorer) -> f64 {
    (html.score(&block.pre_html) + text.score(&block.visible_text)) / 2.0
}

/// Keeps the page iff some block's ensemble score reaches `threshold`.
pub fn code_page_filter(
    blocks: &[PreBlock],
    html: &dyn Scorer,
    text: &dyn Scorer,
    threshold: f64,
) -> FilterDecision {
    if blocks.is_empty() {
        return FilterDecision::reject(Reason::NoPreBlocks, BTreeMap::new());
    }
    let mut scores = BTreeMap::new();
    let mut kept = false;
    for (i, b) in blocks.iter().enumerate() {
        let s = code_block_score(b, html, text);
        kept |= s >= threshold;
        scores.insert(format!("block_{i}"), s);
    }
    FilterDecision::threshold(kept, Reason::CodeScore, scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainLabel {
    Code,
    Noncode,
    Skip,
}

impl FromStr for DomainLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "code" => Ok(DomainLabel::Code),
            "noncode" => Ok(DomainLabel::Noncode),
            "skip" => Ok(DomainLabel::Skip),
            _ => Err(()),
        }
    }
}

/// Host labels read from `host<TAB>label` lines. Blank lines and lines
/// starting with `#` are ignored. A label applies to the host and its
/// subdomains; the most specific entry wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainLabels {
    hosts: HashMap<String, DomainLabel>,
}

impl DomainLabels {
    pub fn parse(text: &str) -> Result<Self, FilterError> {
        let mut hosts = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: &str| FilterError::DomainFile {
                line,
                message: message.to_string(),
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split('\t');
            let (Some(host), Some(label), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(err("expected `host<TAB>label`"));
            };
            let host = host.trim().to_lowercase();
            if host.is_empty() || host.contains(char::is_whitespace) {
                return Err(err("invalid host"));
            }
            let label = label
                .trim()
                .parse()
                .map_err(|_| err("label must be code, noncode or skip"))?;
            if hosts.insert(host, label).is_some() {
                return Err(err("duplicate host"));
            }
        }
        Ok(DomainLabels { hosts })
    }

    pub fn len(&self) -> usize {
        self.hosts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hosts.is_empty()
    }

    pub fn label_for_host(&self, host: &str) -> Option<DomainLabel> {
        let host = host.trim_end_matches('.').to_lowercase();
        let mut rest = host.as_str();
        loop {
            if let Some(&l) = self.hosts.get(rest) {
                return Some(l);
            }
            rest = rest.split_once('.')?.1;
        }
    }

    pub fn label_for_url(&self, url: &str) -> Option<DomainLabel> {
        let parsed = url::Url::parse(url).ok()?;
        self.label_for_host(parsed.host_str()?)
    }
}

/// Which rendering of a `pre` block becomes the training text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockView {
    Html,
    Text,
}

/// Weak labels for `(source url, block)` pairs: a child `<code>` or a code
/// domain gives `code`, a noncode domain gives `noncode`, anything else
/// (skip and unlisted hosts) is omitted.
pub fn label_code_domains(
    domains: &DomainLabels,
    blocks: &[(String, PreBlock)],
    view: BlockView,
) -> Vec<LabeledExample> {
    blocks
        .iter()
        .filter_map(|(url, block)| {
            let label = if block.has_code_child {
                CODE_LABEL
            } else {
                match domains.label_for_url(url)? {
                    DomainLabel::Code => CODE_LABEL,
                    DomainLabel::Noncode => NONCODE_LABEL,
                    DomainLabel::Skip => return None,
                }
            };
            let text = match view {
                BlockView::Html => &block.pre_html,
                BlockView::Text => &block.visible_text,
            };
            Some(LabeledExample::new(text.clone(), label))
        })
        .collect()
}
