//! Pluggable plaintext extraction.
//!
//! Three built-ins cover the behaviours that matter downstream:
//!
//! * `block_stopword` keeps paragraphs that look like prose (length,
//!   stopword density, link density) and drops everything inside `table`
//!   and `pre`.
//! * `whitespace_table` keeps most visible text, renders table rows as
//!   space-joined cells and copies `pre` content byte-for-byte.
//! * `markdown_table` renders tables as pipe-delimited markdown and squeezes
//!   `pre` content onto one line.

mod block_stopword;
mod render;
pub mod stopwords;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::tokenize::count_words;
use crate::html::{build_dom, DomTree};
use crate::warc::{PageId, RawPage};

pub use block_stopword::{
    classify_blocks, extract_block_stopword, Block, BlockClass, BlockParams, BlockStopword,
};
pub use render::{
    extract_markdown_table, extract_whitespace_table, MarkdownTable, WhitespaceTable,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("stopword set is empty")]
    EmptyStopwords,
    #[error("extractor `{0}` is not registered")]
    Unregistered(ExtractorId),
    #[error("extractor `{0}` is already registered")]
    Duplicate(ExtractorId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtractorId(String);

impl ExtractorId {
    pub const BLOCK_STOPWORD: &'static str = "block_stopword";
    pub const WHITESPACE_TABLE: &'static str = "whitespace_table";
    pub const MARKDOWN_TABLE: &'static str = "markdown_table";

    pub fn new(name: impl Into<String>) -> Self {
        ExtractorId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn builtins() -> [ExtractorId; 3] {
        [
            ExtractorId::new(Self::WHITESPACE_TABLE),
            ExtractorId::new(Self::MARKDOWN_TABLE),
            ExtractorId::new(Self::BLOCK_STOPWORD),
        ]
    }
}

impl fmt::Display for ExtractorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ExtractorId {
    fn from(s: &str) -> Self {
        ExtractorId::new(s)
    }
}

/// One extractor's rendering of one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedDoc {
    pub page_id: PageId,
    pub extractor: ExtractorId,
    pub url: String,
    pub text: String,
    pub token_count: u64,
    pub quality_score: Option<f64>,
    pub lang_score: Option<f64>,
}

impl ExtractedDoc {
    pub fn new(
        page_id: PageId,
        extractor: ExtractorId,
        url: impl Into<String>,
        text: String,
    ) -> Self {
        ExtractedDoc {
            page_id,
            extractor,
            url: url.into(),
            token_count: count_words(&text),
            text,
            quality_score: None,
            lang_score: None,
        }
    }
}

/// A pure DOM-to-text function. Implementations must be deterministic.
pub trait Extractor: Send + Sync {
    fn id(&self) -> ExtractorId;
    fn extract(&self, dom: &DomTree) -> String;
}

#[derive(Clone, Default)]
pub struct ExtractorRegistry {
    extractors: BTreeMap<ExtractorId, Arc<dyn Extractor>>,
}

impl fmt::Debug for ExtractorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.extractors.keys()).finish()
    }
}

impl ExtractorRegistry {
    /// Registry holding the three built-ins with default parameters and the
    /// shipped English stopword list.
    pub fn with_builtins() -> Self {
        let mut registry = ExtractorRegistry::default();
        let stopword = BlockStopword::new(stopwords::english(), BlockParams::default())
            .expect("shipped stopword list is non-empty");
        for e in [
            Arc::new(stopword) as Arc<dyn Extractor>,
            Arc::new(WhitespaceTable),
            Arc::new(MarkdownTable),
        ] {
            registry.register(e).expect("built-in names are distinct");
        }
        registry
    }

    pub fn register(&mut self, extractor: Arc<dyn Extractor>) -> Result<(), ExtractError> {
        let id = extractor.id();
        if self.extractors.contains_key(&id) {
            return Err(ExtractError::Duplicate(id));
        }
        self.extractors.insert(id, extractor);
        Ok(())
    }

    pub fn get(&self, id: &ExtractorId) -> Result<&Arc<dyn Extractor>, ExtractError> {
        self.extractors
            .get(id)
            .ok_or_else(|| ExtractError::Unregistered(id.clone()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &ExtractorId> {
        self.extractors.keys()
    }

    /// Runs each requested extractor over one parsed page.
    pub fn run_on_dom(
        &self,
        dom: &DomTree,
        page_id: &PageId,
        url: &str,
        ids: &[ExtractorId],
    ) -> Result<Vec<ExtractedDoc>, ExtractError> {
        let extractors = ids
            .iter()
            .map(|id| self.get(id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ids
            .iter()
            .zip(extractors)
            .map(|(id, e)| ExtractedDoc::new(page_id.clone(), id.clone(), url, e.extract(dom)))
            .collect())
    }
}

/// Parses a raw page once and extracts it with every requested extractor.
pub fn run_extractors(
    registry: &ExtractorRegistry,
    page: &RawPage,
    ids: &[ExtractorId],
) -> Result<Vec<ExtractedDoc>, ExtractError> {
    for id in ids {
        registry.get(id)?;
    }
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let dom = build_dom(&page.html);
    registry.run_on_dom(&dom, &page.page_id, &page.url, ids)
}
