//! Stopword-density block classification.
//!
//! The page is cut into blocks at block-level element boundaries. Each block
//! gets a context-free class from its length, stopword density and link
//! density; `short` and `near_good` blocks are then resolved from their
//! nearest good/bad neighbours. Output is the good blocks joined by blank
//! lines. `table` and `pre` subtrees never produce blocks.

use std::collections::HashSet;

use super::{ExtractError, Extractor, ExtractorId};
use crate::html::query::{walk, Step};
use crate::html::{collapse_whitespace, is_block, DomTree, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    pub length_low: usize,
    pub length_high: usize,
    pub stopwords_low: f64,
    pub stopwords_high: f64,
    pub max_link_density: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams {
            length_low: 70,
            length_high: 200,
            stopwords_low: 0.30,
            stopwords_high: 0.32,
            max_link_density: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockClass {
    Good,
    Bad,
    Short,
    NearGood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub text: String,
    pub dom_path: String,
    pub link_chars: usize,
    pub initial: BlockClass,
    pub class: BlockClass,
}

impl Block {
    pub fn chars(&self) -> usize {
        self.text.chars().count()
    }

    pub fn link_density(&self) -> f64 {
        let len = self.chars();
        if len == 0 {
            0.0
        } else {
            self.link_chars as f64 / len as f64
        }
    }
}

fn is_skipped(tag: &str) -> bool {
    matches!(
        tag,
        "head"
            | "script"
            | "style"
            | "template"
            | "noscript"
            | "form"
            | "iframe"
            | "object"
            | "embed"
            | "applet"
            | "svg"
            | "math"
            | "table"
            | "pre"
    )
}

#[derive(Default)]
struct Segmenter {
    blocks: Vec<(String, String, usize)>,
    path: Vec<String>,
    text: String,
    link_text: String,
    link_depth: usize,
}

impl Segmenter {
    fn flush(&mut self) {
        let text = collapse_whitespace(&self.text);
        if !text.is_empty() {
            let link_chars = collapse_whitespace(&self.link_text).chars().count();
            self.blocks.push((text, self.path.join("."), link_chars));
        }
        self.text.clear();
        self.link_text.clear();
    }
}

fn segment(dom: &DomTree) -> Vec<(String, String, usize)> {
    let mut seg = Segmenter::default();
    walk(dom, dom.body(), |step| match step {
        Step::Enter(id) => match &dom.node(id).kind {
            NodeKind::Text(t) => {
                seg.text.push_str(t);
                if seg.link_depth > 0 {
                    seg.link_text.push_str(t);
                }
                true
            }
            NodeKind::Comment(_) => false,
            NodeKind::Element { tag, .. } if is_skipped(tag) => {
                seg.flush();
                false
            }
            NodeKind::Element { tag, .. } => {
                if tag == "br" {
                    seg.text.push(' ');
                    return false;
                }
                if is_block(tag) {
                    seg.flush();
                }
                if tag == "a" {
                    seg.link_depth += 1;
                }
                seg.path.push(tag.clone());
                true
            }
        },
        Step::Leave(id) => {
            if let Some(tag) = dom.tag(id) {
                seg.path.pop();
                if tag == "a" {
                    seg.link_depth -= 1;
                }
                if is_block(tag) {
                    seg.flush();
                }
            }
            true
        }
    });
    seg.flush();
    seg.blocks
}

fn stopword_density(text: &str, stopwords: &HashSet<String>) -> f64 {
    let mut words = 0usize;
    let mut stops = 0usize;
    for raw in text.split_whitespace() {
        words += 1;
        let word = raw
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        if stopwords.contains(&word) {
            stops += 1;
        }
    }
    if words == 0 {
        0.0
    } else {
        stops as f64 / words as f64
    }
}

fn context_free(
    text: &str,
    dom_path: &str,
    link_chars: usize,
    stopwords: &HashSet<String>,
    params: &BlockParams,
) -> BlockClass {
    let length = text.chars().count();
    let link_density = if length == 0 {
        0.0
    } else {
        link_chars as f64 / length as f64
    };
    let density = stopword_density(text, stopwords);
    if link_density > params.max_link_density
        || text.contains('\u{a9}')
        || text.contains("&copy")
        || dom_path.split('.').any(|t| t == "select")
    {
        BlockClass::Bad
    } else if length < params.length_low {
        if link_chars > 0 {
            BlockClass::Bad
        } else {
            BlockClass::Short
        }
    } else if density >= params.stopwords_high {
        if length > params.length_high {
            BlockClass::Good
        } else {
            BlockClass::NearGood
        }
    } else if density >= params.stopwords_low {
        BlockClass::NearGood
    } else {
        BlockClass::Bad
    }
}

/// Nearest classified neighbour in one direction; page edges count as bad.
fn neighbour(
    classes: &[BlockClass],
    from: usize,
    forward: bool,
    ignore_near_good: bool,
) -> BlockClass {
    let matches = |c: BlockClass| match c {
        BlockClass::Good | BlockClass::Bad => true,
        BlockClass::NearGood => !ignore_near_good,
        BlockClass::Short => false,
    };
    let found = if forward {
        classes[from + 1..].iter().copied().find(|&c| matches(c))
    } else {
        classes[..from].iter().rev().copied().find(|&c| matches(c))
    };
    found.unwrap_or(BlockClass::Bad)
}

fn revise(classes: &mut [BlockClass]) {
    // Short blocks first, against the context-free classes.
    let snapshot = classes.to_vec();
    for i in 0..classes.len() {
        if snapshot[i] != BlockClass::Short {
            continue;
        }
        let prev = neighbour(&snapshot, i, false, true);
        let next = neighbour(&snapshot, i, true, true);
        classes[i] = match (prev, next) {
            (BlockClass::Good, BlockClass::Good) => BlockClass::Good,
            (BlockClass::Bad, BlockClass::Bad) => BlockClass::Bad,
            _ => {
                let near_good_behind = prev == BlockClass::Bad
                    && neighbour(&snapshot, i, false, false) == BlockClass::NearGood;
                let near_good_ahead = next == BlockClass::Bad
                    && neighbour(&snapshot, i, true, false) == BlockClass::NearGood;
                if near_good_behind || near_good_ahead {
                    BlockClass::Good
                } else {
                    BlockClass::Bad
                }
            }
        };
    }
    // Then near-good blocks adopt their neighbours' verdict.
    let snapshot = classes.to_vec();
    for i in 0..classes.len() {
        if snapshot[i] != BlockClass::NearGood {
            continue;
        }
        let prev = neighbour(&snapshot, i, false, true);
        let next = neighbour(&snapshot, i, true, true);
        classes[i] = if prev == BlockClass::Bad && next == BlockClass::Bad {
            BlockClass::Bad
        } else {
            BlockClass::Good
        };
    }
}

/// Segments and classifies every block of the page.
pub fn classify_blocks(
    dom: &DomTree,
    stopwords: &HashSet<String>,
    params: &BlockParams,
) -> Result<Vec<Block>, ExtractError> {
    if stopwords.is_empty() {
        return Err(ExtractError::EmptyStopwords);
    }
    let raw = segment(dom);
    let initial: Vec<BlockClass> = raw
        .iter()
        .map(|(text, path, links)| context_free(text, path, *links, stopwords, params))
        .collect();
    let mut classes = initial.clone();
    revise(&mut classes);
    Ok(raw
        .into_iter()
        .zip(initial.into_iter().zip(classes))
        .map(|((text, dom_path, link_chars), (initial, class))| Block {
            text,
            dom_path,
            link_chars,
            initial,
            class,
        })
        .collect())
}

pub fn extract_block_stopword(
    dom: &DomTree,
    stopwords: &HashSet<String>,
    params: &BlockParams,
) -> Result<String, ExtractError> {
    let blocks = classify_blocks(dom, stopwords, params)?;
    Ok(blocks
        .into_iter()
        .filter(|b| b.class == BlockClass::Good)
        .map(|b| b.text)
        .collect::<Vec<_>>()
        .join("\n\n"))
}

#[derive(Debug, Clone)]
pub struct BlockStopword {
    stopwords: HashSet<String>,
    params: BlockParams,
}

impl BlockStopword {
    pub fn new(stopwords: HashSet<String>, params: BlockParams) -> Result<Self, ExtractError> {
        if stopwords.is_empty() {
            return Err(ExtractError::EmptyStopwords);
        }
        Ok(BlockStopword { stopwords, params })
    }
}

impl Extractor for BlockStopword {
    fn id(&self) -> ExtractorId {
        ExtractorId::new(ExtractorId::BLOCK_STOPWORD)
    }

    fn extract(&self, dom: &DomTree) -> String {
        extract_block_stopword(dom, &self.stopwords, &self.params)
            .expect("validated at construction")
    }
}
