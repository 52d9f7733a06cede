//! Stopword lists for the block classifier.

use std::collections::HashSet;

pub const ENGLISH_VERSION: &str = "stopwords-en-v1";

static ENGLISH: &str = include_str!("../../data/stopwords-en-v1.txt");

/// Parses a list with one word per line; `#` starts a comment line.
pub fn parse(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn english() -> HashSet<String> {
    parse(ENGLISH)
}
