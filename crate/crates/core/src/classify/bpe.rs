//! Byte-level BPE over a rank table.
//!
//! The vocabulary file uses the `tiktoken` layout: one `<base64 token>
//! <rank>` pair per line, where the rank doubles as the token id and as the
//! merge priority. All 256 single bytes must be present. Text is first cut
//! into pieces by a GPT-2 style split pattern; each piece is then merged
//! pairwise, lowest rank first, until no adjacent pair forms a known token.

use std::collections::HashMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use regex::Regex;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SPLIT_PATTERN: &str = r"'(?:[sdmt]|ll|ve|re)| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: expected `<base64> <rank>`")]
    Format { line: usize },
    #[error("line {line}: invalid base64 token")]
    Base64 { line: usize },
    #[error("line {line}: invalid rank")]
    Rank { line: usize },
    #[error("line {line}: duplicate token or rank")]
    Duplicate { line: usize },
    #[error("single-byte token {0:#04x} is missing")]
    MissingByte(u8),
    #[error("reading vocabulary: {0}")]
    Io(std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BpeVocab {
    ranks: HashMap<Vec<u8>, u32>,
    digest: [u8; 32],
    split: Regex,
}

impl BpeVocab {
    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut ranks = HashMap::new();
        let mut seen_ranks = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let (token, rank) = raw.split_once(' ').ok_or(VocabError::Format { line })?;
            let token = STANDARD
                .decode(token.as_bytes())
                .map_err(|_| VocabError::Base64 { line })?;
            if token.is_empty() {
                return Err(VocabError::Base64 { line });
            }
            let rank: u32 = rank.trim().parse().map_err(|_| VocabError::Rank { line })?;
            if !seen_ranks.insert(rank) || ranks.insert(token, rank).is_some() {
                return Err(VocabError::Duplicate { line });
            }
        }
        for b in 0..=255u8 {
            if !ranks.contains_key(&[b][..]) {
                return Err(VocabError::MissingByte(b));
            }
        }
        let digest = Sha256::digest(text.as_bytes()).into();
        Ok(BpeVocab {
            ranks,
            digest,
            split: Regex::new(SPLIT_PATTERN).expect("split pattern compiles"),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::parse(&std::fs::read_to_string(path).map_err(VocabError::Io)?)
    }

    /// SHA-256 of the vocabulary file text; models record it.
    pub fn digest(&self) -> [u8; 32] {
        self.digest
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn rank(&self, token: &[u8]) -> Option<u32> {
        self.ranks.get(token).copied()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for m in self.split.find_iter(text) {
            self.encode_piece(m.as_str().as_bytes(), &mut out);
        }
        out
    }

    fn encode_piece(&self, piece: &[u8], out: &mut Vec<u32>) {
        if let Some(r) = self.rank(piece) {
            out.push(r);
            return;
        }
        // Boundaries of the current parts; part i is piece[bounds[i]..bounds[i + 1]].
        let mut bounds: Vec<usize> = (0..=piece.len()).collect();
        loop {
            let best = (0..bounds.len().saturating_sub(2))
                .filter_map(|i| self.rank(&piece[bounds[i]..bounds[i + 2]]).map(|r| (r, i)))
                .min();
            match best {
                Some((_, i)) => {
                    bounds.remove(i + 1);
                }
                None => break,
            }
        }
        out.extend(bounds.windows(2).map(|w| {
            self.rank(&piece[w[0]..w[1]])
                .expect("every part is a known token")
        }));
    }
}

/// Convenience wrapper matching the free-function form used elsewhere.
pub fn tokenize_subword(text: &str, vocab: &BpeVocab) -> Vec<u32> {
    vocab.encode(text)
}
