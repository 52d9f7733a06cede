//! Tokenizers and the hashed n-gram classifier.

pub mod bpe;
mod model;
pub mod tokenize;

pub use bpe::{tokenize_subword, BpeVocab, VocabError};
pub use model::{
    featurize, language_score, train, ClassScorer, LabeledExample, ModelError, NGramLinearModel,
    Scorer, Tokenizer, TrainConfig, TrainReport, ENGLISH_LABEL, MAX_BUCKETS,
};
pub use tokenize::{count_words, tokenize_words};
