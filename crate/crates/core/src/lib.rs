//! Corpus curation from crawled HTML.
//!
//! Pages are streamed out of WARC archives ([`warc`]), parsed into a lenient
//! DOM ([`html`]) and rendered to plaintext by several extractors
//! ([`extract`]). Filters ([`filters`]) select pages by quality, language,
//! data tables or code blocks using hashed n-gram classifiers
//! ([`classify`]). Surviving pages from every extractor are deduplicated and
//! merged into a single dataset ([`dedup`]), and [`report`] summarises
//! overlap, domain imbalance and token yield. [`pipeline`] chains all of it.

pub mod classify;
pub mod dedup;
pub mod extract;
pub mod filters;
pub mod html;
pub mod pipeline;
pub mod report;
pub mod warc;
