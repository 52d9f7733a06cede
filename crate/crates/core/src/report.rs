//! Overlap, domain-imbalance and token-yield summaries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::ExtractorId;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("venn report needs 2 or 3 sets, got {0}")]
    SetCount(usize),
    #[error("baseline dataset `{0}` is missing")]
    MissingBaseline(String),
    #[error("baseline dataset `{0}` has zero tokens")]
    EmptyBaseline(String),
    #[error("invalid imbalance config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VennCell {
    /// Names of the sets this cell lies in (and no others).
    pub members: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VennReport {
    pub sets: Vec<String>,
    /// All `2^k - 1` non-empty cells, ordered by membership bitmask.
    pub cells: Vec<VennCell>,
    pub union: usize,
    /// Share of the union found in exactly one set; 0 for an empty union.
    pub unique_fraction: f64,
}

impl VennReport {
    pub fn cell(&self, members: &[&str]) -> Option<usize> {
        self.cells
            .iter()
            .find(|c| {
                c.members.len() == members.len()
                    && members.iter().all(|m| c.members.iter().any(|n| n == m))
            })
            .map(|c| c.count)
    }
}

pub fn venn_report<T: Ord>(
    sets: &[(&str, &std::collections::BTreeSet<T>)],
) -> Result<VennReport, ReportError> {
    let k = sets.len();
    if !(2..=3).contains(&k) {
        return Err(ReportError::SetCount(k));
    }
    let mut membership: BTreeMap<&T, usize> = BTreeMap::new();
    for (i, (_, set)) in sets.iter().enumerate() {
        for item in set.iter() {
            *membership.entry(item).or_default() |= 1 << i;
        }
    }
    let mut counts = vec![0usize; 1 << k];
    for mask in membership.values() {
        counts[*mask] += 1;
    }
    let cells: Vec<VennCell> = (1..1usize << k)
        .map(|mask| VennCell {
            members: (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| sets[i].0.to_string())
                .collect(),
            count: counts[mask],
        })
        .collect();
    let union = membership.len();
    let unique: usize = cells
        .iter()
        .filter(|c| c.members.len() == 1)
        .map(|c| c.count)
        .sum();
    Ok(VennReport {
        sets: sets.iter().map(|(n, _)| n.to_string()).collect(),
        cells,
        union,
        unique_fraction: if union == 0 {
            0.0
        } else {
            unique as f64 / union as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalanceConfig {
    pub min_pages: usize,
    pub bin_width: f64,
}

impl Default for ImbalanceConfig {
    fn default() -> Self {
        ImbalanceConfig {
            min_pages: 50,
            bin_width: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRatio {
    pub domain: String,
    pub total: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub extractors: Vec<ExtractorId>,
    pub min_pages: usize,
    /// Domains with at least `min_pages` pages, sorted by name.
    pub domains: Vec<DomainRatio>,
    pub histogram: Vec<HistogramBin>,
    pub fraction_at_least_0_6: f64,
    pub fraction_at_least_0_8: f64,
    /// URLs whose host could not be determined.
    pub unparsed_urls: usize,
}

/// Registrable domain (public-suffix aware) of a URL's host. Hosts without
/// a known suffix, such as IP addresses, are returned as-is.
pub fn registrable_domain(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let host = parsed.host_str()?.trim_end_matches('.').to_lowercase();
    if matches!(parsed.host(), Some(url::Host::Domain(_))) {
        if let Some(d) = psl::domain_str(&host) {
            return Some(d.to_string());
        }
    }
    Some(host)
}

/// Bin index of `ratio` in `bins` equal-width bins starting at `lo`; the
/// last bin is closed on the right.
pub fn bin_index(ratio: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((ratio - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Per-domain share of the most represented extractor.
pub fn domain_imbalance(
    groups: &[(ExtractorId, Vec<String>)],
    config: &ImbalanceConfig,
) -> Result<ImbalanceReport, ReportError> {
    if !(config.bin_width > 0.0 && config.bin_width <= 1.0) {
        return Err(ReportError::Config("bin_width must lie in (0, 1]".into()));
    }
    let k = groups.len().max(1);
    let mut per_domain: HashMap<String, Vec<usize>> = HashMap::new();
    let mut unparsed_urls = 0;
    for (i, (_, urls)) in groups.iter().enumerate() {
        for url in urls {
            match registrable_domain(url) {
                Some(d) => per_domain.entry(d).or_insert_with(|| vec![0; k])[i] += 1,
                None => unparsed_urls += 1,
            }
        }
    }
    let mut domains: Vec<DomainRatio> = per_domain
        .into_iter()
        .filter_map(|(domain, counts)| {
            let total: usize = counts.iter().sum();
            (total >= config.min_pages && total > 0).then(|| DomainRatio {
                domain,
                total,
                max_ratio: *counts.iter().max().unwrap() as f64 / total as f64,
            })
        })
        .collect();
    domains.sort_by(|a, b| a.domain.cmp(&b.domain));

    let lo = 1.0 / k as f64;
    let bins = (((1.0 - lo) / config.bin_width).ceil() as usize).max(1);
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * config.bin_width,
            hi: (lo + (b + 1) as f64 * config.bin_width).min(1.0),
            count: 0,
        })
        .collect();
    for d in &domains {
        histogram[bin_index(d.max_ratio, lo, config.bin_width, bins)].count += 1;
    }
    let share = |t: f64| {
        if domains.is_empty() {
            0.0
        } else {
            domains.iter().filter(|d| d.max_ratio >= t).count() as f64 / domains.len() as f64
        }
    };
    Ok(ImbalanceReport {
        extractors: groups.iter().map(|(e, _)| e.clone()).collect(),
        min_pages: config.min_pages,
        fraction_at_least_0_6: share(0.6),
        fraction_at_least_0_8: share(0.8),
        domains,
        histogram,
        unparsed_urls,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetTokens {
    pub name: String,
    /// Free-form threshold label, e.g. `(0.11, 0.15, 0.15)`.
    #[serde(default)]
    pub thresholds: String,
    pub tokens: u64,
}

impl DatasetTokens {
    pub fn new(name: impl Into<String>, tokens: u64) -> Self {
        DatasetTokens {
            name: name.into(),
            thresholds: String::new(),
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldRow {
    pub name: String,
    pub thresholds: String,
    pub tokens: u64,
    pub ratio: f64,
    /// `(ratio - 1) × 100`.
    pub increase_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldReport {
    pub baseline: String,
    pub rows: Vec<YieldRow>,
}

pub fn yield_report(
    datasets: &[DatasetTokens],
    baseline: &str,
) -> Result<YieldReport, ReportError> {
    let base = datasets
        .iter()
        .find(|d| d.name == baseline)
        .ok_or_else(|| ReportError::MissingBaseline(baseline.to_string()))?;
    if base.tokens == 0 {
        return Err(ReportError::EmptyBaseline(baseline.to_string()));
    }
    let rows = datasets
        .iter()
        .map(|d| {
            let ratio = d.tokens as f64 / base.tokens as f64;
            YieldRow {
                name: d.name.clone(),
                thresholds: d.thresholds.clone(),
                tokens: d.tokens,
                ratio,
                increase_pct: (ratio - 1.0) * 100.0,
            }
        })
        .collect();
    Ok(YieldReport {
        baseline: baseline.to_string(),
        rows,
    })
}

impl YieldReport {
    /// Aligned text table: Extractor, Thresholds, Token Yield, change.
    pub fn to_table(&self) -> String {
        let header = ["Extractor", "Thresholds", "Token Yield", "vs Baseline"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    r.thresholds.clone(),
                    r.tokens.to_string(),
                    if r.name == self.baseline {
                        "baseline".to_string()
                    } else {
                        format!("{:+.1}%", r.increase_pct)
                    },
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i >= 2 {
                        format!("{c:>w$}")
                    } else {
                        format!("{c:<w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
        for row in &body {
            line(&row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub datasets: Vec<DatasetTokens>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venn: Option<VennReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imbalance: Option<ImbalanceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yields: Option<YieldReport>,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
