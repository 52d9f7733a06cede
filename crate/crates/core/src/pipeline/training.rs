//! Weakly labelled training sets drawn from ingested pages.

use crate::classify::LabeledExample;
use crate::filters::{
    label_code_domains, label_table_url, structural_table_filter, BlockView, DomainLabels,
    UrlLabelRules,
};
use crate::html::{build_dom, find_pre_blocks, find_tables};
use crate::warc::RawPage;

/// Tables passing the structural filter, labelled by their page URL.
/// Unlabelled URLs contribute nothing.
pub fn table_examples(pages: &[RawPage], rules: &UrlLabelRules) -> Vec<LabeledExample> {
    let mut out = Vec::new();
    for page in pages {
        let Some(label) = label_table_url(&page.url, rules).class() else {
            continue;
        };
        let dom = build_dom(&page.html);
        for t in find_tables(&dom, &page.page_id) {
            if structural_table_filter(&t).kept {
                out.push(LabeledExample::new(t.table_html, label));
            }
        }
    }
    out
}

/// `pre` blocks labelled by host (or a child `<code>`), in the given view.
pub fn code_examples(
    pages: &[RawPage],
    domains: &DomainLabels,
    view: BlockView,
) -> Vec<LabeledExample> {
    let blocks: Vec<(String, _)> = pages
        .iter()
        .flat_map(|page| {
            let dom = build_dom(&page.html);
            find_pre_blocks(&dom, &page.page_id)
                .into_iter()
                .map(|b| (page.url.clone(), b))
                .collect::<Vec<_>>()
        })
        .collect();
    label_code_domains(domains, &blocks, view)
}
