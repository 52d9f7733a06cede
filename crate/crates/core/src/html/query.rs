use serde::{Deserialize, Serialize};

use super::{is_block, DomTree, NodeId, NodeKind};
use crate::warc::PageId;

/// One top-level `<table>` element awaiting classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCandidate {
    pub table_html: String,
    pub n_rows: usize,
    pub column_counts: Vec<usize>,
    pub has_header: bool,
    pub source_page: PageId,
}

/// One top-level `<pre>` element awaiting classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreBlock {
    pub pre_html: String,
    pub visible_text: String,
    pub has_code_child: bool,
    pub source_page: PageId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Enter(NodeId),
    Leave(NodeId),
}

/// Iterative depth-first walk. Returning `false` from an `Enter` step skips
/// the node's subtree (and its `Leave` step).
pub(crate) fn walk(tree: &DomTree, root: NodeId, mut visit: impl FnMut(Step) -> bool) {
    let mut stack = vec![(root, false)];
    while let Some((id, left)) = stack.pop() {
        if left {
            visit(Step::Leave(id));
            continue;
        }
        if !visit(Step::Enter(id)) {
            continue;
        }
        stack.push((id, true));
        for &child in tree.children(id).iter().rev() {
            stack.push((child, false));
        }
    }
}

fn nearest_ancestor(tree: &DomTree, id: NodeId, tag: &str) -> Option<NodeId> {
    tree.ancestors(id).find(|&a| tree.tag(a) == Some(tag))
}

/// Outermost elements named `tag` under `root`, in document order.
fn outermost(tree: &DomTree, root: NodeId, tag: &str) -> Vec<NodeId> {
    let mut found = Vec::new();
    walk(tree, root, |step| match step {
        Step::Enter(id) if tree.tag(id) == Some(tag) => {
            found.push(id);
            false
        }
        _ => true,
    });
    found
}

pub fn find_tables(dom: &DomTree, page: &PageId) -> Vec<TableCandidate> {
    outermost(dom, dom.root(), "table")
        .into_iter()
        .map(|table| table_candidate(dom, table, page))
        .collect()
}

fn table_candidate(dom: &DomTree, table: NodeId, page: &PageId) -> TableCandidate {
    let mut column_counts = Vec::new();
    let mut has_header = false;
    for id in dom.descendants(table) {
        match dom.tag(id) {
            Some("th") => has_header = true,
            Some("tr") if nearest_ancestor(dom, id, "table") == Some(table) => {
                let cells = dom
                    .descendants(id)
                    .filter(|&c| {
                        matches!(dom.tag(c), Some("td" | "th"))
                            && nearest_ancestor(dom, c, "tr") == Some(id)
                    })
                    .count();
                column_counts.push(cells);
            }
            _ => {}
        }
    }
    TableCandidate {
        table_html: dom.outer_html(table),
        n_rows: column_counts.len(),
        column_counts,
        has_header,
        source_page: page.clone(),
    }
}

pub fn find_pre_blocks(dom: &DomTree, page: &PageId) -> Vec<PreBlock> {
    outermost(dom, dom.root(), "pre")
        .into_iter()
        .map(|pre| PreBlock {
            pre_html: dom.outer_html(pre),
            visible_text: pre_text(dom, pre),
            has_code_child: dom
                .descendants(pre)
                .skip(1)
                .any(|d| dom.tag(d) == Some("code")),
            source_page: page.clone(),
        })
        .collect()
}

/// Text of a `pre` subtree with whitespace untouched; `<br>` becomes `\n`.
pub fn pre_text(dom: &DomTree, pre: NodeId) -> String {
    let mut out = String::new();
    for id in dom.descendants(pre) {
        match &dom.node(id).kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element { tag, .. } if tag == "br" => out.push('\n'),
            _ => {}
        }
    }
    out
}

/// Accumulates inline text and emits it as whitespace-normalised pieces at
/// block boundaries. Verbatim pieces bypass normalisation.
#[derive(Debug, Default)]
pub(crate) struct TextSink {
    pieces: Vec<String>,
    pending: String,
}

impl TextSink {
    pub(crate) fn push_inline(&mut self, text: &str) {
        self.pending.push_str(text);
    }

    pub(crate) fn take_pending(&mut self) -> String {
        let text = collapse_whitespace(&self.pending);
        self.pending.clear();
        text
    }

    pub(crate) fn break_block(&mut self) {
        let text = self.take_pending();
        if !text.is_empty() {
            self.pieces.push(text);
        }
    }

    pub(crate) fn push_piece(&mut self, piece: String) {
        self.break_block();
        if !piece.is_empty() {
            self.pieces.push(piece);
        }
    }

    pub(crate) fn finish(mut self, separator: &str) -> String {
        self.break_block();
        self.pieces.join(separator)
    }
}

/// Collapses runs of Unicode whitespace to a single space and trims.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn is_invisible(tag: &str) -> bool {
    matches!(tag, "script" | "style" | "head" | "template")
}

/// Visible page text: script, style and head content removed, block
/// boundaries turned into newlines, `pre` content kept verbatim.
pub fn visible_text(dom: &DomTree) -> String {
    let mut sink = TextSink::default();
    walk(dom, dom.root(), |step| match step {
        Step::Enter(id) => match &dom.node(id).kind {
            NodeKind::Text(t) => {
                sink.push_inline(t);
                true
            }
            NodeKind::Comment(_) => false,
            NodeKind::Element { tag, .. } if is_invisible(tag) => false,
            NodeKind::Element { tag, .. } if tag == "pre" => {
                sink.push_piece(pre_text(dom, id));
                false
            }
            NodeKind::Element { tag, .. } => {
                if is_block(tag) {
                    sink.break_block();
                }
                true
            }
        },
        Step::Leave(id) => {
            if dom.tag(id).is_some_and(is_block) {
                sink.break_block();
            }
            true
        }
    });
    sink.finish("\n")
}
