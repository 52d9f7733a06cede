//! Layout-preserving extractors with two table renderings.

use super::{Extractor, ExtractorId};
use crate::html::query::{walk, Step, TextSink};
use crate::html::{collapse_whitespace, is_block, pre_text, DomTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Whitespace,
    Markdown,
}

fn is_stripped(style: Style, tag: &str) -> bool {
    let common = matches!(
        tag,
        "head"
            | "script"
            | "style"
            | "template"
            | "noscript"
            | "nav"
            | "header"
            | "footer"
            | "form"
            | "iframe"
            | "object"
            | "embed"
            | "svg"
            | "math"
    );
    match style {
        Style::Whitespace => common || tag == "aside",
        Style::Markdown => common,
    }
}

fn cell_text(dom: &DomTree, cell: NodeId) -> String {
    let mut raw = String::new();
    walk(dom, cell, |step| match step {
        Step::Enter(id) => match &dom.node(id).kind {
            NodeKind::Text(t) => {
                raw.push_str(t);
                true
            }
            NodeKind::Comment(_) => false,
            NodeKind::Element { tag, .. } => {
                if matches!(tag.as_str(), "script" | "style" | "template") {
                    return false;
                }
                if is_block(tag) {
                    raw.push(' ');
                }
                true
            }
        },
        Step::Leave(_) => true,
    });
    collapse_whitespace(&raw)
}

/// Rows of `table` (not of nested tables), each a list of cell texts.
fn table_rows(dom: &DomTree, table: NodeId) -> Vec<Vec<String>> {
    let nearest = |id: NodeId, tag: &str| dom.ancestors(id).find(|&a| dom.tag(a) == Some(tag));
    dom.descendants(table)
        .filter(|&id| dom.tag(id) == Some("tr") && nearest(id, "table") == Some(table))
        .map(|tr| {
            dom.descendants(tr)
                .filter(|&c| {
                    matches!(dom.tag(c), Some("td" | "th")) && nearest(c, "tr") == Some(tr)
                })
                .map(|c| cell_text(dom, c))
                .collect::<Vec<_>>()
        })
        .filter(|cells| !cells.is_empty())
        .collect()
}

fn render_table(style: Style, rows: &[Vec<String>]) -> String {
    match style {
        Style::Whitespace => rows
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .filter(|c| !c.is_empty())
                    .map(String::as_str)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .filter(|line| !line.is_empty())
            .collect::<Vec<_>>()
            .join("\n"),
        Style::Markdown => {
            let width = rows.iter().map(Vec::len).max().unwrap_or(0);
            if width == 0 {
                return String::new();
            }
            let line = |cells: &[String]| {
                let mut out = String::from("|");
                for i in 0..width {
                    let cell = cells
                        .get(i)
                        .map(|c| c.replace('|', "\\|"))
                        .unwrap_or_default();
                    out.push(' ');
                    out.push_str(&cell);
                    out.push_str(" |");
                }
                out
            };
            let mut lines = Vec::with_capacity(rows.len() + 1);
            lines.push(line(&rows[0]));
            lines.push(format!("|{}", " --- |".repeat(width)));
            lines.extend(rows[1..].iter().map(|r| line(r)));
            lines.join("\n")
        }
    }
}

fn heading_level(tag: &str) -> Option<usize> {
    match tag {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

fn render(dom: &DomTree, style: Style) -> String {
    let mut sink = TextSink::default();
    // Markdown prefix ("- ", "## ") waiting for the next emitted piece.
    let mut prefix: Option<String> = None;
    let flush = |sink: &mut TextSink, prefix: &mut Option<String>| {
        let text = sink.take_pending();
        if !text.is_empty() {
            let piece = match prefix.take() {
                Some(p) => p + &text,
                None => text,
            };
            sink.push_piece(piece);
        }
    };
    walk(dom, dom.body(), |step| match step {
        Step::Enter(id) => match &dom.node(id).kind {
            NodeKind::Text(t) => {
                sink.push_inline(t);
                true
            }
            NodeKind::Comment(_) => false,
            NodeKind::Element { tag, .. } if is_stripped(style, tag) => false,
            NodeKind::Element { tag, .. } if tag == "table" => {
                flush(&mut sink, &mut prefix);
                prefix = None;
                sink.push_piece(render_table(style, &table_rows(dom, id)));
                false
            }
            NodeKind::Element { tag, .. } if tag == "pre" => {
                flush(&mut sink, &mut prefix);
                prefix = None;
                let text = pre_text(dom, id);
                sink.push_piece(match style {
                    Style::Whitespace => text,
                    Style::Markdown => collapse_whitespace(&text),
                });
                false
            }
            NodeKind::Element { tag, .. } => {
                if is_block(tag) {
                    flush(&mut sink, &mut prefix);
                    if style == Style::Markdown {
                        if tag == "li" {
                            prefix = Some("- ".into());
                        } else if let Some(level) = heading_level(tag) {
                            prefix = Some(format!("{} ", "#".repeat(level)));
                        }
                    }
                }
                true
            }
        },
        Step::Leave(id) => {
            if dom.tag(id).is_some_and(is_block) {
                flush(&mut sink, &mut prefix);
                prefix = None;
            }
            true
        }
    });
    flush(&mut sink, &mut prefix);
    sink.finish("\n")
}

/// Boilerplate-stripped text; tables as space-joined rows, `pre` verbatim.
pub fn extract_whitespace_table(dom: &DomTree) -> String {
    render(dom, Style::Whitespace)
}

/// Boilerplate-stripped text; tables as markdown, `pre` collapsed to one line.
pub fn extract_markdown_table(dom: &DomTree) -> String {
    render(dom, Style::Markdown)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTable;

impl Extractor for WhitespaceTable {
    fn id(&self) -> ExtractorId {
        ExtractorId::new(ExtractorId::WHITESPACE_TABLE)
    }

    fn extract(&self, dom: &DomTree) -> String {
        extract_whitespace_table(dom)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MarkdownTable;

impl Extractor for MarkdownTable {
    fn id(&self) -> ExtractorId {
        ExtractorId::new(ExtractorId::MARKDOWN_TABLE)
    }

    fn extract(&self, dom: &DomTree) -> String {
        extract_markdown_table(dom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::build_dom;

    const TABLE: &str =
        "<table><tr><th>Name</th><th>Age</th></tr><tr><td>Ann</td><td>5</td></tr></table>";

    fn ws(html: &str) -> String {
        extract_whitespace_table(&build_dom(html.as_bytes()))
    }

    fn md(html: &str) -> String {
        extract_markdown_table(&build_dom(html.as_bytes()))
    }

    #[test]
    fn whitespace_table_rows() {
        assert_eq!(ws(TABLE), "Name Age\nAnn 5");
    }

    #[test]
    fn markdown_table_rows() {
        assert_eq!(md(TABLE), "| Name | Age |\n| --- | --- |\n| Ann | 5 |");
    }

    #[test]
    fn pre_handling_differs() {
        assert_eq!(ws("<pre>a\n  b</pre>"), "a\n  b");
        assert_eq!(md("<pre>a\n  b</pre>"), "a b");
    }

    #[test]
    fn nav_is_stripped() {
        assert_eq!(ws("<nav>x</nav><p>y</p>"), "y");
        assert_eq!(md("<nav>x</nav><p>y</p>"), "y");
    }

    #[test]
    fn empty_dom() {
        assert_eq!(ws(""), "");
        assert_eq!(md(""), "");
    }

    #[test]
    fn markdown_lists_and_headings() {
        assert_eq!(
            md("<h2>Title</h2><ul><li>one</li><li>two <b>bold</b></li></ul>"),
            "## Title\n- one\n- two bold"
        );
        assert_eq!(
            ws("<h2>Title</h2><ul><li>one</li><li>two</li></ul>"),
            "Title\none\ntwo"
        );
    }

    #[test]
    fn aside_kept_only_by_markdown() {
        assert_eq!(ws("<p>a</p><aside>comments</aside>"), "a");
        assert_eq!(md("<p>a</p><aside>comments</aside>"), "a\ncomments");
    }

    #[test]
    fn ragged_rows_are_padded_in_markdown() {
        let html = "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td></tr></table>";
        assert_eq!(md(html), "| a | b |\n| --- | --- |\n| c |  |");
        assert_eq!(ws(html), "a b\nc");
    }

    #[test]
    fn pipes_in_cells_are_escaped() {
        let html = "<table><tr><td>a|b</td></tr></table>";
        assert_eq!(md(html), "| a\\|b |\n| --- |");
    }
}
