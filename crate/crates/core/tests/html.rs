mod common;

use common::crawl_pages;
use corpus_core::html::{
    build_dom, build_dom_with, find_pre_blocks, find_tables, DomTree, NodeId, NodeKind,
    ParseOptions,
};
use corpus_core::warc::PageId;
use proptest::prelude::*;
use scraper::{ElementRef, Html, Node};

/// Element structure under `body` as nested `tag(children)` with trimmed
/// text leaves, `tbody` elided.
fn ours(dom: &DomTree) -> String {
    fn go(dom: &DomTree, id: NodeId, out: &mut String) {
        for &c in dom.children(id) {
            match &dom.node(c).kind {
                NodeKind::Element { tag, .. } if tag == "tbody" => go(dom, c, out),
                NodeKind::Element { tag, .. } => {
                    out.push_str(tag);
                    out.push('(');
                    go(dom, c, out);
                    out.push(')');
                }
                NodeKind::Text(t) if !t.trim().is_empty() => {
                    out.push('"');
                    out.push_str(t.trim());
                    out.push('"');
                }
                _ => {}
            }
        }
    }
    let mut out = String::new();
    go(dom, dom.body(), &mut out);
    out
}

fn reference(html: &str) -> String {
    fn go(el: ego_tree::NodeRef<'_, Node>, out: &mut String) {
        for c in el.children() {
            match c.value() {
                Node::Element(e) if e.name() == "tbody" => go(c, out),
                Node::Element(e) => {
                    out.push_str(e.name());
                    out.push('(');
                    go(c, out);
                    out.push(')');
                }
                Node::Text(t) if !t.trim().is_empty() => {
                    out.push('"');
                    out.push_str(t.trim());
                    out.push('"');
                }
                _ => {}
            }
        }
    }
    let doc = Html::parse_document(html);
    let body = doc
        .root_element()
        .children()
        .filter_map(ElementRef::wrap)
        .find(|e| e.value().name() == "body")
        .unwrap();
    let mut out = String::new();
    go(*body, &mut out);
    out
}

const RECOVERY_CASES: &[&str] = &[
    "<p>a<p>b",
    "<ul><li>one<li>two</ul><p>after",
    "<table><tr><td>x",
    "<table><tr><th>h<td>c</tr><tr><td>d</table>",
    "<div><p>a</div>b",
    "<dl><dt>t<dd>d<dt>u<dd>e</dl>",
    "<p>x</span>y</p>",
    "<h1>t</h1><p>a <b>b</b> c</p>",
    "<pre>\n  keep\n    this</pre>",
    "<table><tr><td><table><tr><td>in</td></tr></table></td></tr></table>",
    "<section><article><p>a</p><p>b</p></article></section>",
    "<select><option>a<option>b</select>",
];

#[test]
fn recovery_matches_reference_parser() {
    for case in RECOVERY_CASES {
        let html = format!("<!DOCTYPE html><html><head></head><body>{case}</body></html>");
        assert_eq!(
            ours(&build_dom(html.as_bytes())),
            reference(&html),
            "{case}"
        );
    }
}

#[test]
fn fixture_crawl_matches_reference_parser() {
    for page in crawl_pages() {
        let html = String::from_utf8(page.html.clone()).unwrap();
        assert_eq!(
            ours(&build_dom(&page.html)),
            reference(&html),
            "{}",
            page.url
        );
    }
}

#[test]
fn stray_end_tag_is_dropped() {
    // HTML5 would materialise an empty `p` here; we drop the closer.
    let dom = build_dom(b"<div>a</p>b</div>");
    assert_eq!(ours(&dom), "div(\"ab\")");
    assert!(dom.parse_errors() > 0);
}

#[test]
fn empty_input_gives_empty_body() {
    let dom = build_dom(b"");
    assert!(dom.children(dom.body()).is_empty());
    assert_eq!(dom.parse_errors(), 0);
}

#[test]
fn p_auto_close_gives_siblings() {
    let dom = build_dom(b"<p>a<p>b");
    let kids: Vec<_> = dom
        .children(dom.body())
        .iter()
        .map(|&c| dom.tag(c))
        .collect();
    assert_eq!(kids, [Some("p"), Some("p")]);
}

#[test]
fn deep_nesting_is_flattened_and_flagged() {
    let html = "<div>".repeat(2000) + "x";
    let dom = build_dom(html.as_bytes());
    assert!(dom.depth_flattened());
    let max = dom
        .descendants(dom.root())
        .map(|n| dom.depth(n))
        .max()
        .unwrap();
    assert!(max <= 512 + 1, "{max}");
    let shallow = build_dom_with(b"<div><div>x</div></div>", ParseOptions { max_depth: 3 });
    assert!(shallow.depth_flattened());
    assert!(!build_dom(b"<div><div>x</div></div>").depth_flattened());
}

fn id() -> PageId {
    PageId::from_joined("p")
}

/// Top-level tables found by walking every node and checking ancestors.
fn brute_force_tables(dom: &DomTree) -> usize {
    dom.descendants(dom.root())
        .filter(|&n| {
            dom.tag(n) == Some("table") && !dom.ancestors(n).any(|a| dom.tag(a) == Some("table"))
        })
        .count()
}

#[test]
fn table_candidates() {
    let two =
        build_dom(b"<table><tr><td>a</td></tr></table><p>x</p><table><tr><td>b</td></tr></table>");
    assert_eq!(find_tables(&two, &id()).len(), 2);
    let t = &find_tables(
        &build_dom(b"<table><tr><th>a</th><th>b</th><th>c</th></tr><tr><td>1</td><td>2</td><td>3</td></tr><tr><td>4</td><td>5</td><td>6</td></tr></table>"),
        &id(),
    )[0];
    assert!(t.has_header);
    assert_eq!(t.column_counts, vec![3, 3, 3]);
    assert_eq!(t.n_rows, 3);
    let nested = build_dom(b"<table><tr><td><table><tr><td>in</td></tr></table></td></tr></table>");
    assert_eq!(find_tables(&nested, &id()).len(), 1);
    assert_eq!(brute_force_tables(&nested), 1);
    assert_eq!(
        find_tables(&build_dom(b"<table><tr><td>x"), &id())[0].n_rows,
        1
    );
}

#[test]
fn pre_candidates() {
    let dom = build_dom(b"<pre>def f():\n    return 1</pre>");
    let blocks = find_pre_blocks(&dom, &id());
    assert!(blocks[0].visible_text.contains("\n    return 1"));
    assert!(!blocks[0].has_code_child);
    assert!(find_pre_blocks(&build_dom(b"<pre><code>x</code></pre>"), &id())[0].has_code_child);
    assert!(find_pre_blocks(&build_dom(b"<p>none</p>"), &id()).is_empty());
}

fn arb_html() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("<table>".to_string()),
        Just("</table>".to_string()),
        Just("<tr>".to_string()),
        Just("</tr>".to_string()),
        Just("<td>".to_string()),
        Just("<th>".to_string()),
        Just("</td>".to_string()),
        Just("<p>".to_string()),
        Just("</div>".to_string()),
        Just("<div>".to_string()),
        Just("<pre>".to_string()),
        Just("</pre>".to_string()),
        Just("<code>".to_string()),
        Just("<!-- c -->".to_string()),
        "[a-z <>&;/\"=]{0,8}",
    ];
    proptest::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn parser_is_total_and_tables_are_consistent(html in arb_html()) {
        let dom = build_dom(html.as_bytes());
        prop_assert_eq!(&dom, &build_dom(html.as_bytes()));
        let tables = find_tables(&dom, &id());
        prop_assert_eq!(tables.len(), brute_force_tables(&dom));
        for t in &tables {
            prop_assert_eq!(t.n_rows, t.column_counts.len());
            prop_assert_eq!(t.has_header, t.table_html.contains("<th"));
        }
        for b in find_pre_blocks(&dom, &id()) {
            prop_assert_eq!(b.has_code_child, b.pre_html.contains("<code"));
        }
    }

    #[test]
    fn arbitrary_bytes_parse(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
        let dom = build_dom(&bytes);
        prop_assert!(dom.len() >= 3);
        prop_assert_eq!(dom.tag(dom.root()), Some("html"));
    }

    #[test]
    fn pre_whitespace_survives(lines in proptest::collection::vec(("[ \t]{0,6}", "[a-z(){}=:;]{0,10}"), 1..8)) {
        let text: String = lines.iter().map(|(i, w)| format!("{i}{w}")).collect::<Vec<_>>().join("\n");
        let dom = build_dom(format!("<div><pre>{text}</pre></div>").as_bytes());
        let blocks = find_pre_blocks(&dom, &id());
        prop_assert_eq!(&blocks[0].visible_text, &text);
    }
}
