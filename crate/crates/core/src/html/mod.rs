//! Lenient HTML parsing into an immutable, queryable tree.
//!
//! The parser is total: any byte sequence produces a well-formed tree rooted
//! at `html` with exactly one `head` and one `body` child. Malformed markup
//! is repaired with a fixed recovery policy:
//!
//! * Block-level start tags close an open `p`; `li`, `dt`/`dd`, `option`,
//!   `tr`, `td`/`th` and table sections close their open predecessors.
//! * An end tag pops every element above its match on the open-element
//!   stack. The search never crosses a table or cell boundary, so a stray
//!   `</div>` inside a cell cannot close the table around it.
//! * End tags without a matching open element are ignored, leaving the
//!   content that follows as a sibling.
//! * Nesting deeper than [`ParseOptions::max_depth`] is flattened: deeper
//!   elements are attached at the limit and the tree is flagged.
//!
//! Text inside `pre` is kept byte-for-byte (after character-reference
//! decoding), including a leading newline.

mod builder;
pub mod decode;
pub(crate) mod query;
mod serialize;
pub mod tokenizer;

pub use query::{
    collapse_whitespace, find_pre_blocks, find_tables, pre_text, visible_text, PreBlock,
    TableCandidate,
};

pub const DEFAULT_MAX_DEPTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl Node {
    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Text(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_depth: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<Node>,
    head: NodeId,
    body: NodeId,
    parse_errors: usize,
    depth_flattened: bool,
}

impl DomTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn head(&self) -> NodeId {
        self.head
    }

    pub fn body(&self) -> NodeId {
        self.body
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parse_errors(&self) -> usize {
        self.parse_errors
    }

    /// True when nesting beyond the depth limit was flattened.
    pub fn depth_flattened(&self) -> bool {
        self.depth_flattened
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].tag()
    }

    /// Pre-order traversal of `id` and everything beneath it.
    pub fn descendants(&self, id: NodeId) -> Descendants<'_> {
        Descendants {
            tree: self,
            stack: vec![id],
        }
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id.0].parent, move |p| self.nodes[p.0].parent)
    }

    /// Concatenated text of all descendant text nodes, unmodified.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        for n in self.descendants(id) {
            if let Some(t) = self.node(n).text() {
                out.push_str(t);
            }
        }
        out
    }

    pub fn outer_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        serialize::write_node(self, id, &mut out);
        out
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }
}

pub struct Descendants<'a> {
    tree: &'a DomTree,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.stack.pop()?;
        self.stack
            .extend(self.tree.nodes[id.0].children.iter().rev().copied());
        Some(id)
    }
}

/// Parses arbitrary bytes into a tree with the default depth limit.
pub fn build_dom(html: &[u8]) -> DomTree {
    build_dom_with(html, ParseOptions::default())
}

pub fn build_dom_with(html: &[u8], options: ParseOptions) -> DomTree {
    let text = decode::decode_html(html);
    builder::TreeBuilder::new(options).build(&text)
}

pub fn parse_str(html: &str) -> DomTree {
    builder::TreeBuilder::new(ParseOptions::default()).build(html)
}

/// Elements whose boundaries separate blocks of text.
pub fn is_block(tag: &str) -> bool {
    matches!(
        tag,
        "address"
            | "article"
            | "aside"
            | "blockquote"
            | "body"
            | "br"
            | "caption"
            | "center"
            | "dd"
            | "details"
            | "dialog"
            | "dir"
            | "div"
            | "dl"
            | "dt"
            | "fieldset"
            | "figcaption"
            | "figure"
            | "footer"
            | "form"
            | "h1"
            | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "header"
            | "hgroup"
            | "hr"
            | "html"
            | "legend"
            | "li"
            | "listing"
            | "main"
            | "menu"
            | "nav"
            | "ol"
            | "option"
            | "p"
            | "pre"
            | "section"
            | "select"
            | "summary"
            | "table"
            | "tbody"
            | "td"
            | "tfoot"
            | "th"
            | "thead"
            | "tr"
            | "ul"
            | "textarea"
    )
}

pub fn is_void(tag: &str) -> bool {
    matches!(
        tag,
        "area"
            | "base"
            | "br"
            | "col"
            | "embed"
            | "hr"
            | "img"
            | "input"
            | "keygen"
            | "link"
            | "meta"
            | "param"
            | "source"
            | "track"
            | "wbr"
    )
}
