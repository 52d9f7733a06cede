use super::tokenizer::{Token, Tokenizer};
use super::{is_block, is_void, DomTree, Node, NodeId, NodeKind, ParseOptions};

const HEAD_TAGS: &[&str] = &[
    "base", "basefont", "bgsound", "link", "meta", "noscript", "script", "style", "template",
    "title",
];

/// Elements whose end tag may be omitted without it counting as an error.
fn end_tag_optional(tag: &str) -> bool {
    matches!(
        tag,
        "p" | "li"
            | "dd"
            | "dt"
            | "option"
            | "optgroup"
            | "rb"
            | "rp"
            | "rt"
            | "rtc"
            | "tr"
            | "td"
            | "th"
            | "tbody"
            | "thead"
            | "tfoot"
            | "colgroup"
            | "caption"
            | "html"
            | "body"
            | "head"
    )
}

fn closes_p(tag: &str) -> bool {
    matches!(
        tag,
        "address"
            | "article"
            | "aside"
            | "blockquote"
            | "center"
            | "details"
            | "dialog"
            | "dir"
            | "div"
            | "dl"
            | "dd"
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
            | "li"
            | "listing"
            | "main"
            | "menu"
            | "nav"
            | "ol"
            | "p"
            | "pre"
            | "section"
            | "summary"
            | "table"
            | "ul"
            | "xmp"
    )
}

fn is_heading(tag: &str) -> bool {
    matches!(tag, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

/// Elements that bound the search for an end tag's match.
fn is_scope_boundary(tag: &str) -> bool {
    matches!(
        tag,
        "table"
            | "td"
            | "th"
            | "caption"
            | "html"
            | "body"
            | "template"
            | "applet"
            | "object"
            | "marquee"
    )
}

fn is_table_context(tag: &str) -> bool {
    matches!(
        tag,
        "tr" | "td" | "th" | "tbody" | "thead" | "tfoot" | "caption" | "colgroup"
    )
}

fn is_known_html(tag: &str) -> bool {
    is_block(tag)
        || is_void(tag)
        || matches!(
            tag,
            "a" | "abbr"
                | "audio"
                | "b"
                | "bdi"
                | "bdo"
                | "big"
                | "button"
                | "canvas"
                | "cite"
                | "code"
                | "colgroup"
                | "data"
                | "del"
                | "dfn"
                | "em"
                | "font"
                | "head"
                | "i"
                | "iframe"
                | "ins"
                | "kbd"
                | "label"
                | "map"
                | "mark"
                | "nobr"
                | "noscript"
                | "object"
                | "optgroup"
                | "picture"
                | "q"
                | "s"
                | "samp"
                | "script"
                | "small"
                | "span"
                | "strike"
                | "strong"
                | "style"
                | "sub"
                | "sup"
                | "template"
                | "time"
                | "title"
                | "tt"
                | "u"
                | "var"
                | "video"
        )
}

pub(super) struct TreeBuilder {
    nodes: Vec<Node>,
    stack: Vec<NodeId>,
    in_body: bool,
    errors: usize,
    flattened: bool,
    options: ParseOptions,
}

const ROOT: NodeId = NodeId(0);
const HEAD: NodeId = NodeId(1);
const BODY: NodeId = NodeId(2);

impl TreeBuilder {
    pub(super) fn new(options: ParseOptions) -> Self {
        let element = |tag: &str, parent: Option<NodeId>| Node {
            kind: NodeKind::Element {
                tag: tag.to_string(),
                attrs: Vec::new(),
            },
            parent,
            children: Vec::new(),
        };
        let mut nodes = vec![
            element("html", None),
            element("head", Some(ROOT)),
            element("body", Some(ROOT)),
        ];
        nodes[0].children = vec![HEAD, BODY];
        TreeBuilder {
            nodes,
            stack: vec![ROOT, HEAD],
            in_body: false,
            errors: 0,
            flattened: false,
            options: ParseOptions {
                max_depth: options.max_depth.max(3),
            },
        }
    }

    pub(super) fn build(mut self, src: &str) -> DomTree {
        let mut tokenizer = Tokenizer::new(src);
        for token in tokenizer.by_ref() {
            match token {
                Token::StartTag {
                    name,
                    attrs,
                    self_closing,
                } => self.start_tag(name, attrs, self_closing),
                Token::EndTag { name } => self.end_tag(&name),
                Token::Text(text) => self.text(text),
                Token::Comment(c) => {
                    self.append(NodeKind::Comment(c));
                }
            }
        }
        let unclosed = self
            .stack
            .iter()
            .filter(|&&id| !end_tag_optional(self.tag_of(id)))
            .count();
        self.errors += unclosed + tokenizer.errors;
        DomTree {
            nodes: self.nodes,
            head: HEAD,
            body: BODY,
            parse_errors: self.errors,
            depth_flattened: self.flattened,
        }
    }

    fn tag_of(&self, id: NodeId) -> &str {
        self.nodes[id.0].tag().unwrap_or("")
    }

    fn current(&self) -> NodeId {
        *self.stack.last().expect("stack always holds the root")
    }

    fn append(&mut self, kind: NodeKind) -> NodeId {
        let parent = self.current();
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            kind,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    fn enter_body(&mut self) {
        if !self.in_body {
            self.in_body = true;
            self.stack = vec![ROOT, BODY];
        }
    }

    fn merge_attrs(&mut self, target: NodeId, new: Vec<(String, String)>) {
        if let NodeKind::Element { attrs, .. } = &mut self.nodes[target.0].kind {
            for (k, v) in new {
                if !attrs.iter().any(|(a, _)| *a == k) {
                    attrs.push((k, v));
                }
            }
        }
    }

    fn text(&mut self, text: String) {
        if !self.in_body && self.current() == HEAD {
            if text.chars().all(char::is_whitespace) {
                return;
            }
            self.enter_body();
        }
        let parent = self.current();
        if let Some(&last) = self.nodes[parent.0].children.last() {
            if let NodeKind::Text(existing) = &mut self.nodes[last.0].kind {
                existing.push_str(&text);
                return;
            }
        }
        self.append(NodeKind::Text(text));
    }

    /// Index in the stack of the nearest element named `tag`, searching from
    /// the top and giving up at any element for which `stop` holds.
    fn find_open(&self, tag: &str, stop: impl Fn(&str) -> bool) -> Option<usize> {
        for i in (0..self.stack.len()).rev() {
            let t = self.tag_of(self.stack[i]);
            if t == tag {
                return Some(i);
            }
            if stop(t) {
                return None;
            }
        }
        None
    }

    fn pop_to(&mut self, index: usize) {
        for &id in self.stack.get(index + 1..).unwrap_or_default() {
            if !end_tag_optional(self.nodes[id.0].tag().unwrap_or("")) {
                self.errors += 1;
            }
        }
        self.stack.truncate(index);
    }

    fn close_p(&mut self) {
        let stop = |t: &str| is_scope_boundary(t) || t == "button";
        if let Some(i) = self.find_open("p", stop) {
            self.pop_to(i);
        }
    }

    fn start_tag(&mut self, name: String, attrs: Vec<(String, String)>, self_closing: bool) {
        match name.as_str() {
            "html" => return self.merge_attrs(ROOT, attrs),
            "head" => {
                if self.in_body {
                    self.errors += 1;
                }
                return;
            }
            "body" => {
                if self.in_body {
                    self.errors += 1;
                }
                self.enter_body();
                return self.merge_attrs(BODY, attrs);
            }
            _ => {}
        }
        if !self.in_body && !HEAD_TAGS.contains(&name.as_str()) {
            self.enter_body();
        }
        if self.in_body {
            self.implied_closes(&name);
        }
        let pushes = !(is_void(&name) || (self_closing && !is_known_html(&name)));
        let id = self.append(NodeKind::Element { tag: name, attrs });
        if pushes {
            if self.stack.len() >= self.options.max_depth {
                self.flattened = true;
                self.errors += 1;
            } else {
                self.stack.push(id);
            }
        }
    }

    fn implied_closes(&mut self, name: &str) {
        if closes_p(name) {
            self.close_p();
        }
        match name {
            _ if is_heading(name) => {
                if is_heading(self.tag_of(self.current())) {
                    self.errors += 1;
                    self.stack.pop();
                }
            }
            "li" => {
                let stop = |t: &str| matches!(t, "ul" | "ol" | "menu") || is_scope_boundary(t);
                if let Some(i) = self.find_open("li", stop) {
                    self.pop_to(i);
                }
            }
            "dd" | "dt" => {
                let stop = |t: &str| t == "dl" || is_scope_boundary(t);
                let i = self.find_open("dd", stop).max(self.find_open("dt", stop));
                if let Some(i) = i {
                    self.pop_to(i);
                }
            }
            "option" => {
                if self.tag_of(self.current()) == "option" {
                    self.stack.pop();
                }
            }
            "optgroup" => {
                if self.tag_of(self.current()) == "option" {
                    self.stack.pop();
                }
                if self.tag_of(self.current()) == "optgroup" {
                    self.stack.pop();
                }
            }
            "tr" | "tbody" | "thead" | "tfoot" | "caption" | "colgroup" => {
                let anchor = if name == "tr" {
                    self.nearest_of(&["table", "tbody", "thead", "tfoot"])
                } else {
                    self.nearest_of(&["table"])
                };
                if let Some(i) = anchor {
                    self.pop_to(i + 1);
                }
            }
            "td" | "th" => {
                if let Some(i) = self.nearest_of(&["tr", "table", "tbody", "thead", "tfoot"]) {
                    if self.tag_of(self.stack[i]) == "tr" {
                        self.pop_to(i + 1);
                    }
                }
            }
            "a" => {
                if let Some(i) = self.find_open("a", is_scope_boundary) {
                    self.errors += 1;
                    self.pop_to(i);
                }
            }
            _ => {}
        }
    }

    fn nearest_of(&self, tags: &[&str]) -> Option<usize> {
        (0..self.stack.len())
            .rev()
            .find(|&i| tags.contains(&self.tag_of(self.stack[i])))
    }

    fn end_tag(&mut self, name: &str) {
        if !self.in_body {
            match name {
                "head" | "body" | "html" => {
                    if self.current() == HEAD {
                        self.enter_body();
                    }
                    return;
                }
                _ => {
                    if let Some(i) = self.find_open(name, |t| t == "head") {
                        self.stack.truncate(i);
                    } else {
                        self.errors += 1;
                    }
                    return;
                }
            }
        }
        match name {
            "html" | "body" => {}
            "br" => {
                self.errors += 1;
                self.start_tag("br".into(), Vec::new(), false);
            }
            "p" => {
                let stop = |t: &str| is_scope_boundary(t) || t == "button";
                match self.find_open("p", stop) {
                    Some(i) => self.pop_to(i),
                    None => self.errors += 1,
                }
            }
            _ => {
                let found = if is_table_context(name) {
                    self.find_open(name, |t| t == "table" || t == "html")
                } else if name == "table" {
                    self.find_open(name, |t| t == "html")
                } else {
                    self.find_open(name, is_scope_boundary)
                };
                match found {
                    // Never pop html or body.
                    Some(i) if i >= 2 => self.pop_to(i),
                    _ => self.errors += 1,
                }
            }
        }
    }
}
