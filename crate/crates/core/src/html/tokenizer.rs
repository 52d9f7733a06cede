//! A forgiving HTML tokenizer.
//!
//! Produces start tags, end tags, text, and comments. It never fails: a `<`
//! that does not open a tag is text, an unterminated tag or comment at end
//! of input is dropped and counted as an error. The contents of raw-text
//! elements (`script`, `style`, ...) are returned verbatim; escapable
//! raw-text elements (`title`, `textarea`) get character references decoded.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    StartTag {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    EndTag {
        name: String,
    },
    Text(String),
    Comment(String),
}

pub fn is_raw_text(tag: &str) -> bool {
    matches!(
        tag,
        "script" | "style" | "xmp" | "iframe" | "noembed" | "noframes" | "plaintext"
    )
}

fn is_escapable_raw_text(tag: &str) -> bool {
    matches!(tag, "title" | "textarea")
}

pub fn decode_entities(text: &str) -> String {
    if text.contains('&') {
        html_escape::decode_html_entities(text).into_owned()
    } else {
        text.to_string()
    }
}

pub struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
    pub errors: usize,
    raw_until: Option<String>,
}

impl<'a> Tokenizer<'a> {
    pub fn new(src: &'a str) -> Self {
        Tokenizer {
            src,
            pos: 0,
            errors: 0,
            raw_until: None,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn raw_text(&mut self, tag: String) -> Option<Token> {
        let rest = self.rest();
        let lower = rest.to_ascii_lowercase();
        let needle = format!("</{tag}");
        let mut search = 0;
        let end = loop {
            match lower[search..].find(&needle) {
                Some(i) => {
                    let at = search + i;
                    let after = lower.as_bytes().get(at + needle.len()).copied();
                    if matches!(
                        after,
                        None | Some(b'>' | b'/' | b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
                    ) {
                        break at;
                    }
                    search = at + needle.len();
                }
                None => break rest.len(),
            }
        };
        self.pos += end;
        if end == 0 {
            return None;
        }
        let body = &rest[..end];
        Some(Token::Text(if is_escapable_raw_text(&tag) {
            decode_entities(body)
        } else {
            body.to_string()
        }))
    }

    fn comment(&mut self) -> Option<Token> {
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("<!--") {
            return match body.find("-->") {
                Some(end) => {
                    self.pos += 4 + end + 3;
                    Some(Token::Comment(body[..end].to_string()))
                }
                None => {
                    self.errors += 1;
                    self.pos = self.src.len();
                    Some(Token::Comment(body.to_string()))
                }
            };
        }
        // <!DOCTYPE ...>, <![CDATA[...]]>, <?xml ...?>: bogus comments.
        match rest.find('>') {
            Some(end) => {
                self.pos += end + 1;
                Some(Token::Comment(rest[2..end].to_string()))
            }
            None => {
                self.errors += 1;
                self.pos = self.src.len();
                None
            }
        }
    }

    /// Parses a tag starting at `<`. Returns `None` (and consumes the rest of
    /// the input) when the tag is unterminated.
    fn tag(&mut self) -> Option<Token> {
        let bytes = self.src.as_bytes();
        let mut i = self.pos + 1;
        let is_end = bytes.get(i) == Some(&b'/');
        if is_end {
            i += 1;
        }
        let name_start = i;
        while i < bytes.len()
            && !matches!(
                bytes[i],
                b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'/' | b'>'
            )
        {
            i += 1;
        }
        let name = self.src[name_start..i].to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c') {
                i += 1;
            }
            match bytes.get(i) {
                None => {
                    self.errors += 1;
                    self.pos = self.src.len();
                    return None;
                }
                Some(b'>') => {
                    i += 1;
                    break;
                }
                Some(b'/') => {
                    i += 1;
                    if bytes.get(i) == Some(&b'>') {
                        self_closing = true;
                        i += 1;
                        break;
                    }
                    continue;
                }
                _ => {}
            }
            let attr_start = i;
            while i < bytes.len()
                && !matches!(
                    bytes[i],
                    b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'/' | b'>' | b'='
                )
            {
                i += 1;
            }
            if i == attr_start {
                // Lone '=' or similar junk.
                i += 1;
                self.errors += 1;
                continue;
            }
            let attr_name = self.src[attr_start..i].to_ascii_lowercase();
            while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c') {
                i += 1;
            }
            let mut value = String::new();
            if bytes.get(i) == Some(&b'=') {
                i += 1;
                while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
                {
                    i += 1;
                }
                match bytes.get(i) {
                    Some(&q @ (b'"' | b'\'')) => {
                        let vstart = i + 1;
                        match self.src[vstart..].find(q as char) {
                            Some(len) => {
                                value = decode_entities(&self.src[vstart..vstart + len]);
                                i = vstart + len + 1;
                            }
                            None => {
                                self.errors += 1;
                                self.pos = self.src.len();
                                return None;
                            }
                        }
                    }
                    _ => {
                        let vstart = i;
                        while i < bytes.len()
                            && !matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'>')
                        {
                            i += 1;
                        }
                        value = decode_entities(&self.src[vstart..i]);
                    }
                }
            }
            if attrs.iter().any(|(n, _)| *n == attr_name) {
                self.errors += 1;
            } else {
                attrs.push((attr_name, value));
            }
        }
        self.pos = i;
        if is_end {
            Some(Token::EndTag { name })
        } else {
            if (is_raw_text(&name) || is_escapable_raw_text(&name)) && !self_closing {
                self.raw_until = Some(name.clone());
            }
            Some(Token::StartTag {
                name,
                attrs,
                self_closing,
            })
        }
    }
}

impl Iterator for Tokenizer<'_> {
    type Item = Token;

    fn next(&mut self) -> Option<Token> {
        loop {
            if let Some(tag) = self.raw_until.take() {
                if let Some(tok) = self.raw_text(tag) {
                    return Some(tok);
                }
            }
            let rest = self.rest();
            if rest.is_empty() {
                return None;
            }
            let bytes = rest.as_bytes();
            if bytes[0] == b'<' {
                match bytes.get(1) {
                    Some(b'!' | b'?') => {
                        if let Some(tok) = self.comment() {
                            return Some(tok);
                        }
                        continue;
                    }
                    Some(c) if c.is_ascii_alphabetic() => {
                        if let Some(tok) = self.tag() {
                            return Some(tok);
                        }
                        continue;
                    }
                    Some(b'/') if bytes.get(2).is_some_and(|c| c.is_ascii_alphabetic()) => {
                        if let Some(tok) = self.tag() {
                            return Some(tok);
                        }
                        continue;
                    }
                    Some(b'/') if bytes.get(2) == Some(&b'>') => {
                        // "</>" is dropped entirely.
                        self.errors += 1;
                        self.pos += 3;
                        continue;
                    }
                    _ => {
                        self.errors += 1;
                    }
                }
            }
            // Text runs to the next '<' that could start markup.
            let mut end = 1;
            while end < bytes.len() {
                if bytes[end] == b'<' {
                    let next = bytes.get(end + 1).copied();
                    if matches!(next, Some(b'!' | b'?' | b'/'))
                        || next.is_some_and(|c| c.is_ascii_alphabetic())
                    {
                        break;
                    }
                }
                end += 1;
            }
            let text = &rest[..end];
            self.pos += end;
            return Some(Token::Text(decode_entities(text)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(src: &str) -> Vec<Token> {
        Tokenizer::new(src).collect()
    }

    fn start(name: &str, attrs: &[(&str, &str)]) -> Token {
        Token::StartTag {
            name: name.into(),
            attrs: attrs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            self_closing: false,
        }
    }

    #[test]
    fn attributes_in_all_quoting_styles() {
        let toks = tokens(r#"<A HREF="x" class='y' id=z disabled>"#);
        assert_eq!(
            toks,
            vec![start(
                "a",
                &[("href", "x"), ("class", "y"), ("id", "z"), ("disabled", "")]
            )]
        );
    }

    #[test]
    fn script_body_is_raw() {
        let toks = tokens("<script>if (a < b && c) {}</script>x");
        assert_eq!(toks[1], Token::Text("if (a < b && c) {}".into()));
        assert_eq!(
            toks[2],
            Token::EndTag {
                name: "script".into()
            }
        );
        assert_eq!(toks[3], Token::Text("x".into()));
    }

    #[test]
    fn stray_angle_bracket_is_text() {
        let toks = tokens("a < b");
        assert_eq!(toks, vec![Token::Text("a < b".into())]);
    }

    #[test]
    fn entities_are_decoded_in_text() {
        assert_eq!(
            tokens("&lt;p&gt; &amp; &#65;"),
            vec![Token::Text("<p> & A".into())]
        );
    }

    #[test]
    fn unterminated_tag_is_dropped() {
        let mut t = Tokenizer::new("ok<div class=\"x");
        assert_eq!(t.next(), Some(Token::Text("ok".into())));
        assert_eq!(t.next(), None);
        assert_eq!(t.errors, 1);
    }

    #[test]
    fn comments_and_doctype() {
        let toks = tokens("<!DOCTYPE html><!-- hi -->");
        assert_eq!(
            toks,
            vec![
                Token::Comment("DOCTYPE html".into()),
                Token::Comment(" hi ".into())
            ]
        );
    }
}
