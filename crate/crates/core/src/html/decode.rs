//! Byte-to-text decoding for crawled HTML.
//!
//! UTF-8 is tried first with lossy replacement. When more than 10% of the
//! input bytes sit inside invalid UTF-8 sequences, the charset declared in a
//! `<meta>` tag is used instead (windows-1252 when nothing is declared).

use std::borrow::Cow;

use encoding_rs::{Encoding, WINDOWS_1252};
use regex::bytes::Regex;
use std::sync::OnceLock;

const INVALID_FRACTION_LIMIT: f64 = 0.10;

/// Number of bytes that belong to invalid UTF-8 sequences.
pub fn invalid_utf8_bytes(bytes: &[u8]) -> usize {
    let mut invalid = 0;
    let mut rest = bytes;
    loop {
        match std::str::from_utf8(rest) {
            Ok(_) => return invalid,
            Err(e) => {
                let bad = e.error_len().unwrap_or(rest.len() - e.valid_up_to());
                invalid += bad;
                rest = &rest[e.valid_up_to() + bad..];
            }
        }
    }
}

fn meta_charset_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i-u)<meta[^>]*?charset\s*=\s*["']?\s*([a-z0-9_:.\-]+)"#).unwrap()
    })
}

/// Charset label declared by a `<meta>` tag within the first 4 KiB.
pub fn declared_charset(bytes: &[u8]) -> Option<&'static Encoding> {
    let head = &bytes[..bytes.len().min(4096)];
    let caps = meta_charset_regex().captures(head)?;
    Encoding::for_label(caps.get(1)?.as_bytes())
}

pub fn decode_html(bytes: &[u8]) -> Cow<'_, str> {
    let invalid = invalid_utf8_bytes(bytes);
    if invalid == 0 {
        return Cow::Borrowed(std::str::from_utf8(bytes).expect("validated"));
    }
    if (invalid as f64) > INVALID_FRACTION_LIMIT * bytes.len() as f64 {
        let encoding = declared_charset(bytes)
            .filter(|e| *e != encoding_rs::UTF_8)
            .unwrap_or(WINDOWS_1252);
        let (text, _, _) = encoding.decode(bytes);
        return Cow::Owned(text.into_owned());
    }
    String::from_utf8_lossy(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_utf8_passes_through() {
        assert_eq!(decode_html("héllo".as_bytes()), "héllo");
        assert_eq!(invalid_utf8_bytes("héllo".as_bytes()), 0);
    }

    #[test]
    fn sparse_invalid_bytes_use_lossy_replacement() {
        let mut bytes = b"a".repeat(100);
        bytes.push(0xff);
        let text = decode_html(&bytes);
        assert!(text.ends_with('\u{fffd}'));
    }

    #[test]
    fn dense_invalid_bytes_fall_back_to_declared_charset() {
        let mut bytes = b"<meta charset=\"iso-8859-1\"><p>".to_vec();
        bytes.extend(std::iter::repeat_n(0xe9u8, 20));
        let text = decode_html(&bytes);
        assert!(text.contains(&"é".repeat(20)));
    }

    #[test]
    fn http_equiv_charset_is_found() {
        let html = br#"<meta http-equiv="Content-Type" content="text/html; charset=windows-1251">"#;
        assert_eq!(declared_charset(html).unwrap().name(), "windows-1251");
    }
}
