//! Streaming WARC reader.
//!
//! Reads WARC 1.0/1.1 archives, either as a concatenation of gzip members
//! (the Common Crawl layout) or as an uncompressed stream, and yields one
//! [`RawPage`] per HTTP response record that carries HTML. Every other
//! record is skipped and counted in [`ReadStats`], so that
//! `pages + skipped == records` holds at the end of the stream.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, BufReader, Read};

use flate2::bufread::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Error)]
pub enum WarcError {
    #[error("truncated gzip member starting at byte offset {offset}: {error}")]
    Truncated { offset: u64, error: io::Error },
    #[error("i/o error at byte offset {offset}: {error}")]
    Io { offset: u64, error: io::Error },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PageIdError {
    #[error("record id is empty")]
    EmptyRecordId,
    #[error("record date is empty")]
    EmptyRecordDate,
}

/// Identity of a crawl record: `WARC-Record-ID` immediately followed by
/// `WARC-Date`. This is the join key across extractor variants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(String);

impl PageId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps an already-joined identifier, e.g. one read back from JSONL.
    pub fn from_joined(value: impl Into<String>) -> Self {
        PageId(value.into())
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn make_page_id(record_id: &str, record_date: &str) -> Result<PageId, PageIdError> {
    if record_id.is_empty() {
        return Err(PageIdError::EmptyRecordId);
    }
    if record_date.is_empty() {
        return Err(PageIdError::EmptyRecordDate);
    }
    let mut value = String::with_capacity(record_id.len() + record_date.len());
    value.push_str(record_id);
    value.push_str(record_date);
    Ok(PageId(value))
}

/// One HTML response pulled from an archive. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPage {
    pub page_id: PageId,
    pub url: String,
    pub fetch_time: String,
    pub content_type: String,
    #[serde(with = "base64_bytes")]
    pub html: Vec<u8>,
    /// Set when the record had no `WARC-Date` and the archive-level date
    /// (from the `warcinfo` record) was used instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub date_inferred: bool,
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD
            .decode(s.as_bytes())
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// warcinfo, request, metadata, revisit, ...
    NotResponse,
    NotHtml,
    MalformedHeader,
    MalformedHttp,
    InvalidUrl,
    InvalidDate,
    MissingDate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    pub records: u64,
    pub pages: u64,
    pub skipped: BTreeMap<SkipReason, u64>,
}

impl ReadStats {
    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }

    fn skip(&mut self, reason: SkipReason) {
        self.records += 1;
        *self.skipped.entry(reason).or_default() += 1;
    }
}

/// `BufRead` adaptor that tracks how many bytes have been consumed.
struct Counting<R> {
    inner: R,
    pos: u64,
}

impl<R: BufRead> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}

impl<R: BufRead> BufRead for Counting<R> {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.pos += amt as u64;
        self.inner.consume(amt);
    }
}

enum State<R> {
    Start(Counting<R>),
    Between(Counting<R>),
    Member {
        reader: Box<BufReader<GzDecoder<Counting<R>>>>,
        offset: u64,
    },
    Plain(Counting<R>),
    Done,
}

/// Single-consumer iterator over the HTML pages of one archive.
pub struct WarcReader<R> {
    state: State<R>,
    stats: ReadStats,
    archive_date: Option<String>,
}

impl<R: BufRead> WarcReader<R> {
    pub fn new(inner: R) -> Self {
        WarcReader {
            state: State::Start(Counting { inner, pos: 0 }),
            stats: ReadStats::default(),
            archive_date: None,
        }
    }

    pub fn stats(&self) -> &ReadStats {
        &self.stats
    }

    pub fn into_stats(self) -> ReadStats {
        self.stats
    }

    fn next_page(&mut self) -> Option<Result<RawPage, WarcError>> {
        loop {
            match std::mem::replace(&mut self.state, State::Done) {
                State::Done => return None,
                State::Start(mut inner) => {
                    let head = match inner.fill_buf() {
                        Ok(buf) => buf.get(..2).map(|b| [b[0], b[1]]),
                        Err(error) => return Some(Err(WarcError::Io { offset: 0, error })),
                    };
                    self.state = match head {
                        Some(GZIP_MAGIC) => State::Between(inner),
                        _ => State::Plain(inner),
                    };
                }
                State::Between(mut inner) => {
                    let offset = inner.pos;
                    match inner.fill_buf() {
                        Ok([]) => return None,
                        Ok(_) => {}
                        Err(error) => return Some(Err(WarcError::Io { offset, error })),
                    }
                    self.state = State::Member {
                        reader: Box::new(BufReader::new(GzDecoder::new(inner))),
                        offset,
                    };
                }
                State::Member { mut reader, offset } => match read_record(&mut reader) {
                    Ok(Some(raw)) => {
                        self.state = State::Member { reader, offset };
                        if let Some(page) = self.accept(raw) {
                            return Some(Ok(page));
                        }
                    }
                    Ok(None) => {
                        let inner = reader.into_inner().into_inner();
                        self.state = State::Between(inner);
                    }
                    Err(error) => {
                        return Some(Err(WarcError::Truncated { offset, error }));
                    }
                },
                State::Plain(mut inner) => match read_record(&mut inner) {
                    Ok(Some(raw)) => {
                        self.state = State::Plain(inner);
                        if let Some(page) = self.accept(raw) {
                            return Some(Ok(page));
                        }
                    }
                    Ok(None) => return None,
                    Err(error) => {
                        let offset = inner.pos;
                        return Some(Err(WarcError::Io { offset, error }));
                    }
                },
            }
        }
    }

    fn accept(&mut self, raw: RecordOutcome) -> Option<RawPage> {
        let record = match raw {
            RecordOutcome::Malformed => {
                self.stats.skip(SkipReason::MalformedHeader);
                return None;
            }
            RecordOutcome::Record(r) => r,
        };
        let header = |name: &str| record.header(name);
        let kind = header("WARC-Type").unwrap_or_default().to_ascii_lowercase();
        if kind == "warcinfo" {
            if let Some(date) = header("WARC-Date") {
                self.archive_date = Some(date.to_string());
            }
        }
        if kind != "response" {
            self.stats.skip(SkipReason::NotResponse);
            return None;
        }
        let Some(record_id) = header("WARC-Record-ID").filter(|s| !s.is_empty()) else {
            self.stats.skip(SkipReason::MalformedHeader);
            return None;
        };
        let (date, date_inferred) = match header("WARC-Date").filter(|s| !s.is_empty()) {
            Some(d) => (d.to_string(), false),
            None => match &self.archive_date {
                Some(d) => (d.clone(), true),
                None => {
                    self.stats.skip(SkipReason::MissingDate);
                    return None;
                }
            },
        };
        if chrono::DateTime::parse_from_rfc3339(&date).is_err() {
            self.stats.skip(SkipReason::InvalidDate);
            return None;
        }
        let target = header("WARC-Target-URI").unwrap_or_default();
        let target = target.trim_start_matches('<').trim_end_matches('>');
        let url = match url::Url::parse(target) {
            Ok(u) if u.has_host() => u,
            _ => {
                self.stats.skip(SkipReason::InvalidUrl);
                return None;
            }
        };
        let Some(http) = parse_http_response(&record.block) else {
            self.stats.skip(SkipReason::MalformedHttp);
            return None;
        };
        let content_type = http
            .content_type
            .or_else(|| header("WARC-Identified-Payload-Type").map(str::to_string))
            .unwrap_or_default();
        if !is_html_content_type(&content_type) {
            self.stats.skip(SkipReason::NotHtml);
            return None;
        }
        let page_id = make_page_id(record_id, &date).expect("record id and date checked non-empty");
        self.stats.records += 1;
        self.stats.pages += 1;
        Some(RawPage {
            page_id,
            url: url.to_string(),
            fetch_time: date,
            content_type,
            html: http.body,
            date_inferred,
        })
    }
}

impl<R: BufRead> Iterator for WarcReader<R> {
    type Item = Result<RawPage, WarcError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_page()
    }
}

/// Reads every page of an archive, returning the pages and the final counters.
pub fn read_warc<R: BufRead>(stream: R) -> Result<(Vec<RawPage>, ReadStats), WarcError> {
    let mut reader = WarcReader::new(stream);
    let mut pages = Vec::new();
    for page in reader.by_ref() {
        pages.push(page?);
    }
    Ok((pages, reader.into_stats()))
}

pub fn is_html_content_type(content_type: &str) -> bool {
    let mime = content_type
        .split(';')
        .next()
        .unwrap_or_default()
        .trim()
        .to_ascii_lowercase();
    mime == "text/html" || mime == "application/xhtml+xml"
}

struct Record {
    headers: Vec<(String, String)>,
    block: Vec<u8>,
}

impl Record {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

enum RecordOutcome {
    Record(Record),
    Malformed,
}

fn read_line<R: BufRead>(r: &mut R, buf: &mut Vec<u8>) -> io::Result<usize> {
    buf.clear();
    r.read_until(b'\n', buf)
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

/// Reads the next record. `Ok(None)` at a clean end of stream.
///
/// A header block that cannot be parsed consumes input up to the next
/// `WARC/` version line and reports [`RecordOutcome::Malformed`].
fn read_record<R: BufRead>(r: &mut R) -> io::Result<Option<RecordOutcome>> {
    let mut line = Vec::new();
    // Skip blank separator lines between records.
    loop {
        if read_line(r, &mut line)? == 0 {
            return Ok(None);
        }
        if !trim_eol(&line).is_empty() {
            break;
        }
    }
    if !trim_eol(&line).starts_with(b"WARC/") {
        resync(r)?;
        return Ok(Some(RecordOutcome::Malformed));
    }
    let mut headers = Vec::new();
    let mut malformed = false;
    loop {
        if read_line(r, &mut line)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "end of stream inside record header",
            ));
        }
        let l = trim_eol(&line);
        if l.is_empty() {
            break;
        }
        if (l[0] == b' ' || l[0] == b'\t') && !headers.is_empty() {
            let (_, v): &mut (String, String) = headers.last_mut().unwrap();
            v.push(' ');
            v.push_str(String::from_utf8_lossy(l).trim());
            continue;
        }
        match l.iter().position(|&b| b == b':') {
            Some(i) => {
                let name = String::from_utf8_lossy(&l[..i]).trim().to_string();
                let value = String::from_utf8_lossy(&l[i + 1..]).trim().to_string();
                headers.push((name, value));
            }
            None => malformed = true,
        }
    }
    let length = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("Content-Length"))
        .and_then(|(_, v)| v.parse::<u64>().ok());
    let Some(length) = length else {
        resync(r)?;
        return Ok(Some(RecordOutcome::Malformed));
    };
    let mut block = Vec::with_capacity(length.min(1 << 24) as usize);
    r.take(length).read_to_end(&mut block)?;
    if (block.len() as u64) < length {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "end of stream inside record block",
        ));
    }
    if malformed {
        return Ok(Some(RecordOutcome::Malformed));
    }
    Ok(Some(RecordOutcome::Record(Record { headers, block })))
}

/// Consumes lines until the next line would start a record.
fn resync<R: BufRead>(r: &mut R) -> io::Result<()> {
    loop {
        let buf = r.fill_buf()?;
        if buf.is_empty() || buf.starts_with(b"WARC/") {
            return Ok(());
        }
        let mut line = Vec::new();
        read_line(r, &mut line)?;
    }
}

struct HttpResponse {
    content_type: Option<String>,
    body: Vec<u8>,
}

fn parse_http_response(block: &[u8]) -> Option<HttpResponse> {
    let header_end = find_subslice(block, b"\r\n\r\n")
        .map(|i| (i, i + 4))
        .or_else(|| find_subslice(block, b"\n\n").map(|i| (i, i + 2)))?;
    let head = String::from_utf8_lossy(&block[..header_end.0]);
    let mut lines = head.lines();
    let status = lines.next()?;
    if !status.starts_with("HTTP/") {
        return None;
    }
    let mut content_type = None;
    let mut chunked = false;
    for line in lines {
        let Some((name, value)) = line.split_once(':') else {
            continue;
        };
        let name = name.trim();
        if name.eq_ignore_ascii_case("Content-Type") {
            content_type = Some(value.trim().to_string());
        } else if name.eq_ignore_ascii_case("Transfer-Encoding") {
            chunked = value.to_ascii_lowercase().contains("chunked");
        }
    }
    let raw = &block[header_end.1..];
    let body = if chunked {
        dechunk(raw).unwrap_or_else(|| raw.to_vec())
    } else {
        raw.to_vec()
    };
    Some(HttpResponse { content_type, body })
}

fn dechunk(mut data: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(data.len());
    loop {
        let eol = find_subslice(data, b"\r\n")?;
        let size_field = std::str::from_utf8(&data[..eol]).ok()?;
        let size_field = size_field.split(';').next()?.trim();
        let size = usize::from_str_radix(size_field, 16).ok()?;
        data = &data[eol + 2..];
        if size == 0 {
            return Some(out);
        }
        out.extend_from_slice(data.get(..size)?);
        data = data.get(size..)?;
        data = data.strip_prefix(b"\r\n").unwrap_or(data);
    }
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}
