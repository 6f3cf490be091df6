//! Traffic-level domain types shared by the whole pipeline.

use std::fmt;
use std::str::FromStr;

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed URI `{0}`")]
    MalformedUri(String),
    #[error("URI `{url}` is not under base `{base}`")]
    OutsideBase { url: String, base: String },
    #[error("unknown HTTP method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum Method {
    Get,
    Post,
    Put,
    Patch,
    Delete,
    Options,
    Head,
    Trace,
    Connect,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Get,
        Method::Post,
        Method::Put,
        Method::Patch,
        Method::Delete,
        Method::Options,
        Method::Head,
        Method::Trace,
        Method::Connect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Patch => "PATCH",
            Method::Delete => "DELETE",
            Method::Options => "OPTIONS",
            Method::Head => "HEAD",
            Method::Trace => "TRACE",
            Method::Connect => "CONNECT",
        }
    }

    /// Methods that can create, change or remove a resource.
    pub fn is_mutating(self) -> bool {
        matches!(
            self,
            Method::Post | Method::Put | Method::Patch | Method::Delete
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for Method {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Method> for &'static str {
    fn from(m: Method) -> Self {
        m.as_str()
    }
}

impl FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownMethod(s.to_string()))
    }
}

pub type Headers = Vec<(String, String)>;

fn find_header<'a>(headers: &'a Headers, name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Headers,
    pub body: Option<Vec<u8>>,
    pub body_mime: Option<String>,
}

impl HttpRequest {
    pub fn new(method: Method, url: impl Into<String>) -> Self {
        HttpRequest {
            method,
            url: url.into(),
            headers: Vec::new(),
            body: None,
            body_mime: None,
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    /// Attaches a body and sets both `body_mime` and a matching Content-Type header.
    pub fn with_body(mut self, body: impl Into<Vec<u8>>, mime: &str) -> Self {
        self.body = Some(body.into());
        self.body_mime = Some(canonical_mime(mime));
        if find_header(&self.headers, "content-type").is_none() {
            self.headers.push(("Content-Type".into(), mime.to_string()));
        }
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }

    /// Raw query string without the leading `?`.
    pub fn query(&self) -> Option<String> {
        parse_url(&self.url)
            .ok()
            .and_then(|u| u.query().map(str::to_string))
    }

    /// Decoded query pairs in order of appearance.
    pub fn query_pairs(&self) -> Vec<(String, String)> {
        parse_url(&self.url)
            .map(|u| u.query_pairs().map(|(k, v)| (k.into_owned(), v.into_owned())).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Headers,
    pub body: Option<Vec<u8>>,
    pub body_mime: Option<String>,
}

impl HttpResponse {
    pub fn new(status: u16) -> Self {
        HttpResponse {
            status,
            headers: Vec::new(),
            body: None,
            body_mime: None,
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn with_body(mut self, body: impl Into<Vec<u8>>, mime: &str) -> Self {
        self.body = Some(body.into());
        self.body_mime = Some(canonical_mime(mime));
        if find_header(&self.headers, "content-type").is_none() {
            self.headers.push(("Content-Type".into(), mime.to_string()));
        }
        self
    }

    pub fn json(status: u16, value: &serde_json::Value) -> Self {
        HttpResponse::new(status).with_body(value.to_string(), "application/json")
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }

    pub fn headers_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.headers
            .iter()
            .filter(move |(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn has_body(&self) -> bool {
        self.body.as_ref().is_some_and(|b| !b.is_empty())
    }

    pub fn is_success(&self) -> bool {
        !(400..=599).contains(&self.status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Recorded,
    Probe,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Recorded => "RECORDED",
            Origin::Probe => "PROBE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiCall {
    pub request: HttpRequest,
    pub response: HttpResponse,
    pub sequence_index: usize,
    pub origin: Origin,
}

impl ApiCall {
    pub fn new(request: HttpRequest, response: HttpResponse) -> Self {
        ApiCall {
            request,
            response,
            sequence_index: 0,
            origin: Origin::Recorded,
        }
    }
}

/// An ordered recording of API calls sharing one base URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiSequence {
    pub base_url: String,
    pub calls: Vec<ApiCall>,
}

impl ApiSequence {
    pub fn new(base_url: impl Into<String>, calls: Vec<ApiCall>) -> Self {
        let mut seq = ApiSequence {
            base_url: normalize_base(&base_url.into()),
            calls,
        };
        seq.reindex();
        seq
    }

    /// Reassigns `sequence_index` to `0..n` in list order.
    pub fn reindex(&mut self) {
        for (i, call) in self.calls.iter_mut().enumerate() {
            call.sequence_index = i;
        }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    pub fn segments(&self, call: &ApiCall) -> Result<Vec<String>, ModelError> {
        parse_path(&call.request.url, &self.base_url)
    }

    /// Path of `url` relative to the base, always starting with `/`.
    pub fn relative_path(&self, url: &str) -> Result<String, ModelError> {
        Ok(join_path(&parse_path(url, &self.base_url)?))
    }
}

pub(crate) fn normalize_base(base: &str) -> String {
    base.trim_end_matches('/').to_string()
}

fn parse_url(url: &str) -> Result<Url, ModelError> {
    match Url::parse(url) {
        Ok(u) => Ok(u),
        Err(url::ParseError::RelativeUrlWithoutBase) if url.starts_with('/') => {
            let dummy = Url::parse("http://relative.invalid").expect("static URL");
            dummy
                .join(url)
                .map_err(|_| ModelError::MalformedUri(url.to_string()))
        }
        Err(_) => Err(ModelError::MalformedUri(url.to_string())),
    }
}

fn decoded_segments(u: &Url) -> Vec<String> {
    u.path()
        .split('/')
        .filter(|s| !s.is_empty())
        .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
        .collect()
}

/// Splits the path of `url` into decoded segments relative to `base_url`.
///
/// Empty segments, the query and the fragment never produce segments.
/// `url` may be absolute or path-absolute; absolute URLs must share the
/// base's scheme and authority.
pub fn parse_path(url: &str, base_url: &str) -> Result<Vec<String>, ModelError> {
    let target = parse_url(url)?;
    let base = parse_url(base_url)?;
    if url.contains("://") && base_url.contains("://") && target.origin() != base.origin() {
        return Err(ModelError::OutsideBase {
            url: url.to_string(),
            base: base_url.to_string(),
        });
    }
    let segments = decoded_segments(&target);
    let prefix = decoded_segments(&base);
    if segments.len() < prefix.len() || segments[..prefix.len()] != prefix[..] {
        return Err(ModelError::OutsideBase {
            url: url.to_string(),
            base: base_url.to_string(),
        });
    }
    Ok(segments[prefix.len()..].to_vec())
}

/// Renders segments as a normalized path (`/` for no segments).
pub fn join_path(segments: &[String]) -> String {
    if segments.is_empty() {
        "/".to_string()
    } else {
        let mut out = String::new();
        for s in segments {
            out.push('/');
            out.push_str(s);
        }
        out
    }
}

/// Percent-encodes one segment for use in a URL path.
pub fn encode_segment(segment: &str) -> String {
    const SEGMENT: &percent_encoding::AsciiSet = &percent_encoding::NON_ALPHANUMERIC
        .remove(b'-')
        .remove(b'_')
        .remove(b'.')
        .remove(b'~');
    percent_encoding::utf8_percent_encode(segment, SEGMENT).to_string()
}

/// Builds `base + /seg1/seg2...` with each segment percent-encoded.
pub fn url_for(base_url: &str, segments: &[String]) -> String {
    let mut out = normalize_base(base_url);
    for s in segments {
        out.push('/');
        out.push_str(&encode_segment(s));
    }
    if segments.is_empty() && !out.ends_with('/') && out.matches('/').count() < 3 {
        out.push('/');
    }
    out
}

/// Lowercased media type with parameters removed.
pub fn canonical_mime(raw: &str) -> String {
    let media = raw.split(';').next().unwrap_or("").trim();
    let valid = media
        .split_once('/')
        .is_some_and(|(t, s)| !t.is_empty() && !s.is_empty() && !s.contains('/'));
    if valid {
        media.to_ascii_lowercase()
    } else {
        raw.to_ascii_lowercase()
    }
}
