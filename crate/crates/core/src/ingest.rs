//! Loading recorded traffic from HAR 1.2 archives and recorder JSONL logs.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::model::{
    canonical_mime, normalize_base, parse_path, ApiCall, ApiSequence, HttpRequest, HttpResponse,
    Method, ModelError, Origin,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at entry {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("recording contains no usable entries")]
    EmptyRecording,
    #[error("recorded URLs share no common scheme and authority")]
    MixedOrigin,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Har,
    Jsonl,
}

impl SourceKind {
    /// Guesses the kind from the file extension (`.har` or `.jsonl`/`.ndjson`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "har" => Some(SourceKind::Har),
            "jsonl" | "ndjson" => Some(SourceKind::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecordingSource {
    pub kind: SourceKind,
    pub path: PathBuf,
    /// Detected from the entries when absent.
    pub base_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loaded {
    pub sequence: ApiSequence,
    /// Entries outside the base URL.
    pub dropped: usize,
}

/// One line of the recorder log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub ts: String,
    pub method: String,
    pub url: String,
    #[serde(default)]
    pub req_headers: Vec<(String, String)>,
    #[serde(default)]
    pub req_body_b64: Option<String>,
    pub status: u16,
    #[serde(default)]
    pub resp_headers: Vec<(String, String)>,
    #[serde(default)]
    pub resp_body_b64: Option<String>,
    #[serde(default)]
    pub resp_mime: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

#[derive(Debug, Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Debug, Deserialize)]
struct HarLog {
    #[serde(default)]
    entries: Vec<HarEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarEntry {
    started_date_time: String,
    request: HarRequest,
    response: HarResponse,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarRequest {
    method: String,
    url: String,
    #[serde(default)]
    headers: Vec<HarHeader>,
    post_data: Option<HarPostData>,
}

#[derive(Debug, Deserialize)]
struct HarResponse {
    status: u16,
    #[serde(default)]
    headers: Vec<HarHeader>,
    content: Option<HarContent>,
}

#[derive(Debug, Deserialize)]
struct HarHeader {
    name: String,
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarPostData {
    mime_type: Option<String>,
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarContent {
    mime_type: Option<String>,
    text: Option<String>,
    encoding: Option<String>,
}

struct Timed {
    ts: DateTime<FixedOffset>,
    call: ApiCall,
}

fn parse_ts(index: usize, raw: &str) -> Result<DateTime<FixedOffset>, IngestError> {
    DateTime::parse_from_rfc3339(raw).map_err(|e| IngestError::Parse {
        index,
        message: format!("bad timestamp `{raw}`: {e}"),
    })
}

fn parse_method(index: usize, raw: &str) -> Result<Method, IngestError> {
    raw.parse().map_err(|e: ModelError| IngestError::Parse {
        index,
        message: e.to_string(),
    })
}

fn decode_b64(index: usize, raw: &str) -> Result<Vec<u8>, IngestError> {
    B64.decode(raw).map_err(|e| IngestError::Parse {
        index,
        message: format!("bad base64 body: {e}"),
    })
}

fn header_mime(headers: &[(String, String)]) -> Option<String> {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("content-type"))
        .map(|(_, v)| canonical_mime(v))
}

fn response_mime(
    declared: Option<&str>,
    headers: &[(String, String)],
    body: &Option<Vec<u8>>,
) -> Option<String> {
    let has_body = body.as_ref().is_some_and(|b| !b.is_empty());
    let declared = declared.filter(|m| !m.is_empty()).map(canonical_mime);
    match declared.or_else(|| header_mime(headers)) {
        Some(m) if has_body || header_mime(headers).is_some() => Some(m),
        _ => None,
    }
}

fn har_entry_to_call(index: usize, entry: HarEntry) -> Result<Timed, IngestError> {
    let ts = parse_ts(index, &entry.started_date_time)?;
    let method = parse_method(index, &entry.request.method)?;
    let req_headers: Vec<(String, String)> = entry
        .request
        .headers
        .into_iter()
        .map(|h| (h.name, h.value))
        .collect();
    let (req_body, req_mime) = match entry.request.post_data {
        Some(pd) => {
            let mime = pd
                .mime_type
                .filter(|m| !m.is_empty())
                .map(|m| canonical_mime(&m))
                .or_else(|| header_mime(&req_headers));
            (pd.text.map(String::into_bytes), mime)
        }
        None => (None, None),
    };
    let resp_headers: Vec<(String, String)> = entry
        .response
        .headers
        .into_iter()
        .map(|h| (h.name, h.value))
        .collect();
    let (resp_body, declared) = match entry.response.content {
        Some(c) => {
            let body = match (c.text, c.encoding.as_deref()) {
                (Some(t), Some(enc)) if enc.eq_ignore_ascii_case("base64") => {
                    Some(decode_b64(index, &t)?)
                }
                (Some(t), _) => Some(t.into_bytes()),
                (None, _) => None,
            };
            (body, c.mime_type)
        }
        None => (None, None),
    };
    let resp_mime = response_mime(declared.as_deref(), &resp_headers, &resp_body);
    let call = ApiCall {
        request: HttpRequest {
            method,
            url: entry.request.url,
            headers: req_headers,
            body: req_body,
            body_mime: req_mime,
        },
        response: HttpResponse {
            status: entry.response.status,
            headers: resp_headers,
            body: resp_body,
            body_mime: resp_mime,
        },
        sequence_index: index,
        origin: Origin::Recorded,
    };
    Ok(Timed { ts, call })
}

/// Converts one recorder record into a call.
pub fn record_to_call(index: usize, rec: JsonlRecord) -> Result<(DateTime<FixedOffset>, ApiCall), IngestError> {
    let ts = parse_ts(index, &rec.ts)?;
    let method = parse_method(index, &rec.method)?;
    let req_body = rec
        .req_body_b64
        .as_deref()
        .map(|b| decode_b64(index, b))
        .transpose()?;
    let resp_body = rec
        .resp_body_b64
        .as_deref()
        .map(|b| decode_b64(index, b))
        .transpose()?;
    let req_mime = header_mime(&rec.req_headers);
    let resp_mime = response_mime(rec.resp_mime.as_deref(), &rec.resp_headers, &resp_body);
    let call = ApiCall {
        request: HttpRequest {
            method,
            url: rec.url,
            headers: rec.req_headers,
            body: req_body,
            body_mime: req_mime,
        },
        response: HttpResponse {
            status: rec.status,
            headers: rec.resp_headers,
            body: resp_body,
            body_mime: resp_mime,
        },
        sequence_index: index,
        origin: Origin::Recorded,
    };
    Ok((ts, call))
}

/// Parses HAR 1.2 JSON into calls ordered by `startedDateTime`.
pub fn parse_har(text: &str) -> Result<Vec<ApiCall>, IngestError> {
    let har: Har = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        index: 0,
        message: e.to_string(),
    })?;
    let timed = har
        .log
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| har_entry_to_call(i, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(order(timed))
}

/// Parses recorder JSONL into calls ordered by timestamp.
///
/// A final line that fails to parse is treated as a torn write and skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<ApiCall>, IngestError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut timed = Vec::with_capacity(lines.len());
    for (pos, (line_no, line)) in lines.iter().enumerate() {
        let rec: JsonlRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(_) if pos + 1 == lines.len() => break,
            Err(e) => {
                return Err(IngestError::Parse {
                    index: *line_no,
                    message: e.to_string(),
                })
            }
        };
        let (ts, call) = record_to_call(*line_no, rec)?;
        timed.push(Timed { ts, call });
    }
    Ok(order(timed))
}

fn order(mut timed: Vec<Timed>) -> Vec<ApiCall> {
    timed.sort_by_key(|t| t.ts);
    timed
        .into_iter()
        .enumerate()
        .map(|(i, mut t)| {
            t.call.sequence_index = i;
            t.call
        })
        .collect()
}

/// Longest common URL prefix, cut back to a `/` boundary, never shorter than
/// scheme and authority.
pub fn autodetect_base_url(calls: &[ApiCall]) -> Result<String, IngestError> {
    let mut origin: Option<String> = None;
    let mut prefix: Option<String> = None;
    for call in calls {
        let u = Url::parse(&call.request.url)
            .map_err(|_| ModelError::MalformedUri(call.request.url.clone()))?;
        let o = u.origin().ascii_serialization();
        match &origin {
            None => origin = Some(o),
            Some(existing) if *existing != o => return Err(IngestError::MixedOrigin),
            Some(_) => {}
        }
        let path = u.path().to_string();
        prefix = Some(match prefix {
            None => path,
            Some(p) => p
                .chars()
                .zip(path.chars())
                .take_while(|(a, b)| a == b)
                .map(|(a, _)| a)
                .collect(),
        });
    }
    let origin = origin.ok_or(IngestError::EmptyRecording)?;
    let prefix = prefix.unwrap_or_default();
    let cut = prefix.rfind('/').map(|i| &prefix[..i]).unwrap_or("");
    Ok(normalize_base(&format!("{origin}{cut}")))
}

/// Reads a recording and keeps only the entries under the base URL.
pub fn load(source: &RecordingSource) -> Result<Loaded, IngestError> {
    let text = std::fs::read_to_string(&source.path).map_err(|e| IngestError::Io {
        path: source.path.clone(),
        source: e,
    })?;
    let calls = match source.kind {
        SourceKind::Har => parse_har(&text)?,
        SourceKind::Jsonl => parse_jsonl(&text)?,
    };
    from_calls(calls, source.base_url.as_deref())
}

/// Applies the base-URL prefix filter to already parsed calls.
pub fn from_calls(calls: Vec<ApiCall>, base_url: Option<&str>) -> Result<Loaded, IngestError> {
    if calls.is_empty() {
        return Err(IngestError::EmptyRecording);
    }
    let base = match base_url {
        Some(b) => normalize_base(b),
        None => autodetect_base_url(&calls)?,
    };
    let total = calls.len();
    let kept: Vec<ApiCall> = calls
        .into_iter()
        .filter(|c| parse_path(&c.request.url, &base).is_ok())
        .collect();
    if kept.is_empty() {
        return Err(IngestError::EmptyRecording);
    }
    let dropped = total - kept.len();
    Ok(Loaded {
        sequence: ApiSequence::new(base, kept),
        dropped,
    })
}
