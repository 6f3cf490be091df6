//! The carving filter pipeline: operation, status and MIME filters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{canonical_mime, ApiCall, ApiSequence, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Operation,
    Status,
    Mime,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Operation => "operation",
            FilterKind::Status => "status",
            FilterKind::Mime => "mime",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "operation" | "op" => Ok(FilterKind::Operation),
            "status" => Ok(FilterKind::Status),
            "mime" => Ok(FilterKind::Mime),
            other => Err(format!("unknown filter `{other}`")),
        }
    }
}

/// Name under which URL deny-pattern drops are reported.
pub const URL_DENY: &str = "url_deny";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Drop,
}

/// A named predicate; calls it accepts survive every filter.
#[derive(Clone)]
pub struct KeepPredicate {
    pub name: String,
    pub predicate: Arc<dyn Fn(&ApiCall) -> bool + Send + Sync>,
}

impl fmt::Debug for KeepPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeepPredicate").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub enabled_filters: Vec<FilterKind>,
    pub extra_mime_allow: BTreeSet<String>,
    pub url_deny_patterns: Vec<String>,
    #[serde(skip)]
    pub keep_predicates: Vec<KeepPredicate>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            enabled_filters: vec![FilterKind::Operation, FilterKind::Status, FilterKind::Mime],
            extra_mime_allow: BTreeSet::new(),
            url_deny_patterns: Vec::new(),
            keep_predicates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub recorded_count: usize,
    pub kept_count: usize,
    pub dropped_by_filter: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn dropped(&self) -> usize {
        self.dropped_by_filter.values().sum()
    }
}

pub fn operation_filter(call: &ApiCall) -> Verdict {
    match call.request.method {
        Method::Trace | Method::Connect => Verdict::Drop,
        _ => Verdict::Keep,
    }
}

pub fn status_filter(call: &ApiCall) -> Verdict {
    if (400..=599).contains(&call.response.status) {
        Verdict::Drop
    } else {
        Verdict::Keep
    }
}

/// True for JSON and XML media types, including `+json`/`+xml` suffixes.
pub fn is_structured_mime(mime: &str) -> bool {
    let m = canonical_mime(mime);
    matches!(
        m.as_str(),
        "text/json" | "text/xml" | "application/json" | "application/xml"
    ) || m.ends_with("+json")
        || m.ends_with("+xml")
}

pub fn mime_filter(call: &ApiCall, cfg: &FilterConfig) -> Verdict {
    if !call.response.has_body() {
        return if call.request.method.is_mutating() {
            Verdict::Keep
        } else {
            Verdict::Drop
        };
    }
    let Some(mime) = call.response.body_mime.as_deref() else {
        return Verdict::Drop;
    };
    let m = canonical_mime(mime);
    if is_structured_mime(&m) || cfg.extra_mime_allow.iter().any(|a| canonical_mime(a) == m) {
        Verdict::Keep
    } else {
        Verdict::Drop
    }
}

fn url_denied(call: &ApiCall, patterns: &[glob::Pattern]) -> bool {
    patterns.iter().any(|p| p.matches(&call.request.url))
}

/// Runs the configured filters in order; drops are attributed to the first
/// filter that fires.
pub fn run_pipeline(seq: &ApiSequence, cfg: &FilterConfig) -> (ApiSequence, FilterReport) {
    let deny: Vec<glob::Pattern> = cfg
        .url_deny_patterns
        .iter()
        .filter_map(|p| glob::Pattern::new(p).ok())
        .collect();
    let mut report = FilterReport {
        recorded_count: seq.len(),
        ..FilterReport::default()
    };
    let mut kept = Vec::new();
    'calls: for call in &seq.calls {
        if cfg.keep_predicates.iter().any(|k| (k.predicate)(call)) {
            kept.push(call.clone());
            continue;
        }
        for kind in &cfg.enabled_filters {
            let verdict = match kind {
                FilterKind::Operation => operation_filter(call),
                FilterKind::Status => status_filter(call),
                FilterKind::Mime => mime_filter(call, cfg),
            };
            if verdict == Verdict::Drop {
                *report.dropped_by_filter.entry(kind.name().to_string()).or_default() += 1;
                continue 'calls;
            }
        }
        if url_denied(call, &deny) {
            *report.dropped_by_filter.entry(URL_DENY.to_string()).or_default() += 1;
            continue;
        }
        kept.push(call.clone());
    }
    report.kept_count = kept.len();
    (ApiSequence::new(seq.base_url.clone(), kept), report)
}
