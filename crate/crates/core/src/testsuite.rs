//! Carved test suites: emission, cookie handling and sequential replay.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use cookie::Cookie;
use serde::{Deserialize, Serialize};
use time::OffsetDateTime;

use crate::model::{
    canonical_mime, ApiCall, ApiSequence, Headers, HttpRequest, HttpResponse, Method, Origin,
};
use crate::probe::find_checkpoints;
use crate::transport::{rebase_url, Transport};

pub const SUITE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed suite: {0}")]
    Format(String),
    #[error("unsupported suite version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectClass {
    #[serde(rename = "2xx")]
    Success,
    #[serde(rename = "3xx")]
    Redirect,
    #[serde(rename = "any")]
    Any,
}

impl ExpectClass {
    pub fn of_status(status: u16) -> Self {
        match status / 100 {
            2 => ExpectClass::Success,
            3 => ExpectClass::Redirect,
            _ => ExpectClass::Any,
        }
    }

    pub fn accepts(self, status: u16) -> bool {
        match self {
            ExpectClass::Success => (200..300).contains(&status),
            ExpectClass::Redirect => (300..400).contains(&status),
            ExpectClass::Any => true,
        }
    }
}

/// The response seen when the step was recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub status: u16,
    #[serde(default)]
    pub headers: Headers,
    #[serde(default)]
    pub mime: Option<String>,
    #[serde(default)]
    pub body_b64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestStep {
    pub method: Method,
    /// Path relative to the suite's base URL, starting with `/`.
    pub path: String,
    pub query: Option<String>,
    pub headers: Headers,
    pub body_b64: Option<String>,
    pub expect: ExpectClass,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded: Option<RecordedResponse>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub steps: Vec<TestStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub version: u32,
    pub base_url: String,
    pub cases: Vec<TestCase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Single,
    PerCheckpoint,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(SplitMode::Single),
            "per-checkpoint" => Ok(SplitMode::PerCheckpoint),
            other => Err(format!("unknown split mode `{other}`")),
        }
    }
}

fn placeholder(name: &str) -> String {
    format!("{{{{cookie:{name}}}}}")
}

/// Rewrites a Cookie header so every value becomes a jar placeholder.
fn templatize_cookie_header(value: &str) -> String {
    value
        .split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((name, _)) => format!("{}={}", name.trim(), placeholder(name.trim())),
            None => pair.to_string(),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn step_for(seq: &ApiSequence, call: &ApiCall) -> TestStep {
    let path = seq
        .relative_path(&call.request.url)
        .unwrap_or_else(|_| call.request.url.clone());
    let headers = call
        .request
        .headers
        .iter()
        .map(|(n, v)| {
            if n.eq_ignore_ascii_case("cookie") {
                (n.clone(), templatize_cookie_header(v))
            } else {
                (n.clone(), v.clone())
            }
        })
        .collect();
    let resp = &call.response;
    TestStep {
        method: call.request.method,
        path,
        query: call.request.query(),
        headers,
        body_b64: call.request.body.as_ref().map(|b| B64.encode(b)),
        expect: ExpectClass::of_status(resp.status),
        origin: call.origin,
        recorded: Some(RecordedResponse {
            status: resp.status,
            headers: resp.headers.clone(),
            mime: resp.body_mime.clone(),
            body_b64: resp.body.as_ref().map(|b| B64.encode(b)),
        }),
    }
}

/// Builds the suite for a carved sequence.
pub fn emit_suite(seq: &ApiSequence, split: SplitMode) -> TestSuite {
    let mut groups: Vec<Vec<&ApiCall>> = vec![Vec::new()];
    let checkpoints: Vec<usize> = find_checkpoints(seq).iter().map(|c| c.index).collect();
    for (i, call) in seq.calls.iter().enumerate() {
        groups.last_mut().expect("never empty").push(call);
        if split == SplitMode::PerCheckpoint && checkpoints.contains(&i) {
            groups.push(Vec::new());
        }
    }
    groups.retain(|g| !g.is_empty());
    let cases = match split {
        SplitMode::Single => groups
            .into_iter()
            .map(|g| TestCase {
                name: "carved".to_string(),
                steps: g.into_iter().map(|c| step_for(seq, c)).collect(),
            })
            .collect(),
        SplitMode::PerCheckpoint => groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| TestCase {
                name: format!("carved-{:03}", i + 1),
                steps: g.into_iter().map(|c| step_for(seq, c)).collect(),
            })
            .collect(),
    };
    TestSuite {
        version: SUITE_VERSION,
        base_url: seq.base_url.clone(),
        cases,
    }
}

impl TestSuite {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SuiteError> {
        let suite: TestSuite =
            serde_json::from_str(text).map_err(|e| SuiteError::Format(e.to_string()))?;
        if suite.version != SUITE_VERSION {
            return Err(SuiteError::Version(suite.version));
        }
        Ok(suite)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path).map_err(|e| SuiteError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), SuiteError> {
        std::fs::write(path, self.to_json()).map_err(|e| SuiteError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn step_count(&self) -> usize {
        self.cases.iter().map(|c| c.steps.len()).sum()
    }

    /// Rebuilds the call sequence; steps without a recorded response are
    /// skipped.
    pub fn to_sequence(&self) -> Result<ApiSequence, SuiteError> {
        let mut calls = Vec::new();
        for step in self.cases.iter().flat_map(|c| &c.steps) {
            let Some(rec) = &step.recorded else { continue };
            let request = step_request(&self.base_url, step, |v| Ok(v.to_string()))
                .map_err(SuiteError::Format)?;
            let body = rec
                .body_b64
                .as_deref()
                .map(|b| B64.decode(b))
                .transpose()
                .map_err(|e| SuiteError::Format(e.to_string()))?;
            calls.push(ApiCall {
                request,
                response: HttpResponse {
                    status: rec.status,
                    headers: rec.headers.clone(),
                    body,
                    body_mime: rec.mime.clone(),
                },
                sequence_index: 0,
                origin: step.origin,
            });
        }
        Ok(ApiSequence::new(self.base_url.clone(), calls))
    }
}

/// Builds a concrete request; `cookie` maps a Cookie header value.
fn step_request(
    base_url: &str,
    step: &TestStep,
    cookie: impl Fn(&str) -> Result<String, String>,
) -> Result<HttpRequest, String> {
    let mut url = crate::model::normalize_base(base_url);
    url.push_str(if step.path.is_empty() { "/" } else { &step.path });
    if let Some(q) = &step.query {
        url.push('?');
        url.push_str(q);
    }
    let mut headers = Headers::new();
    for (n, v) in &step.headers {
        if n.eq_ignore_ascii_case("cookie") {
            headers.push((n.clone(), cookie(v)?));
        } else {
            headers.push((n.clone(), v.clone()));
        }
    }
    let body = step
        .body_b64
        .as_deref()
        .map(|b| B64.decode(b))
        .transpose()
        .map_err(|e| format!("bad body_b64: {e}"))?;
    let body_mime = body.as_ref().and_then(|_| {
        headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case("content-type"))
            .map(|(_, v)| canonical_mime(v))
    });
    Ok(HttpRequest {
        method: step.method,
        url,
        headers,
        body,
        body_mime,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct StoredCookie {
    value: String,
    expires: Option<OffsetDateTime>,
}

/// Name-keyed cookie store with Max-Age/Expires handling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CookieJar {
    cookies: BTreeMap<String, StoredCookie>,
}

impl CookieJar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one Set-Cookie header value as seen at `now`.
    pub fn store_at(&mut self, set_cookie: &str, now: OffsetDateTime) {
        let Ok(c) = Cookie::parse(set_cookie.to_string()) else {
            return;
        };
        let expires = match c.max_age() {
            Some(age) => Some(now + age),
            None => c.expires_datetime(),
        };
        if expires.is_some_and(|e| e <= now) {
            self.cookies.remove(c.name());
            return;
        }
        self.cookies.insert(
            c.name().to_string(),
            StoredCookie {
                value: c.value().to_string(),
                expires,
            },
        );
    }

    pub fn store(&mut self, set_cookie: &str) {
        self.store_at(set_cookie, OffsetDateTime::now_utc());
    }

    pub fn absorb_at(&mut self, resp: &HttpResponse, now: OffsetDateTime) {
        for v in resp.headers_named("set-cookie") {
            self.store_at(v, now);
        }
    }

    pub fn absorb(&mut self, resp: &HttpResponse) {
        self.absorb_at(resp, OffsetDateTime::now_utc());
    }

    pub fn get_at(&self, name: &str, now: OffsetDateTime) -> Option<&str> {
        self.cookies
            .get(name)
            .filter(|c| c.expires.is_none_or(|e| e > now))
            .map(|c| c.value.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.get_at(name, OffsetDateTime::now_utc())
    }

    /// Live cookies in name order.
    pub fn live_at(&self, now: OffsetDateTime) -> Vec<(String, String)> {
        self.cookies
            .iter()
            .filter(|(_, c)| c.expires.is_none_or(|e| e > now))
            .map(|(n, c)| (n.clone(), c.value.clone()))
            .collect()
    }

    /// Replaces every `{{cookie:name}}` in `text`; names absent from the jar
    /// are an error.
    pub fn resolve_at(&self, text: &str, now: OffsetDateTime) -> Result<String, String> {
        let mut out = String::new();
        let mut rest = text;
        while let Some(start) = rest.find("{{cookie:") {
            out.push_str(&rest[..start]);
            let after = &rest[start + "{{cookie:".len()..];
            let Some(end) = after.find("}}") else {
                return Err(format!("unterminated placeholder in `{text}`"));
            };
            let name = &after[..end];
            match self.get_at(name, now) {
                Some(v) => out.push_str(v),
                None => return Err(format!("no live cookie `{name}` for placeholder")),
            }
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// A replay context: one transport, one jar, requests moved from the
/// recording base onto the target base.
pub struct Session<'t> {
    transport: &'t mut dyn Transport,
    pub jar: CookieJar,
    source_base: String,
    target_base: String,
}

impl<'t> Session<'t> {
    pub fn new(transport: &'t mut dyn Transport, source_base: &str, target_base: &str) -> Self {
        Session {
            transport,
            jar: CookieJar::new(),
            source_base: source_base.to_string(),
            target_base: target_base.to_string(),
        }
    }

    pub fn target_base(&self) -> &str {
        &self.target_base
    }

    /// Sends `req` as is, apart from rebasing, and feeds Set-Cookie headers
    /// into the jar.
    pub fn send_raw(&mut self, req: &HttpRequest) -> Result<HttpResponse, crate::transport::TransportError> {
        let mut req = req.clone();
        req.url = rebase_url(&req.url, &self.source_base, &self.target_base);
        let resp = self.transport.send(&req)?;
        self.jar.absorb(&resp);
        Ok(resp)
    }

    /// Sends `req` carrying all live jar cookies, plus recorded cookies the
    /// jar does not know about.
    pub fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, crate::transport::TransportError> {
        let live = self.jar.live_at(OffsetDateTime::now_utc());
        let mut pairs = live.clone();
        for v in req.headers.iter().filter(|(n, _)| n.eq_ignore_ascii_case("cookie")) {
            for part in v.1.split(';') {
                if let Some((n, val)) = part.trim().split_once('=') {
                    let templated = val.starts_with("{{cookie:");
                    if !templated && !pairs.iter().any(|(k, _)| k == n) {
                        pairs.push((n.to_string(), val.to_string()));
                    }
                }
            }
        }
        let mut out = req.clone();
        out.headers.retain(|(n, _)| !n.eq_ignore_ascii_case("cookie"));
        if !pairs.is_empty() {
            let value = pairs
                .iter()
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join("; ");
            out.headers.push(("Cookie".to_string(), value));
        }
        self.send_raw(&out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub name: String,
    pub method: Method,
    pub url: String,
    pub status: Option<u16>,
    pub latency_ms: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub per_step: Vec<StepResult>,
    pub wall_time_ms: f64,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:<7} {:>6} {:>9}  {:<4}  URL", "STEP", "METHOD", "STATUS", "MS", "");
        for s in &self.per_step {
            let status = s.status.map_or("-".to_string(), |v| v.to_string());
            let verdict = match s.verdict {
                Verdict::Pass => "ok",
                Verdict::Fail => "FAIL",
            };
            let _ = writeln!(
                out,
                "{:<16} {:<7} {:>6} {:>9.1}  {:<4}  {}",
                s.name, s.method, status, s.latency_ms, verdict, s.url
            );
            if let Some(d) = &s.diagnostic {
                let _ = writeln!(out, "{:<16} {}", "", d);
            }
        }
        let _ = writeln!(
            out,
            "{} steps, {} passed, {} failed in {:.1} ms",
            self.total, self.passed, self.failed, self.wall_time_ms
        );
        out
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Runs every step in order against `target`, sharing one cookie jar across
/// the whole suite.
pub fn replay(suite: &TestSuite, transport: &mut dyn Transport, target: &str) -> RunReport {
    let started = Instant::now();
    let mut session = Session::new(transport, &suite.base_url, target);
    let mut per_step = Vec::new();
    for case in &suite.cases {
        for (i, step) in case.steps.iter().enumerate() {
            let name = format!("{}#{}", case.name, i + 1);
            let now = OffsetDateTime::now_utc();
            let jar = session.jar.clone();
            let built = step_request(&suite.base_url, step, |v| jar.resolve_at(v, now));
            let req = match built {
                Ok(r) => r,
                Err(diag) => {
                    per_step.push(StepResult {
                        name,
                        method: step.method,
                        url: rebase_url(
                            &format!("{}{}", suite.base_url, step.path),
                            &suite.base_url,
                            target,
                        ),
                        status: None,
                        latency_ms: 0.0,
                        verdict: Verdict::Fail,
                        diagnostic: Some(diag),
                    });
                    continue;
                }
            };
            let url = rebase_url(&req.url, &suite.base_url, target);
            let t0 = Instant::now();
            let outcome = session.send_raw(&req);
            let latency_ms = ms(t0.elapsed());
            let (status, verdict, diagnostic) = match outcome {
                Ok(resp) if step.expect.accepts(resp.status) => (Some(resp.status), Verdict::Pass, None),
                Ok(resp) => (
                    Some(resp.status),
                    Verdict::Fail,
                    Some(format!("expected {:?}, got {}", step.expect, resp.status)),
                ),
                Err(e) => (None, Verdict::Fail, Some(e.to_string())),
            };
            per_step.push(StepResult {
                name,
                method: step.method,
                url,
                status,
                latency_ms,
                verdict,
                diagnostic,
            });
        }
    }
    let passed = per_step.iter().filter(|s| s.verdict == Verdict::Pass).count();
    RunReport {
        total: per_step.len(),
        passed,
        failed: per_step.len() - passed,
        per_step,
        wall_time_ms: ms(started.elapsed()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::TransportError;
    use serde_json::json;
    use time::macros::datetime;

    fn call(method: Method, path: &str, resp: HttpResponse) -> ApiCall {
        ApiCall::new(HttpRequest::new(method, format!("http://h/api{path}")), resp)
    }

    fn running_example_calls() -> ApiSequence {
        let ok = || HttpResponse::json(200, &json!({"k": 1}));
        ApiSequence::new(
            "http://h/api",
            vec![
                call(Method::Get, "/users/user1/info", ok()),
                call(Method::Get, "/users/user2/info", ok()),
                call(Method::Get, "/users/user2", ok()),
                call(Method::Post, "/users/user1/follow", ok()),
                call(Method::Get, "/tags", ok()),
            ],
        )
    }

    #[test]
    fn single_mode_one_case() {
        let suite = emit_suite(&running_example_calls(), SplitMode::Single);
        assert_eq!(suite.cases.len(), 1);
        assert_eq!(suite.cases[0].steps.len(), 5);
        assert_eq!(suite.cases[0].steps[0].path, "/users/user1/info");
        assert_eq!(suite.cases[0].steps[0].expect, ExpectClass::Success);
    }

    #[test]
    fn per_checkpoint_split() {
        let ok = || HttpResponse::json(200, &json!({}));
        let seq = ApiSequence::new(
            "http://h/api",
            vec![
                call(Method::Get, "/a", ok()),
                call(Method::Post, "/b", ok()),
                call(Method::Get, "/c", ok()),
                call(Method::Put, "/d", ok()),
                call(Method::Get, "/e", ok()),
            ],
        );
        let suite = emit_suite(&seq, SplitMode::PerCheckpoint);
        let sizes: Vec<usize> = suite.cases.iter().map(|c| c.steps.len()).collect();
        assert_eq!(sizes, [2, 2, 1]);
        let names: Vec<&str> = suite.cases.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["carved-001", "carved-002", "carved-003"]);
    }

    #[test]
    fn empty_sequence_gives_empty_suite() {
        let suite = emit_suite(&ApiSequence::new("http://h", vec![]), SplitMode::Single);
        assert!(suite.cases.is_empty());
        assert_eq!(TestSuite::from_json(&suite.to_json()).unwrap(), suite);
    }

    #[test]
    fn cookies_become_placeholders_and_round_trip() {
        let mut seq = running_example_calls();
        seq.calls[1].request.headers.push(("Cookie".into(), "session=abc; theme=dark".into()));
        let suite = emit_suite(&seq, SplitMode::Single);
        let h = &suite.cases[0].steps[1].headers[0];
        assert_eq!(h.1, "session={{cookie:session}}; theme={{cookie:theme}}");
        let text = suite.to_json();
        assert_eq!(TestSuite::from_json(&text).unwrap(), suite);
        let back = suite.to_sequence().unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back.calls[4].response.body, seq.calls[4].response.body);
    }

    #[test]
    fn file_format_keys() {
        let suite = emit_suite(&running_example_calls(), SplitMode::Single);
        let v: serde_json::Value = serde_json::from_str(&suite.to_json()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["version", "base_url", "cases"]);
        let step = &v["cases"][0]["steps"][0];
        let keys: Vec<&String> = step.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            ["method", "path", "query", "headers", "body_b64", "expect", "origin", "recorded"]
        );
        assert_eq!(step["method"], "GET");
        assert_eq!(step["expect"], "2xx");
        assert_eq!(step["origin"], "RECORDED");
    }

    #[test]
    fn jar_expiry_rules() {
        let now = datetime!(2024-01-01 0:00 UTC);
        let mut jar = CookieJar::new();
        jar.store_at("session=abc; Path=/", now);
        jar.store_at("short=1; Max-Age=10", now);
        jar.store_at("old=1; Expires=Wed, 21 Oct 2015 07:28:00 GMT", now);
        assert_eq!(jar.get_at("session", now), Some("abc"));
        assert_eq!(jar.get_at("short", now), Some("1"));
        assert_eq!(jar.get_at("old", now), None);
        let later = now + time::Duration::seconds(11);
        assert_eq!(jar.get_at("short", later), None);
        jar.store_at("session=gone; Max-Age=0", now);
        assert_eq!(jar.get_at("session", now), None);
        jar.store_at("a=1", now);
        assert_eq!(jar.resolve_at("a={{cookie:a}}", now).unwrap(), "a=1");
        assert!(jar.resolve_at("b={{cookie:b}}", now).is_err());
    }

    /// Login sets a cookie; later requests must carry it.
    struct CookieServer {
        seen: Vec<Option<String>>,
    }

    impl Transport for CookieServer {
        fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
            self.seen.push(req.header("cookie").map(str::to_string));
            if req.url.ends_with("/login") {
                return Ok(HttpResponse::new(200).with_header("Set-Cookie", "session=abc; Path=/"));
            }
            if req.url.ends_with("/boom") {
                return Ok(HttpResponse::new(500));
            }
            if req.url.ends_with("/down") {
                return Err(TransportError("connection refused".into()));
            }
            Ok(HttpResponse::json(200, &json!({})))
        }
    }

    fn step(method: Method, path: &str, headers: Headers, expect: ExpectClass) -> TestStep {
        TestStep {
            method,
            path: path.into(),
            query: None,
            headers,
            body_b64: None,
            expect,
            origin: Origin::Recorded,
            recorded: None,
        }
    }

    #[test]
    fn replay_substitutes_cookies_and_continues_after_failures() {
        let suite = TestSuite {
            version: 1,
            base_url: "http://rec/api".into(),
            cases: vec![TestCase {
                name: "c".into(),
                steps: vec![
                    step(
                        Method::Get,
                        "/early",
                        vec![("Cookie".into(), "session={{cookie:session}}".into())],
                        ExpectClass::Success,
                    ),
                    step(Method::Post, "/login", vec![], ExpectClass::Success),
                    step(
                        Method::Get,
                        "/me",
                        vec![("Cookie".into(), "session={{cookie:session}}".into())],
                        ExpectClass::Success,
                    ),
                    step(Method::Get, "/boom", vec![], ExpectClass::Success),
                    step(Method::Get, "/down", vec![], ExpectClass::Any),
                    step(Method::Get, "/after", vec![], ExpectClass::Success),
                ],
            }],
        };
        let mut server = CookieServer { seen: vec![] };
        let report = replay(&suite, &mut server, "http://live:9/api");
        assert_eq!(report.total, report.passed + report.failed);
        let verdicts: Vec<Verdict> = report.per_step.iter().map(|s| s.verdict).collect();
        use Verdict::*;
        assert_eq!(verdicts, [Fail, Pass, Pass, Fail, Fail, Pass]);
        assert!(report.per_step[0].diagnostic.as_ref().unwrap().contains("session"));
        // The unresolved step was never sent.
        assert_eq!(server.seen.len(), 5);
        assert_eq!(server.seen[1].as_deref(), Some("session=abc"));
        assert_eq!(report.per_step[2].url, "http://live:9/api/me");
    }

    #[test]
    fn session_merges_jar_and_recorded_cookies() {
        let mut server = CookieServer { seen: vec![] };
        let mut s = Session::new(&mut server, "http://rec/api", "http://live/api");
        s.send(&HttpRequest::new(Method::Post, "http://rec/api/login")).unwrap();
        let req = HttpRequest::new(Method::Get, "http://rec/api/x")
            .with_header("Cookie", "session=stale; pref=1; t={{cookie:t}}");
        s.send(&req).unwrap();
        assert_eq!(server.seen[1].as_deref(), Some("session=abc; pref=1"));
    }

    #[test]
    fn expect_class_from_status() {
        assert_eq!(ExpectClass::of_status(204), ExpectClass::Success);
        assert_eq!(ExpectClass::of_status(302), ExpectClass::Redirect);
        assert_eq!(ExpectClass::of_status(101), ExpectClass::Any);
        assert!(!ExpectClass::Success.accepts(500));
        assert!(ExpectClass::Any.accepts(500));
    }
}
