use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

use carvr_core::ingest::JsonlRecord;
use carvr_core::model::{HttpRequest, Method};
use carvr_core::transport::Transport;
use carvr_net::{FixtureServer, HttpTransport, ProxyConfig, Recorder};

fn carvr(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carvr"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .output()
        .unwrap()
}

fn summary(out_dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Records a short fixture session through the proxy and returns the log.
fn record_session(fx: &FixtureServer, dir: &Path) -> std::path::PathBuf {
    let log = dir.join("session.jsonl");
    let mut cfg = ProxyConfig::new("127.0.0.1:0".parse().unwrap(), &log);
    cfg.upstream = Some(fx.origin());
    let proxy = Recorder::start(cfg).unwrap();
    let mut t = HttpTransport::new(Duration::from_secs(5)).unwrap();
    let at = |p: &str| format!("http://{}/api{p}", proxy.addr());
    let login = HttpRequest::new(Method::Post, at("/users/login"))
        .with_body(r#"{"username":"user1"}"#, "application/json");
    let resp = t.send(&login).unwrap();
    let cookie = resp.header("set-cookie").unwrap().split(';').next().unwrap().to_string();
    t.send(&HttpRequest::new(Method::Get, at("/articles")).with_header("Cookie", cookie.clone()))
        .unwrap();
    t.send(
        &HttpRequest::new(Method::Post, at("/articles"))
            .with_header("Cookie", cookie)
            .with_body(r#"{"title":"t","body":"b"}"#, "application/json"),
    )
    .unwrap();
    t.send(&HttpRequest::new(Method::Get, at("/tags"))).unwrap();
    proxy.stop().unwrap();
    log
}

/// Rewrites a JSONL log as HAR 1.2.
fn to_har(log: &Path, har: &Path) {
    let entries: Vec<Value> = std::fs::read_to_string(log)
        .unwrap()
        .lines()
        .map(|l| {
            let r: JsonlRecord = serde_json::from_str(l).unwrap();
            let headers = |h: &[(String, String)]| -> Vec<Value> {
                h.iter().map(|(n, v)| json!({"name": n, "value": v})).collect()
            };
            let text = |b: &Option<String>| {
                b.as_ref()
                    .map(|b| String::from_utf8(B64.decode(b).unwrap()).unwrap())
                    .unwrap_or_default()
            };
            let mut request = json!({
                "method": r.method,
                "url": r.url,
                "headers": headers(&r.req_headers),
            });
            if r.req_body_b64.is_some() {
                request["postData"] = json!({"mimeType": "application/json", "text": text(&r.req_body_b64)});
            }
            json!({
                "startedDateTime": r.ts,
                "request": request,
                "response": {
                    "status": r.status,
                    "headers": headers(&r.resp_headers),
                    "content": {"mimeType": r.resp_mime.clone().unwrap_or_default(), "text": text(&r.resp_body_b64)},
                },
            })
        })
        .collect();
    std::fs::write(har, json!({"log": {"version": "1.2", "entries": entries}}).to_string()).unwrap();
}

#[test]
fn jsonl_and_har_carve_to_the_same_sequence() {
    let fx = FixtureServer::start("127.0.0.1:0".parse().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = record_session(&fx, dir.path());
    let har = dir.path().join("session.har");
    to_har(&log, &har);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(carvr(&a, &["carve", "--input", &s(&log), "--base-url", &fx.base_url()]).status.success());
    assert!(carvr(&b, &["carve", "--input", &s(&har), "--base-url", &fx.base_url()]).status.success());
    let seq_a = std::fs::read_to_string(a.join("sequence.json")).unwrap();
    let seq_b = std::fs::read_to_string(b.join("sequence.json")).unwrap();
    assert_eq!(seq_a, seq_b);
    let sum = summary(&a);
    assert_eq!(sum["ok"], true);
    assert_eq!(sum["details"]["filter"]["kept_count"], 4);
}

#[test]
fn cookie_session_replays_after_reset() {
    let fx = FixtureServer::start("127.0.0.1:0".parse().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = record_session(&fx, dir.path());
    let out = dir.path().join("out");
    assert!(carvr(&out, &["carve", "--input", &s(&log), "--base-url", &fx.base_url()]).status.success());
    let seq = s(&out.join("sequence.json"));
    assert!(carvr(&out, &["emit-tests", "--sequence", &seq, "--split", "per-checkpoint"]).status.success());
    let suite: Value = serde_json::from_str(&std::fs::read_to_string(out.join("tests.json")).unwrap()).unwrap();
    assert!(suite["cases"].as_array().unwrap().len() >= 2);
    assert!(suite.to_string().contains("{{cookie:session}}"));
    HttpTransport::new(Duration::from_secs(5))
        .unwrap()
        .send(&HttpRequest::new(Method::Post, format!("{}/__reset", fx.origin())))
        .unwrap();
    let r = carvr(&out, &["replay", "--suite", &s(&out.join("tests.json")), "--target", &fx.base_url()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
    assert_eq!(summary(&out)["details"]["failed"], 0);
}

#[test]
fn replay_against_stopped_server_exits_one() {
    let fx = FixtureServer::start("127.0.0.1:0".parse().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = record_session(&fx, dir.path());
    let base = fx.base_url();
    let out = dir.path().join("out");
    assert!(carvr(&out, &["carve", "--input", &s(&log), "--base-url", &base]).status.success());
    assert!(carvr(&out, &["emit-tests", "--sequence", &s(&out.join("sequence.json"))]).status.success());
    fx.stop().unwrap();
    let r = carvr(&out, &["replay", "--suite", &s(&out.join("tests.json")), "--target", &base, "--timeout", "2"]);
    assert_eq!(r.status.code(), Some(1));
    let sum = summary(&out);
    assert_eq!(sum["ok"], false);
    assert_eq!(sum["details"]["failed"], sum["details"]["total"]);
}

#[test]
fn missing_input_is_an_error_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let r = carvr(dir.path(), &["carve", "--input", "/nonexistent/x.har"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("x.har"));
    assert_eq!(summary(dir.path())["ok"], false);
}

#[test]
fn probe_requires_target() {
    let dir = tempfile::tempdir().unwrap();
    let r = carvr(dir.path(), &["infer", "--sequence", "x.json", "--probe"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--target"));
}

#[test]
fn filter_selection_keeps_html_when_mime_is_off() {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = [("/a", "application/json", "{}"), ("/page", "text/html", "<p>")]
        .iter()
        .map(|(p, mime, body)| {
            serde_json::to_string(&JsonlRecord {
                ts: "2024-01-01T00:00:00Z".into(),
                method: "GET".into(),
                url: format!("http://h/api{p}"),
                req_headers: vec![],
                req_body_b64: None,
                status: 200,
                resp_headers: vec![("content-type".into(), mime.to_string())],
                resp_body_b64: Some(B64.encode(body)),
                resp_mime: Some(mime.to_string()),
                truncated: false,
            })
            .unwrap()
        })
        .collect();
    let log = dir.path().join("r.jsonl");
    std::fs::write(&log, lines.join("\n")).unwrap();
    let out = dir.path().join("out");
    let args = ["carve", "--input", &s(&log), "--base-url", "http://h/api"];
    assert!(carvr(&out, &args).status.success());
    assert_eq!(summary(&out)["details"]["filter"]["kept_count"], 1);
    let mut args = args.to_vec();
    args.extend(["--filters", "operation,status"]);
    assert!(carvr(&out, &args).status.success());
    assert_eq!(summary(&out)["details"]["filter"]["kept_count"], 2);
}

#[test]
fn carver_only_inference_and_config_file() {
    let fx = FixtureServer::start("127.0.0.1:0".parse().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = record_session(&fx, dir.path());
    let out = dir.path().join("out");
    let cfg = dir.path().join("carvr.toml");
    std::fs::write(&cfg, "[probe]\nmax_probes = 0\nreset_path = \"/__reset\"\n").unwrap();
    assert!(carvr(&out, &["carve", "--input", &s(&log), "--base-url", &fx.base_url()]).status.success());
    let seq = s(&out.join("sequence.json"));
    assert!(carvr(&out, &["infer", "--sequence", &seq, "--format", "json"]).status.success());
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(out.join("openapi.json")).unwrap()).unwrap();
    assert_eq!(spec["openapi"], "3.0.3");
    assert!(spec["paths"]["/articles"]["post"].is_object());
    let r = carvr(
        &out,
        &["--config", &s(&cfg), "infer", "--sequence", &seq, "--probe", "--target", &fx.base_url()],
    );
    assert!(r.status.success());
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(out.join("probe-stats.json")).unwrap()).unwrap();
    assert_eq!(stats["budget_exhausted"], true);
}
