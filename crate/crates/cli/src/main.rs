use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use carvr_core::config::Config;
use carvr_core::evaluate::{diff_report, score, ScoreOptions};
use carvr_core::filter::{run_pipeline, FilterKind};
use carvr_core::graph::build_api_graph;
use carvr_core::ingest::{load, RecordingSource, SourceKind};
use carvr_core::model::{ApiSequence, HttpRequest, Method};
use carvr_core::probe::{expand, ProbeTarget, Strategy};
use carvr_core::similarity::Similarity;
use carvr_core::specgen::{extract_openapi, render_openapi, SpecConfig, SpecDocument, SpecFormat};
use carvr_core::testsuite::{emit_suite, replay, SplitMode, TestSuite};
use carvr_net::{FixtureServer, HttpTransport, ProxyConfig, Recorder};

#[derive(Parser, Debug)]
#[command(name = "carvr", version, about = "Carve API tests and infer OpenAPI specs from recorded HTTP traffic")]
struct Cli {
    /// Base URL under which recorded calls belong to the API.
    #[arg(long, global = true)]
    base_url: Option<String>,
    /// Directory for every output file, including summary.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// TOML file with [filter] and [probe] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the recording proxy.
    Record(RecordArgs),
    /// Load a HAR or JSONL recording and filter it into a sequence file.
    Carve(CarveArgs),
    /// Infer an OpenAPI document from a sequence file, optionally probing a live server.
    Infer(InferArgs),
    /// Write the API test suite for a sequence file.
    EmitTests(EmitArgs),
    /// Replay a test suite against a server.
    Replay(ReplayArgs),
    /// Score a generated spec against a ground-truth spec.
    Evaluate(EvaluateArgs),
    /// Serve the built-in example API.
    FixtureServe(FixtureArgs),
}

#[derive(Args, Debug)]
struct RecordArgs {
    #[arg(long, default_value = "127.0.0.1:8888")]
    listen: String,
    /// Fixed origin to forward to (reverse-proxy mode).
    #[arg(long)]
    upstream: Option<String>,
    #[arg(long, default_value = "recording.jsonl")]
    out: PathBuf,
    #[arg(long, default_value_t = 1 << 20)]
    max_body: usize,
    /// Stop after this many seconds instead of running until interrupted.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Debug)]
struct CarveArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated subset of operation,status,mime.
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<FilterKind>>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    sequence: PathBuf,
    #[arg(long, requires = "target")]
    probe: bool,
    /// Base URL of the live API to probe.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    max_probes: Option<usize>,
    /// Seconds.
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<Strategy>>,
    #[arg(long)]
    unsafe_methods: Option<bool>,
    #[arg(long)]
    tau: Option<f64>,
    /// Path on the target origin that restores its state, sent as POST.
    #[arg(long)]
    reset_path: Option<String>,
    #[arg(long, default_value = "yaml")]
    format: SpecFormat,
    #[arg(long, default_value = "Inferred API")]
    title: String,
}

#[derive(Args, Debug)]
struct EmitArgs {
    #[arg(long)]
    sequence: PathBuf,
    #[arg(long, default_value = "single")]
    split: SplitMode,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    suite: PathBuf,
    /// Base URL to replay against. Defaults to the suite's own.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    report_json: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    loose: bool,
    /// Methods left out of the starred operation scores.
    #[arg(long, value_delimiter = ',', default_value = "OPTIONS,HEAD")]
    ignore_methods: Vec<Method>,
    #[arg(long)]
    report_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
}

/// What a subcommand leaves behind.
struct Outcome {
    artifacts: Vec<PathBuf>,
    details: Value,
    /// Set when the artifact exists but the run found failures.
    failed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "debug"
    } else {
        "warn"
    }))
    .init();
    let name = command_name(&cli.command);
    let started = Instant::now();
    let result = run(&cli);
    let elapsed = started.elapsed().as_secs_f64();
    let (code, summary) = match &result {
        Ok(o) => (
            if o.failed { 1 } else { 0 },
            json!({
                "command": name,
                "ok": !o.failed,
                "artifacts": o.artifacts,
                "details": o.details,
                "elapsed_s": elapsed,
            }),
        ),
        Err(e) => {
            eprintln!("error: {e:#}");
            (
                2,
                json!({"command": name, "ok": false, "error": format!("{e:#}"), "elapsed_s": elapsed}),
            )
        }
    };
    if let Err(e) = write_json(&cli.out_dir.join("summary.json"), &summary) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Record(_) => "record",
        Command::Carve(_) => "carve",
        Command::Infer(_) => "infer",
        Command::EmitTests(_) => "emit-tests",
        Command::Replay(_) => "replay",
        Command::Evaluate(_) => "evaluate",
        Command::FixtureServe(_) => "fixture-serve",
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let config = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Config::from_toml(&text).with_context(|| format!("bad config {}", p.display()))?
        }
        None => Config::default(),
    };
    match &cli.command {
        Command::Record(a) => record(cli, a),
        Command::Carve(a) => carve(cli, config, a),
        Command::Infer(a) => infer(cli, config, a),
        Command::EmitTests(a) => emit_tests(cli, a),
        Command::Replay(a) => run_replay(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::FixtureServe(a) => fixture_serve(cli, a),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_sequence(path: &Path, base_url: Option<&str>) -> Result<ApiSequence> {
    let suite = TestSuite::read(path).with_context(|| format!("cannot load sequence {}", path.display()))?;
    let mut seq = suite.to_sequence().with_context(|| format!("bad sequence {}", path.display()))?;
    if let Some(b) = base_url {
        seq.base_url = b.trim_end_matches('/').to_string();
    }
    Ok(seq)
}

fn record(cli: &Cli, a: &RecordArgs) -> Result<Outcome> {
    let addr = a.listen.parse().with_context(|| format!("bad listen address {}", a.listen))?;
    let mut cfg = ProxyConfig::new(addr, &a.out);
    cfg.upstream = a.upstream.clone();
    cfg.max_body_capture = a.max_body;
    let proxy = Recorder::start(cfg)?;
    println!("recording on http://{} -> {}", proxy.addr(), a.out.display());
    let running = json!({"listen": proxy.addr().to_string(), "log": a.out, "running": true});
    write_json(
        &cli.out_dir.join("summary.json"),
        &json!({"command": "record", "ok": true, "artifacts": [&a.out], "details": running}),
    )?;
    match a.duration {
        Some(secs) => {
            std::thread::sleep(Duration::from_secs_f64(secs.max(0.0)));
            let stats = json!({
                "listen": proxy.addr().to_string(),
                "records": proxy.stats().records(),
                "skipped_tunnels": proxy.stats().skipped_tunnels(),
                "upstream_failures": proxy.stats().upstream_failures(),
            });
            proxy.stop()?;
            Ok(Outcome {
                artifacts: vec![a.out.clone()],
                details: stats,
                failed: false,
            })
        }
        None => {
            proxy.wait()?;
            bail!("recorder stopped")
        }
    }
}

fn carve(cli: &Cli, mut config: Config, a: &CarveArgs) -> Result<Outcome> {
    let kind = SourceKind::from_path(&a.input)
        .with_context(|| format!("{}: expected a .har or .jsonl file", a.input.display()))?;
    let loaded = load(&RecordingSource {
        kind,
        path: a.input.clone(),
        base_url: cli.base_url.clone(),
    })
    .with_context(|| format!("cannot ingest {}", a.input.display()))?;
    if let Some(f) = &a.filters {
        config.filter.enabled_filters = f.clone();
    }
    let (seq, report) = run_pipeline(&loaded.sequence, &config.filter);
    let seq_path = cli.out_dir.join("sequence.json");
    let report_path = cli.out_dir.join("filter-report.json");
    emit_suite(&seq, SplitMode::Single).write(&seq_path)?;
    write_json(&report_path, &report)?;
    println!("base URL     {}", seq.base_url);
    println!("outside base {}", loaded.dropped);
    println!("recorded     {}", report.recorded_count);
    for (filter, n) in &report.dropped_by_filter {
        println!("  dropped by {filter:<10} {n}");
    }
    println!("kept         {}", report.kept_count);
    Ok(Outcome {
        artifacts: vec![seq_path, report_path],
        details: json!({"base_url": seq.base_url, "outside_base": loaded.dropped, "filter": report}),
        failed: false,
    })
}

/// `scheme://host[:port]` of a URL.
fn origin_of(u: &str) -> Result<String> {
    let parsed = url::Url::parse(u).with_context(|| format!("bad URL {u}"))?;
    Ok(parsed.origin().ascii_serialization())
}

fn infer(cli: &Cli, mut config: Config, a: &InferArgs) -> Result<Outcome> {
    let seq = read_sequence(&a.sequence, cli.base_url.as_deref())?;
    let p = &mut config.probe;
    if let Some(v) = a.max_probes {
        p.max_probes = v;
    }
    if let Some(v) = a.max_time {
        p.max_time_secs = v;
    }
    if let Some(v) = &a.stages {
        p.stages = v.clone();
    }
    if let Some(v) = a.unsafe_methods {
        p.unsafe_methods = v;
    }
    if let Some(v) = a.tau {
        p.tau = v;
    }
    if let Some(v) = &a.reset_path {
        p.reset_path = Some(v.clone());
    }
    let similarity = Similarity::new(config.probe.tau);
    let graph = build_api_graph(&seq.calls, None, &seq.base_url, similarity).context("cannot build API graph")?;
    let mut artifacts = Vec::new();
    let mut details = json!({"calls": seq.len(), "probing": a.probe});
    let mut graph = if a.probe {
        let target = a.target.clone().expect("clap enforces --target with --probe");
        let target = target.trim_end_matches('/').to_string();
        let reset = match &config.probe.reset_path {
            Some(path) => Some(HttpRequest::new(Method::Post, format!("{}{path}", origin_of(&target)?))),
            None => None,
        };
        let mut transport = HttpTransport::new(Duration::from_secs(30))?;
        let mut probe_target = ProbeTarget {
            transport: &mut transport,
            base_url: target,
            reset,
        };
        let out = expand(&seq, graph, &config.probe.budget(), &mut probe_target).context("probing failed")?;
        let seq_path = cli.out_dir.join("sequence.probed.json");
        emit_suite(&out.sequence, SplitMode::Single).write(&seq_path)?;
        let stats_path = cli.out_dir.join("probe-stats.json");
        write_json(&stats_path, &out.stats)?;
        println!("{:<13} {:>9} {:>9} {:>9}", "STRATEGY", "GENERATED", "EXECUTED", "SUCCEEDED");
        for (s, st) in &out.stats.per_strategy {
            println!("{:<13} {:>9} {:>9} {:>9}", s.name(), st.generated, st.executed, st.succeeded);
        }
        if out.stats.budget_exhausted {
            println!("probe budget exhausted");
        }
        details["probe"] = serde_json::to_value(&out.stats)?;
        details["augmented_calls"] = json!(out.sequence.len());
        artifacts.push(seq_path);
        artifacts.push(stats_path);
        out.graph
    } else {
        graph
    };
    let doc = extract_openapi(
        &mut graph,
        &SpecConfig {
            title: a.title.clone(),
            server_url: None,
        },
    );
    let ext = match a.format {
        SpecFormat::Json => "json",
        SpecFormat::Yaml => "yaml",
    };
    let spec_path = cli.out_dir.join(format!("openapi.{ext}"));
    write_text(&spec_path, &render_openapi(&doc, a.format))?;
    for key in doc.path_items.keys() {
        println!("{key}");
    }
    details["paths"] = json!(doc.path_items.keys().collect::<Vec<_>>());
    artifacts.insert(0, spec_path);
    Ok(Outcome {
        artifacts,
        details,
        failed: false,
    })
}

fn emit_tests(cli: &Cli, a: &EmitArgs) -> Result<Outcome> {
    let seq = read_sequence(&a.sequence, cli.base_url.as_deref())?;
    let suite = emit_suite(&seq, a.split);
    let path = cli.out_dir.join("tests.json");
    suite.write(&path)?;
    println!("{} cases, {} steps -> {}", suite.cases.len(), suite.step_count(), path.display());
    Ok(Outcome {
        artifacts: vec![path],
        details: json!({"cases": suite.cases.len(), "steps": suite.step_count()}),
        failed: false,
    })
}

fn run_replay(cli: &Cli, a: &ReplayArgs) -> Result<Outcome> {
    let suite = TestSuite::read(&a.suite).with_context(|| format!("cannot load suite {}", a.suite.display()))?;
    let target = a
        .target
        .clone()
        .or_else(|| cli.base_url.clone())
        .unwrap_or_else(|| suite.base_url.clone());
    let mut transport = HttpTransport::new(Duration::from_secs_f64(a.timeout.max(0.001)))?;
    let report = replay(&suite, &mut transport, &target);
    print!("{}", report.to_table());
    let path = a.report_json.clone().unwrap_or_else(|| cli.out_dir.join("report.json"));
    write_json(&path, &report)?;
    Ok(Outcome {
        artifacts: vec![path],
        details: json!({
            "total": report.total,
            "passed": report.passed,
            "failed": report.failed,
            "wall_time_ms": report.wall_time_ms,
        }),
        failed: !report.all_passed(),
    })
}

fn read_spec(path: &Path) -> Result<SpecDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    SpecDocument::from_openapi_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<Outcome> {
    let gen = read_spec(&a.gen)?;
    let gt = read_spec(&a.gt)?;
    let opts = ScoreOptions {
        loose: a.loose,
        ignore_methods: a.ignore_methods.iter().copied().collect(),
    };
    let metrics = score(&gen, &gt, &opts);
    let diff = diff_report(&gen, &gt, &opts);
    print!("{}", metrics.to_table());
    print!("{}", diff.to_text());
    let metrics_path = a.report_json.clone().unwrap_or_else(|| cli.out_dir.join("metrics.json"));
    let diff_path = cli.out_dir.join("diff.json");
    write_json(&metrics_path, &metrics)?;
    write_json(&diff_path, &diff)?;
    Ok(Outcome {
        artifacts: vec![metrics_path, diff_path],
        details: json!({
            "path_precision": metrics.path_precision,
            "path_recall": metrics.path_recall,
            "op_precision": metrics.op_precision,
            "op_recall": metrics.op_recall,
            "op_precision_star": metrics.op_precision_star,
            "inconsistencies": diff.inconsistencies.len(),
        }),
        failed: false,
    })
}

fn fixture_serve(cli: &Cli, a: &FixtureArgs) -> Result<Outcome> {
    let addr = a.listen.parse().with_context(|| format!("bad listen address {}", a.listen))?;
    let server = FixtureServer::start(addr)?;
    println!("fixture API at {}", server.base_url());
    write_json(
        &cli.out_dir.join("summary.json"),
        &json!({
            "command": "fixture-serve",
            "ok": true,
            "artifacts": [],
            "details": {"base_url": server.base_url(), "running": true},
        }),
    )?;
    server.wait()?;
    bail!("fixture server stopped")
}
