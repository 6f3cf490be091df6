//! Recording HTTP/1.1 proxy.
//!
//! Works as a forward proxy (absolute-form request targets) or, with an
//! upstream origin, as a reverse proxy. Every completed exchange becomes one
//! JSONL line. CONNECT tunnels are relayed blind and only counted.

use std::convert::Infallible;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener as StdListener};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Request, Response, StatusCode};
use hyper_util::rt::TokioIo;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

use carvr_core::ingest::JsonlRecord;

use crate::convert::{end_to_end, mime_of, plain};

#[derive(Debug, Clone)]
pub struct ProxyConfig {
    pub listen_addr: SocketAddr,
    /// Fixed origin such as `http://127.0.0.1:8080`. Request paths are
    /// appended to it.
    pub upstream: Option<String>,
    pub log_path: PathBuf,
    pub max_body_capture: usize,
}

impl ProxyConfig {
    pub fn new(listen_addr: SocketAddr, log_path: impl Into<PathBuf>) -> Self {
        ProxyConfig {
            listen_addr,
            upstream: None,
            log_path: log_path.into(),
            max_body_capture: 1 << 20,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecorderError {
    #[error("invalid proxy configuration: {0}")]
    Config(String),
    #[error("proxy I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write log {path}: {source}")]
    Log { path: PathBuf, source: io::Error },
}

#[derive(Debug, Default)]
pub struct ProxyStats {
    pub records: AtomicU64,
    pub skipped_tunnels: AtomicU64,
    pub upstream_failures: AtomicU64,
}

impl ProxyStats {
    pub fn records(&self) -> u64 {
        self.records.load(Ordering::SeqCst)
    }

    pub fn skipped_tunnels(&self) -> u64 {
        self.skipped_tunnels.load(Ordering::SeqCst)
    }

    pub fn upstream_failures(&self) -> u64 {
        self.upstream_failures.load(Ordering::SeqCst)
    }
}

/// A running proxy on its own thread.
pub struct Recorder {
    addr: SocketAddr,
    stats: Arc<ProxyStats>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), RecorderError>>>,
}

impl Recorder {
    pub fn start(cfg: ProxyConfig) -> Result<Self, RecorderError> {
        if cfg.max_body_capture == 0 {
            return Err(RecorderError::Config("max_body_capture must be positive".into()));
        }
        let upstream = match &cfg.upstream {
            Some(u) => {
                let u = u.trim_end_matches('/').to_string();
                if !u.starts_with("http://") && !u.starts_with("https://") {
                    return Err(RecorderError::Config(format!("upstream must be an http(s) origin: {u}")));
                }
                Some(u)
            }
            None => None,
        };
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&cfg.log_path)
            .map_err(|source| RecorderError::Log {
                path: cfg.log_path.clone(),
                source,
            })?;
        let listener = StdListener::bind(cfg.listen_addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let client = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| RecorderError::Config(e.to_string()))?;
        let stats = Arc::new(ProxyStats::default());
        let (tx, rx) = oneshot::channel();
        let ctx = Ctx {
            upstream,
            max_body: cfg.max_body_capture,
            client,
            stats: Arc::clone(&stats),
            log_tx: None,
        };
        let path = cfg.log_path.clone();
        let thread = std::thread::Builder::new()
            .name("recorder".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
                rt.block_on(serve(listener, ctx, log, path, rx))
            })?;
        Ok(Recorder {
            addr,
            stats,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &ProxyStats {
        &self.stats
    }

    pub fn stop(mut self) -> Result<(), RecorderError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.join()
    }

    /// Blocks until the proxy fails. Only a log write error ends it on its own.
    pub fn wait(mut self) -> Result<(), RecorderError> {
        self.join()
    }

    fn join(&mut self) -> Result<(), RecorderError> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(RecorderError::Io(io::Error::other("recorder thread panicked")))),
            None => Ok(()),
        }
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.join();
    }
}

type LogEntry = (JsonlRecord, oneshot::Sender<()>);

#[derive(Clone)]
struct Ctx {
    upstream: Option<String>,
    max_body: usize,
    client: reqwest::Client,
    stats: Arc<ProxyStats>,
    log_tx: Option<mpsc::UnboundedSender<LogEntry>>,
}

async fn serve(
    listener: StdListener,
    mut ctx: Ctx,
    log: File,
    path: PathBuf,
    mut shutdown: oneshot::Receiver<()>,
) -> Result<(), RecorderError> {
    let listener = TcpListener::from_std(listener)?;
    let (log_tx, log_rx) = mpsc::unbounded_channel();
    ctx.log_tx = Some(log_tx);
    let mut writer = tokio::task::spawn_blocking(move || write_log(log, log_rx));
    loop {
        tokio::select! {
            _ = &mut shutdown => return Ok(()),
            failed = &mut writer => {
                let source = match failed {
                    Ok(Err(e)) => e,
                    Ok(Ok(())) => io::Error::other("log writer stopped"),
                    Err(e) => io::Error::other(e.to_string()),
                };
                return Err(RecorderError::Log { path, source });
            }
            accepted = listener.accept() => {
                let (stream, _) = accepted?;
                let ctx = ctx.clone();
                tokio::spawn(async move {
                    let svc = service_fn(move |req| handle(req, ctx.clone()));
                    let conn = http1::Builder::new()
                        .serve_connection(TokioIo::new(stream), svc)
                        .with_upgrades();
                    if let Err(e) = conn.await {
                        log::debug!("proxy connection: {e}");
                    }
                });
            }
        }
    }
}

/// The single log writer. Each record is flushed before it is acknowledged,
/// so lines land in completion order and survive a crash whole.
fn write_log(mut file: File, mut rx: mpsc::UnboundedReceiver<LogEntry>) -> io::Result<()> {
    while let Some((rec, ack)) = rx.blocking_recv() {
        let mut line = serde_json::to_vec(&rec).map_err(io::Error::other)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.flush()?;
        let _ = ack.send(());
    }
    Ok(())
}

fn capture(body: &[u8], limit: usize) -> (Option<String>, bool) {
    if body.is_empty() {
        return (None, false);
    }
    let cut = body.len().min(limit);
    (Some(B64.encode(&body[..cut])), cut < body.len())
}

async fn handle(req: Request<Incoming>, ctx: Ctx) -> Result<Response<Full<Bytes>>, Infallible> {
    if req.method() == hyper::Method::CONNECT {
        return Ok(tunnel(req, ctx).await);
    }
    let url = match (&ctx.upstream, req.uri().scheme()) {
        (Some(origin), _) => format!("{origin}{}", req.uri().path_and_query().map_or("/", |p| p.as_str())),
        (None, Some(_)) => req.uri().to_string(),
        (None, None) => {
            return Ok(plain(
                StatusCode::BAD_REQUEST,
                "forward proxy requests need an absolute URI",
            ))
        }
    };
    let method = req.method().clone();
    let req_headers: Vec<(String, String)> = end_to_end(req.headers())
        .into_iter()
        .filter(|(n, _)| n != "host" && n != "content-length")
        .collect();
    let req_body = match req.into_body().collect().await {
        Ok(b) => b.to_bytes(),
        Err(_) => return Ok(plain(StatusCode::BAD_REQUEST, "unreadable request body")),
    };

    let mut out = ctx.client.request(method.clone(), &url);
    for (n, v) in &req_headers {
        out = out.header(n.as_str(), v.as_str());
    }
    if !req_body.is_empty() {
        out = out.body(req_body.clone());
    }
    let upstream = match out.send().await {
        Ok(r) => r,
        Err(e) => {
            ctx.stats.upstream_failures.fetch_add(1, Ordering::SeqCst);
            return Ok(plain(StatusCode::BAD_GATEWAY, &format!("upstream unreachable: {e}")));
        }
    };
    let status = upstream.status();
    let resp_headers = end_to_end(upstream.headers());
    let resp_body = match upstream.bytes().await {
        Ok(b) => b,
        Err(e) => {
            ctx.stats.upstream_failures.fetch_add(1, Ordering::SeqCst);
            return Ok(plain(StatusCode::BAD_GATEWAY, &format!("upstream body failed: {e}")));
        }
    };

    let (req_b64, req_cut) = capture(&req_body, ctx.max_body);
    let (resp_b64, resp_cut) = capture(&resp_body, ctx.max_body);
    let record = JsonlRecord {
        ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
        method: method.as_str().to_string(),
        url,
        req_headers,
        req_body_b64: req_b64,
        status: status.as_u16(),
        resp_headers: resp_headers.clone(),
        resp_body_b64: resp_b64,
        resp_mime: mime_of(&resp_headers),
        truncated: req_cut || resp_cut,
    };
    if let Some(tx) = &ctx.log_tx {
        let (ack_tx, ack_rx) = oneshot::channel();
        if tx.send((record, ack_tx)).is_ok() && ack_rx.await.is_ok() {
            ctx.stats.records.fetch_add(1, Ordering::SeqCst);
        }
    }

    let mut resp = Response::new(Full::new(resp_body));
    *resp.status_mut() = status;
    for (n, v) in &resp_headers {
        if let (Ok(n), Ok(v)) = (
            hyper::header::HeaderName::try_from(n.as_str()),
            hyper::header::HeaderValue::try_from(v.as_str()),
        ) {
            resp.headers_mut().append(n, v);
        }
    }
    Ok(resp)
}

async fn tunnel(req: Request<Incoming>, ctx: Ctx) -> Response<Full<Bytes>> {
    let Some(authority) = req.uri().authority().map(|a| a.to_string()) else {
        return plain(StatusCode::BAD_REQUEST, "CONNECT needs host:port");
    };
    let mut server = match TcpStream::connect(&authority).await {
        Ok(s) => s,
        Err(e) => {
            ctx.stats.upstream_failures.fetch_add(1, Ordering::SeqCst);
            return plain(StatusCode::BAD_GATEWAY, &format!("cannot reach {authority}: {e}"));
        }
    };
    ctx.stats.skipped_tunnels.fetch_add(1, Ordering::SeqCst);
    tokio::spawn(async move {
        match hyper::upgrade::on(req).await {
            Ok(upgraded) => {
                let mut client = TokioIo::new(upgraded);
                let _ = tokio::io::copy_bidirectional(&mut client, &mut server).await;
            }
            Err(e) => log::debug!("tunnel upgrade failed: {e}"),
        }
    });
    Response::new(Full::new(Bytes::new()))
}
