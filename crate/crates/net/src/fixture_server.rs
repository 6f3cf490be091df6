//! Serves [`FixtureApp`] over HTTP/1.1 on a background thread.

use std::convert::Infallible;
use std::io;
use std::net::{SocketAddr, TcpListener as StdListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Request, Response, StatusCode};
use hyper_util::rt::TokioIo;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use carvr_core::fixture::{FixtureApp, API_PREFIX};
use carvr_core::model::{HttpRequest, Method};

use crate::convert::{all_headers, mime_of, plain, to_hyper};

pub struct FixtureServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl FixtureServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(addr: SocketAddr) -> io::Result<Self> {
        let listener = StdListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let thread = std::thread::Builder::new()
            .name("fixture-server".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
                rt.block_on(serve(listener, rx))
            })?;
        Ok(FixtureServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn origin(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Base URL of the API, under which recordings should be carved.
    pub fn base_url(&self) -> String {
        format!("{}{API_PREFIX}", self.origin())
    }

    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_and_join()
    }

    /// Blocks until the server thread ends.
    pub fn wait(mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn shutdown_and_join(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        let _ = self.shutdown_and_join();
    }
}

async fn serve(listener: StdListener, mut shutdown: oneshot::Receiver<()>) -> io::Result<()> {
    let listener = TcpListener::from_std(listener)?;
    let app = Arc::new(Mutex::new(FixtureApp::new()));
    loop {
        tokio::select! {
            _ = &mut shutdown => return Ok(()),
            accepted = listener.accept() => {
                let (stream, _) = accepted?;
                let app = Arc::clone(&app);
                tokio::spawn(async move {
                    let svc = service_fn(move |req| handle(req, Arc::clone(&app)));
                    if let Err(e) = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).await {
                        log::debug!("fixture connection: {e}");
                    }
                });
            }
        }
    }
}

async fn handle(req: Request<Incoming>, app: Arc<Mutex<FixtureApp>>) -> Result<Response<Full<Bytes>>, Infallible> {
    let Ok(method) = Method::try_from(req.method().as_str().to_string()) else {
        return Ok(plain(StatusCode::METHOD_NOT_ALLOWED, "method not allowed"));
    };
    let host = req
        .headers()
        .get("host")
        .and_then(|h| h.to_str().ok())
        .unwrap_or("fixture")
        .to_string();
    let path = req.uri().path_and_query().map_or("/", |p| p.as_str()).to_string();
    let headers = all_headers(req.headers());
    let body = match req.into_body().collect().await {
        Ok(b) => b.to_bytes(),
        Err(_) => return Ok(plain(StatusCode::BAD_REQUEST, "unreadable body")),
    };
    let body_mime = mime_of(&headers);
    let request = HttpRequest {
        method,
        url: format!("http://{host}{path}"),
        headers,
        body: (!body.is_empty()).then(|| body.to_vec()),
        body_mime,
    };
    let resp = app.lock().unwrap_or_else(|p| p.into_inner()).handle(&request);
    Ok(to_hyper(&resp))
}
