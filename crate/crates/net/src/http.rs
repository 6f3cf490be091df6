//! Blocking transport over real sockets.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::redirect::Policy;

use carvr_core::model::{HttpRequest, HttpResponse};
use carvr_core::transport::{Transport, TransportError};

use crate::convert::{all_headers, mime_of};

/// Sends requests as given. Redirects are returned, not followed, so a 3xx
/// reaches the caller exactly as the server sent it.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = Client::builder()
            .redirect(Policy::none())
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let method = reqwest::Method::from_bytes(req.method.as_str().as_bytes())
            .map_err(|e| TransportError(e.to_string()))?;
        let mut builder = self.client.request(method, &req.url);
        for (n, v) in &req.headers {
            if n.eq_ignore_ascii_case("host") || n.eq_ignore_ascii_case("content-length") {
                continue;
            }
            builder = builder.header(n.as_str(), v.as_str());
        }
        if let Some(body) = &req.body {
            builder = builder.body(body.clone());
        }
        let resp = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = all_headers(resp.headers());
        let body = resp.bytes().map_err(|e| TransportError(e.to_string()))?;
        let body_mime = mime_of(&headers);
        Ok(HttpResponse {
            status,
            headers,
            body: (!body.is_empty()).then(|| body.to_vec()),
            body_mime,
        })
    }
}
