use crate::model::{normalize_base, HttpRequest, HttpResponse};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Sends one request and waits for its response.
pub trait Transport {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(req)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(req)
    }
}

/// Moves `url` from under `from` to under `to`. URLs outside `from` are
/// returned unchanged.
pub fn rebase_url(url: &str, from: &str, to: &str) -> String {
    let from = normalize_base(from);
    let to = normalize_base(to);
    match url.strip_prefix(&from) {
        Some(rest) if rest.is_empty() || rest.starts_with('/') || rest.starts_with('?') => {
            format!("{to}{rest}")
        }
        _ => url.to_string(),
    }
}
