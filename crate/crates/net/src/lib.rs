//! Network plumbing: a blocking HTTP transport, the recording proxy and an
//! HTTP front for the in-process fixture.

pub mod fixture_server;
pub mod http;
pub mod recorder;

mod convert;

pub use fixture_server::FixtureServer;
pub use http::HttpTransport;
pub use recorder::{ProxyConfig, ProxyStats, Recorder, RecorderError};
