//! Blocking JSON-over-HTTP client shared by the remote backends.

use std::io::Read;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT_SECS: f64 = 120.0;

/// Largest response body accepted from a service.
const MAX_BODY_BYTES: u64 = 1 << 30;

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEndpoint {
    /// Base URL, e.g. `http://127.0.0.1:8000`; route paths are appended.
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl RemoteEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }

    pub fn with_timeout(mut self, secs: f64) -> Self {
        self.timeout_secs = secs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::invalid(format!("timeout {} must be positive", self.timeout_secs)));
        }
        url::Url::parse(&self.url)
            .map_err(|e| Error::invalid(format!("bad endpoint url {:?}: {e}", self.url)))?;
        Ok(())
    }

    fn route(&self, path: &str) -> String {
        format!("{}{}", self.url.trim_end_matches('/'), path)
    }

    /// POSTs a JSON body and returns the raw response bytes. Any transport
    /// failure or non-200 status becomes `BackendUnavailable`.
    pub fn post_json(&self, path: &str, body: &serde_json::Value) -> Result<Vec<u8>> {
        self.validate()?;
        let url = self.route(path);
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(self.timeout_secs))
            .build();
        let resp = match agent.post(&url).send_json(body) {
            Ok(resp) => resp,
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                return Err(Error::backend(format!("POST {url} -> HTTP {code}: {text}")));
            }
            Err(e) => return Err(Error::backend(format!("POST {url} failed: {e}"))),
        };
        if resp.status() != 200 {
            return Err(Error::backend(format!("POST {url} -> HTTP {}", resp.status())));
        }
        let mut bytes = Vec::new();
        resp.into_reader()
            .take(MAX_BODY_BYTES)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::backend(format!("POST {url}: reading body: {e}")))?;
        Ok(bytes)
    }

    pub fn post_json_for<T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<T> {
        let bytes = self.post_json(path, body)?;
        serde_json::from_slice(&bytes).map_err(|e| {
            Error::backend(format!(
                "POST {}: malformed response ({e}): {}",
                self.route(path),
                String::from_utf8_lossy(&bytes[..bytes.len().min(256)])
            ))
        })
    }
}

pub fn encode_b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_b64(text: &str) -> Result<Vec<u8>> {
    STANDARD
        .decode(text.trim())
        .map_err(|e| Error::backend(format!("invalid base64 payload: {e}")))
}
