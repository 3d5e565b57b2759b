//! Blocking JSON-over-HTTP calls with bearer auth and bounded retries, shared
//! by the remote embedder and the chat-completion summarizer.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tracing::warn;

pub(crate) const MAX_RETRIES: u32 = 2;
const BASE_BACKOFF_MS: u64 = 100;

#[derive(Debug)]
pub(crate) enum CallError {
    /// Transport failure or non-success status after all retries.
    Unavailable(String),
    /// The server answered, but not with the expected JSON shape.
    BadBody(String),
}

pub(crate) fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(true)
        .build()
        .into()
}

fn transient(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => true,
        _ => false,
    }
}

/// POSTs `body` as JSON, retrying transient failures up to [`MAX_RETRIES`]
/// times with exponential backoff. The bearer token, when configured, is
/// read from the named environment variable at call time.
pub(crate) fn post_json<B: Serialize, T: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    token_env: Option<&str>,
    body: &B,
) -> Result<T, CallError> {
    let token = token_env.and_then(|name| std::env::var(name).ok());
    let mut attempt = 0;
    loop {
        let mut request = agent.post(url).header("Content-Type", "application/json");
        if let Some(t) = &token {
            request = request.header("Authorization", format!("Bearer {t}"));
        }
        match request.send_json(body) {
            Ok(mut response) => {
                return response
                    .body_mut()
                    .read_json::<T>()
                    .map_err(|e| CallError::BadBody(e.to_string()));
            }
            Err(err) if attempt < MAX_RETRIES && transient(&err) => {
                let wait = BASE_BACKOFF_MS << attempt;
                warn!(%url, attempt, error = %err, "remote call failed, retrying in {wait} ms");
                thread::sleep(Duration::from_millis(wait));
                attempt += 1;
            }
            Err(err) => return Err(CallError::Unavailable(err.to_string())),
        }
    }
}
