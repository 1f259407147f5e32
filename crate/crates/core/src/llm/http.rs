use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::Deserialize;
use tokio::sync::Semaphore;

use super::{ChatRequest, ChatResponse, LlmClient, LlmError, Usage};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Bearer token. Never printed.
#[derive(Clone)]
pub struct Credentials(String);

impl Credentials {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    /// Reads the key from the named environment variable, if set and non-empty.
    pub fn from_env(var: &str) -> Option<Self> {
        std::env::var(var).ok().filter(|k| !k.is_empty()).map(Self)
    }
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credentials(<redacted>)")
    }
}

/// Client for `<endpoint>/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpClient {
    http: reqwest::Client,
    url: String,
    credentials: Option<Credentials>,
    limiter: Option<Arc<Semaphore>>,
}

impl HttpClient {
    pub fn new(endpoint: &str, credentials: Option<Credentials>) -> Result<Self, LlmError> {
        Self::with_timeout(endpoint, credentials, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(
        endpoint: &str,
        credentials: Option<Credentials>,
        timeout: Duration,
    ) -> Result<Self, LlmError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(format!("building http client: {e}")))?;
        Ok(Self {
            http,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            credentials,
            limiter: None,
        })
    }

    /// Caps in-flight requests issued through this client (and its clones).
    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.limiter = Some(Arc::new(Semaphore::new(limit.max(1))));
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Option<Vec<WireChoice>>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: Option<WireMessage>,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

pub(crate) fn parse_response(body: &[u8], latency: Duration) -> Result<ChatResponse, LlmError> {
    let wire: WireResponse = serde_json::from_slice(body)
        .map_err(|e| LlmError::Protocol(format!("response is not valid JSON: {e}")))?;
    let choice = wire
        .choices
        .ok_or_else(|| LlmError::Protocol("response has no `choices`".into()))?
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Protocol("response has an empty `choices` array".into()))?;
    let finish_reason = choice.finish_reason.unwrap_or_else(|| "stop".to_string());
    let content = match choice.message.and_then(|m| m.content) {
        Some(c) => c,
        None if finish_reason == "stop" => {
            return Err(LlmError::Protocol(
                "first choice has no message content".into(),
            ))
        }
        None => String::new(),
    };
    Ok(ChatResponse {
        content,
        finish_reason,
        usage: wire.usage.unwrap_or_default(),
        latency,
    })
}

#[async_trait]
impl LlmClient for HttpClient {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        req.validate()?;
        let _permit = match &self.limiter {
            Some(sem) => Some(sem.acquire().await.expect("semaphore never closed")),
            None => None,
        };

        let mut builder = self
            .http
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(req.to_body());
        if let Some(Credentials(key)) = &self.credentials {
            builder = builder.bearer_auth(key);
        }

        let started = Instant::now();
        let resp = builder
            .send()
            .await
            .map_err(|e| LlmError::Transport(e.without_url().to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .bytes()
            .await
            .map_err(|e| LlmError::Transport(e.without_url().to_string()))?;
        let latency = started.elapsed();

        match status {
            200..=299 => parse_response(&body, latency),
            429 | 500..=599 => Err(LlmError::Retryable {
                status,
                body: String::from_utf8_lossy(&body).into_owned(),
            }),
            _ => Err(LlmError::Fatal {
                status,
                body: String::from_utf8_lossy(&body).into_owned(),
            }),
        }
    }
}
