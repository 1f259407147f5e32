//! Loopback chat-completions server that replays a script, for tests and
//! offline runs.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use tokio::sync::oneshot;

/// Body of the 500 sent once the script is used up.
pub const EXHAUSTED_MARKER: &str = "mock-script-exhausted";

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    /// 200 with a well-formed completion carrying this content.
    Content(String),
    /// Arbitrary status with a raw body.
    Status { status: u16, body: String },
    /// 200 with a raw (possibly malformed) body.
    Raw(String),
}

impl MockReply {
    pub fn content(s: impl Into<String>) -> Self {
        MockReply::Content(s.into())
    }

    pub fn status(status: u16) -> Self {
        MockReply::Status {
            status,
            body: format!("scripted status {status}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub body: Vec<u8>,
    pub authorization: Option<String>,
}

impl RecordedRequest {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or(serde_json::Value::Null)
    }

    /// Text of the last message in the request.
    pub fn last_message(&self) -> String {
        self.json()["messages"]
            .as_array()
            .and_then(|m| m.last())
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
            .to_string()
    }
}

type Responder = dyn Fn(&RecordedRequest) -> MockReply + Send + Sync;

enum Source {
    Script(VecDeque<MockReply>),
    Handler(Box<Responder>),
}

struct Shared {
    source: Mutex<Source>,
    requests: Mutex<Vec<RecordedRequest>>,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Serves `script` in order; must be called inside a tokio runtime.
    pub async fn start(script: Vec<MockReply>) -> std::io::Result<Self> {
        assert!(!script.is_empty(), "mock script must not be empty");
        Self::spawn(Source::Script(script.into())).await
    }

    /// Answers each request with `handler`, for content-dependent scripts.
    pub async fn start_with<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&RecordedRequest) -> MockReply + Send + Sync + 'static,
    {
        Self::spawn(Source::Handler(Box::new(handler))).await
    }

    async fn spawn(source: Source) -> std::io::Result<Self> {
        let shared = Arc::new(Shared {
            source: Mutex::new(source),
            requests: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/chat/completions", post(handle))
            .with_state(shared.clone());
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to hand to a client.
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.requests.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.shared.requests.lock().unwrap().len()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn handle(State(shared): State<Arc<Shared>>, headers: HeaderMap, body: Bytes) -> Response {
    let recorded = RecordedRequest {
        body: body.to_vec(),
        authorization: headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    };
    let (reply, seq) = {
        let mut requests = shared.requests.lock().unwrap();
        let seq = requests.len();
        let reply = match &mut *shared.source.lock().unwrap() {
            Source::Script(queue) => queue.pop_front(),
            Source::Handler(f) => Some(f(&recorded)),
        };
        requests.push(recorded);
        (reply, seq)
    };

    match reply {
        None => (StatusCode::INTERNAL_SERVER_ERROR, EXHAUSTED_MARKER).into_response(),
        Some(MockReply::Content(content)) => {
            let body = serde_json::json!({
                "id": format!("mock-{seq}"),
                "object": "chat.completion",
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }],
                "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
            });
            (
                StatusCode::OK,
                [(axum::http::header::CONTENT_TYPE, "application/json")],
                body.to_string(),
            )
                .into_response()
        }
        Some(MockReply::Raw(body)) => (StatusCode::OK, body).into_response(),
        Some(MockReply::Status { status, body }) => {
            let code = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (code, body).into_response()
        }
    }
}
