use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use halludetect_core::llm::{
    complete_with_retry, ChatMessage, ChatRequest, Credentials, HttpClient, LlmClient, LlmError,
    RetryPolicy,
};
use halludetect_core::llm::{MockReply, MockServer, EXHAUSTED_MARKER};

fn request(text: &str) -> ChatRequest {
    ChatRequest::new("test-model", vec![ChatMessage::user(text)], 0.5)
}

fn client(server: &MockServer) -> HttpClient {
    HttpClient::new(&server.endpoint(), Some(Credentials::new("sk-test-key"))).unwrap()
}

#[tokio::test]
async fn scripted_content_comes_back() {
    let server = MockServer::start(vec![MockReply::content("X")])
        .await
        .unwrap();
    let resp = client(&server).complete(&request("hi")).await.unwrap();
    assert_eq!(resp.content, "X");
    assert_eq!(resp.finish_reason, "stop");
    let rec = &server.requests()[0];
    assert_eq!(rec.authorization.as_deref(), Some("Bearer sk-test-key"));
}

#[tokio::test]
async fn recorded_body_is_the_serialized_request() {
    let server = MockServer::start(vec![MockReply::content("ok")])
        .await
        .unwrap();
    let mut req = request("a \"quoted\" prompt\nwith lines");
    req.max_tokens = Some(32);
    client(&server).complete(&req).await.unwrap();
    assert_eq!(server.requests()[0].body, req.to_body());
    assert_eq!(
        server.requests()[0].json()["messages"][0]["content"],
        "a \"quoted\" prompt\nwith lines"
    );
}

#[tokio::test]
async fn rate_limit_then_success_retries_once() {
    let server = MockServer::start(vec![MockReply::status(429), MockReply::content("done")])
        .await
        .unwrap();
    let out = complete_with_retry(&client(&server), &request("q"), &RetryPolicy::no_delay(5))
        .await
        .unwrap();
    assert_eq!(out.attempts, 2);
    assert_eq!(out.response.content, "done");
    assert!(out.response.latency > Duration::ZERO);
    assert_eq!(server.request_count(), 2);
}

#[tokio::test]
async fn status_mapping() {
    let server = MockServer::start(vec![
        MockReply::status(429),
        MockReply::status(503),
        MockReply::status(400),
        MockReply::Raw(r#"{"id":"no-choices"}"#.into()),
    ])
    .await
    .unwrap();
    let c = client(&server);
    let req = request("q");
    assert!(matches!(
        c.complete(&req).await,
        Err(LlmError::Retryable { status: 429, .. })
    ));
    assert!(matches!(
        c.complete(&req).await,
        Err(LlmError::Retryable { status: 503, .. })
    ));
    assert!(matches!(
        c.complete(&req).await,
        Err(LlmError::Fatal { status: 400, .. })
    ));
    assert!(matches!(c.complete(&req).await, Err(LlmError::Protocol(_))));
}

#[tokio::test]
async fn exhausted_script_answers_500_with_marker() {
    let server = MockServer::start(vec![MockReply::content("1"), MockReply::content("2")])
        .await
        .unwrap();
    let c = client(&server);
    let req = request("q");
    c.complete(&req).await.unwrap();
    c.complete(&req).await.unwrap();
    match c.complete(&req).await {
        Err(LlmError::Retryable { status: 500, body }) => assert_eq!(body, EXHAUSTED_MARKER),
        other => panic!("expected exhaustion 500, got {other:?}"),
    }
}

#[tokio::test]
async fn fatal_errors_are_not_retried() {
    let server = MockServer::start(vec![MockReply::status(401), MockReply::content("never")])
        .await
        .unwrap();
    let err = complete_with_retry(&client(&server), &request("q"), &RetryPolicy::no_delay(5))
        .await
        .unwrap_err();
    assert!(matches!(err, LlmError::Fatal { status: 401, .. }));
    assert_eq!(server.request_count(), 1);
}

#[tokio::test]
async fn retry_budget_caps_attempts() {
    let server = MockServer::start_with(|_| MockReply::status(502))
        .await
        .unwrap();
    let err = complete_with_retry(&client(&server), &request("q"), &RetryPolicy::no_delay(3))
        .await
        .unwrap_err();
    match err {
        LlmError::Exhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert!(matches!(*last, LlmError::Retryable { status: 502, .. }));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(server.request_count(), 3);
}

#[tokio::test]
async fn unreachable_endpoint_is_a_transport_error() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let c =
        HttpClient::with_timeout(&format!("http://{addr}"), None, Duration::from_secs(2)).unwrap();
    let err = c.complete(&request("q")).await.unwrap_err();
    assert!(matches!(err, LlmError::Transport(_)), "{err:?}");
    assert!(err.is_retryable());
}

#[tokio::test]
async fn invalid_requests_never_leave_the_process() {
    let server = MockServer::start(vec![MockReply::content("x")])
        .await
        .unwrap();
    let empty = ChatRequest::new("m", vec![], 0.0);
    assert!(matches!(
        client(&server).complete(&empty).await,
        Err(LlmError::InvalidRequest(_))
    ));
    let hot = ChatRequest::new("m", vec![ChatMessage::user("x")], -1.0);
    assert!(matches!(
        client(&server).complete(&hot).await,
        Err(LlmError::InvalidRequest(_))
    ));
    assert_eq!(server.request_count(), 0);
}

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[tokio::test]
async fn credentials_stay_out_of_logs_and_errors() {
    const KEY: &str = "sk-very-secret-token-9f3a";
    let capture = Capture::default();
    let sink = capture.clone();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .with_writer(move || sink.clone())
        .finish();
    let _guard = tracing::subscriber::set_default(subscriber);

    let server = MockServer::start(vec![
        MockReply::status(500),
        MockReply::status(429),
        MockReply::status(403),
    ])
    .await
    .unwrap();
    let c = HttpClient::new(&server.endpoint(), Some(Credentials::new(KEY))).unwrap();
    let err = complete_with_retry(&c, &request("q"), &RetryPolicy::no_delay(5))
        .await
        .unwrap_err();

    let logs = String::from_utf8(capture.0.lock().unwrap().clone()).unwrap();
    assert!(
        logs.contains("retrying"),
        "expected retry logs, got {logs:?}"
    );
    for text in [logs, format!("{err}"), format!("{err:?}"), format!("{c:?}")] {
        assert!(!text.contains(KEY));
        assert!(!text.contains("very-secret"));
    }
}
