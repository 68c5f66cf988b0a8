use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{
    ChatOracle, ChatReply, ChatRequest, OracleError, Usage, CHAT_TIMEOUT, DEFAULT_MAX_IN_FLIGHT, EMBED_TIMEOUT,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout(String),
    Connect(String),
    Other(String),
}

/// Blocking HTTP POST of a JSON body. Implemented over reqwest in
/// production and by fault-injecting fakes in tests.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| OracleError::NotConfigured(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header("content-type", "application/json")
            .body(body.to_string());
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else if e.is_connect() {
                TransportError::Connect(e.to_string())
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(16),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Retry(OracleError),
    Fatal(OracleError),
}

/// Client for a chat-completions style endpoint. Shareable across threads;
/// concurrent requests are bounded by `max_in_flight`.
pub struct HttpChatClient {
    base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    permits: Semaphore,
    chat_timeout: Duration,
    embed_timeout: Duration,
}

impl HttpChatClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, transport: Arc<dyn Transport>) -> Self {
        HttpChatClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
            permits: Semaphore::new(DEFAULT_MAX_IN_FLIGHT),
            chat_timeout: CHAT_TIMEOUT,
            embed_timeout: EMBED_TIMEOUT,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.permits = Semaphore::new(n);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn headers(&self) -> Vec<(String, String)> {
        self.api_key
            .iter()
            .map(|k| ("authorization".to_string(), format!("Bearer {k}")))
            .collect()
    }

    fn classify(status: u16, body: &str, attempts: u32) -> Failure {
        let message: String = body.chars().take(200).collect();
        match status {
            401 | 403 => Failure::Fatal(OracleError::Auth { status, message }),
            429 => Failure::Retry(OracleError::RateLimited { attempts }),
            408 => Failure::Retry(OracleError::Timeout { attempts }),
            500..=599 => Failure::Retry(OracleError::Server { status, attempts }),
            _ => Failure::Fatal(OracleError::Rejected { status, message }),
        }
    }

    /// POSTs `body` to `path`, retrying transient failures. Returns the
    /// parsed JSON body and the number of attempts made.
    fn post_with_retry(&self, path: &str, body: &Value, timeout: Duration) -> Result<(Value, u32), OracleError> {
        let url = format!("{}/{}", self.base_url, path);
        let body = body.to_string();
        let headers = self.headers();
        let _permit = self.permits.acquire();
        let max = self.retry.max_attempts.max(1);
        let mut last = OracleError::Network {
            attempts: 0,
            message: "no attempt made".into(),
        };
        for attempt in 1..=max {
            let outcome = match self.transport.post_json(&url, &headers, &body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return serde_json::from_str(&resp.body)
                        .map(|v| (v, attempt))
                        .map_err(|e| OracleError::Malformed(format!("invalid JSON body: {e}")));
                }
                Ok(resp) => Self::classify(resp.status, &resp.body, attempt),
                Err(TransportError::Timeout(_)) => Failure::Retry(OracleError::Timeout { attempts: attempt }),
                Err(TransportError::Connect(m)) | Err(TransportError::Other(m)) => Failure::Retry(OracleError::Network {
                    attempts: attempt,
                    message: m,
                }),
            };
            match outcome {
                Failure::Fatal(e) => return Err(e),
                Failure::Retry(e) => {
                    log::warn!("attempt {attempt}/{max} to {url} failed: {e}");
                    last = e;
                    if attempt < max {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        Err(last)
    }

    pub fn embed_raw(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, OracleError> {
        let body = json!({ "model": model, "input": texts });
        let (value, _) = self.post_with_retry("embeddings", &body, self.embed_timeout)?;
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| OracleError::Malformed("missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(OracleError::Malformed(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map(|i| i as usize).unwrap_or(pos);
            let vector = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| OracleError::Malformed("missing embedding".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| OracleError::Malformed("non-numeric embedding".into())))
                .collect::<Result<Vec<f64>, _>>()?;
            let slot = out
                .get_mut(index)
                .ok_or_else(|| OracleError::Malformed(format!("embedding index {index} out of range")))?;
            *slot = vector;
        }
        Ok(out)
    }
}

impl ChatOracle for HttpChatClient {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError> {
        request.validate()?;
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let start = Instant::now();
        let (value, attempts) = self.post_with_retry("chat/completions", &body, self.chat_timeout)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| OracleError::Malformed("missing choices[0].message.content".into()))?
            .to_string();
        let usage = Usage {
            prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion_tokens: value
                .pointer("/usage/completion_tokens")
                .and_then(Value::as_u64)
                .unwrap_or(0),
        };
        Ok(ChatReply {
            text,
            usage,
            latency_ms: start.elapsed().as_millis() as u64,
            attempts,
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ChatMessage;
    use std::collections::VecDeque;

    /// Replays a fixed sequence of outcomes and records the requests seen.
    struct FakeTransport {
        outcomes: Mutex<VecDeque<Result<HttpResponse, TransportError>>>,
        seen: Mutex<Vec<(String, String)>>,
    }

    impl FakeTransport {
        fn new(outcomes: Vec<Result<HttpResponse, TransportError>>) -> Arc<Self> {
            Arc::new(FakeTransport {
                outcomes: Mutex::new(outcomes.into()),
                seen: Mutex::new(Vec::new()),
            })
        }
    }

    impl Transport for FakeTransport {
        fn post_json(
            &self,
            url: &str,
            _headers: &[(String, String)],
            body: &str,
            _timeout: Duration,
        ) -> Result<HttpResponse, TransportError> {
            self.seen.lock().unwrap().push((url.to_string(), body.to_string()));
            self.outcomes
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or(Err(TransportError::Other("script exhausted".into())))
        }
    }

    fn ok(text: &str) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: 200,
            body: json!({
                "choices": [{"message": {"role": "assistant", "content": text}}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 2}
            })
            .to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: code,
            body: "{}".into(),
        })
    }

    fn client(t: Arc<FakeTransport>) -> HttpChatClient {
        HttpChatClient::new("http://fake/v1/", Some("k".into()), t).with_retry(RetryPolicy::immediate(5))
    }

    fn request() -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::system("s"), ChatMessage::user("u")], 0.0)
    }

    #[test]
    fn rate_limit_then_success() {
        let t = FakeTransport::new(vec![status(429), ok("<Answer>blue</Answer>")]);
        let reply = client(t.clone()).chat(&request()).unwrap();
        assert_eq!(reply.text, "<Answer>blue</Answer>");
        assert_eq!(reply.attempts, 2);
        assert_eq!(reply.usage.prompt_tokens, 10);
        let seen = t.seen.lock().unwrap();
        assert_eq!(seen[0].0, "http://fake/v1/chat/completions");
        let body: Value = serde_json::from_str(&seen[0].1).unwrap();
        assert_eq!(body["messages"][1]["role"], "user");
        assert!(body.get("sample").is_none());
    }

    #[test]
    fn retries_are_capped() {
        let t = FakeTransport::new(vec![status(503); 10]);
        let err = client(t.clone()).chat(&request()).unwrap_err();
        assert_eq!(err, OracleError::Server { status: 503, attempts: 5 });
        assert_eq!(t.seen.lock().unwrap().len(), 5);
    }

    #[test]
    fn distinct_error_kinds() {
        let t = FakeTransport::new(vec![status(401)]);
        assert_eq!(client(t.clone()).chat(&request()).unwrap_err().kind(), "auth");
        assert_eq!(t.seen.lock().unwrap().len(), 1);

        let t = FakeTransport::new(vec![Err(TransportError::Timeout("slow".into())); 5]);
        assert_eq!(client(t).chat(&request()).unwrap_err().kind(), "timeout");

        let t = FakeTransport::new(vec![status(429); 5]);
        assert_eq!(client(t).chat(&request()).unwrap_err().kind(), "rate_limit");

        let t = FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: r#"{"choices": []}"#.into(),
        })]);
        assert_eq!(client(t).chat(&request()).unwrap_err().kind(), "malformed");

        let t = FakeTransport::new(vec![Err(TransportError::Connect("refused".into())), ok("x")]);
        assert_eq!(client(t).chat(&request()).unwrap().attempts, 2);
    }

    #[test]
    fn temperature_range_enforced() {
        let t = FakeTransport::new(vec![]);
        let mut r = request();
        r.temperature = 2.5;
        assert_eq!(client(t).chat(&r).unwrap_err().kind(), "not_configured");
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(2), Duration::from_millis(1000));
        assert_eq!(p.delay(3), Duration::from_millis(2000));
        assert_eq!(p.delay(40), Duration::from_secs(16));
    }

    #[test]
    fn embeddings_shape() {
        let t = FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: json!({"data": [
                {"index": 1, "embedding": [0.0, 1.0]},
                {"index": 0, "embedding": [1.0, 0.0]}
            ]})
            .to_string(),
        })]);
        let v = client(t).embed_raw("e", &["a".into(), "b".into()]).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }
}
