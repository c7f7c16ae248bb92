//! Chat-completion wire format and the blocking HTTP client.
//!
//! Request: `POST {base_url}/chat/completions` with
//! `{"model": ..., "messages": [{"role": ..., "content": ...}], "temperature": ...}`.
//! Response: the first `choices[].message.content` string is the reply.

use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub temperature: f64,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "http://127.0.0.1:8080/v1".into(),
            model: "local-model".into(),
            api_key_env: "HETBID_LLM_API_KEY".into(),
            timeout_ms: 30_000,
            max_retries: 1,
            temperature: 0.0,
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_ms == 0 {
            return Err("llm timeout must be positive".into());
        }
        if self.base_url.trim().is_empty() {
            return Err("llm base_url is empty".into());
        }
        if !(self.temperature >= 0.0) {
            return Err("llm temperature must be non-negative".into());
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Anything that can answer a chat-completion request.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// `ChatTransport` over HTTP(S) with a global per-request timeout.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(config: &LlmEndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            url: config.completions_url(),
            api_key: std::env::var(&config.api_key_env)
                .ok()
                .filter(|k| !k.is_empty()),
        }
    }
}

/// Opens (and drops) a TCP connection to the endpoint's host within the configured timeout.
pub fn check_reachable(config: &LlmEndpointConfig) -> Result<(), TransportError> {
    let uri: ureq::http::Uri = config
        .base_url
        .parse()
        .map_err(|e| TransportError::Connect(format!("bad base_url: {e}")))?;
    let host = uri
        .host()
        .ok_or_else(|| TransportError::Connect("base_url has no host".into()))?;
    let port = uri.port_u16().unwrap_or(match uri.scheme_str() {
        Some("https") => 443,
        _ => 80,
    });
    let addrs = (host.trim_matches(['[', ']']), port)
        .to_socket_addrs()
        .map_err(|e| TransportError::Connect(format!("cannot resolve {host}: {e}")))?;
    let mut last = TransportError::Connect(format!("{host} resolved to no addresses"));
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, config.timeout()) {
            Ok(_) => return Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::TimedOut => last = TransportError::Timeout,
            Err(e) => last = TransportError::Connect(format!("{addr}: {e}")),
        }
    }
    Err(last)
}

fn classify(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::StatusCode(code) => TransportError::Status(code),
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
        ureq::Error::Json(e) => TransportError::Malformed(e.to_string()),
        other => TransportError::Connect(other.to_string()),
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(classify)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status));
        }
        let body: ChatResponse = response.body_mut().read_json().map_err(classify)?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError::Malformed("response has no choices".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let req = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::system("s"), ChatMessage::user("u")],
            temperature: 0.0,
        };
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "model": "m",
                "messages": [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}],
                "temperature": 0.0
            })
        );
    }

    #[test]
    fn response_wire_format() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"hi"},"finish_reason":"stop"}]}"#;
        let parsed: ChatResponse = serde_json::from_str(body).unwrap();
        assert_eq!(parsed.choices[0].message.content, "hi");
    }

    #[test]
    fn completions_url_joins_cleanly() {
        let mut cfg = LlmEndpointConfig::default();
        cfg.base_url = "http://h:1/v1/".into();
        assert_eq!(cfg.completions_url(), "http://h:1/v1/chat/completions");
    }

    #[test]
    fn config_validation() {
        let mut cfg = LlmEndpointConfig::default();
        cfg.validate().unwrap();
        cfg.timeout_ms = 0;
        assert!(cfg.validate().is_err());
    }
}
