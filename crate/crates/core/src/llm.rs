//! Language-model client abstraction used by the persona generator and the
//! vision summarizer.
//!
//! Both callers only need "send a prompt, get text back". The live client
//! speaks an OpenAI-compatible chat-completions endpoint; tests and offline
//! runs use [`ScriptedLlm`].

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("llm client not configured: {0}")]
    NotConfigured(String),
    #[error("llm request failed: {0}")]
    Transport(String),
    #[error("llm response malformed: {0}")]
    BadResponse(String),
}

/// A single completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub system: String,
    pub prompt: String,
    /// Opaque media reference attached to the request (vision summaries).
    pub image_ref: Option<String>,
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError>;

    fn name(&self) -> &str {
        "llm"
    }
}

/// Connection settings for the live client. The API key itself is never
/// stored here; only the name of the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_key_env() -> String {
    "SANDBOX_LLM_API_KEY".to_string()
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

/// Blocking client for an OpenAI-compatible `/chat/completions` endpoint.
///
/// Must not be called from inside an async runtime thread; wrap calls in a
/// blocking task.
pub struct HttpLlmClient {
    config: LlmConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        if config.endpoint.trim().is_empty() {
            return Err(LlmError::NotConfigured("empty endpoint".into()));
        }
        let api_key = std::env::var(&config.api_key_env).ok();
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            http,
        })
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let user_content = match &request.image_ref {
            Some(image) => json!([
                {"type": "text", "text": request.prompt},
                {"type": "image_url", "image_url": {"url": image}},
            ]),
            None => json!(request.prompt),
        };
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": user_content},
            ],
        });
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Transport(format!("http status {status}")));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        &self.config.model
    }
}

/// Replays a fixed queue of responses. Once the queue is empty every call
/// fails with a transport error, which is how tests model an unreachable
/// service.
#[derive(Default)]
pub struct ScriptedLlm {
    responses: Mutex<VecDeque<Result<String, String>>>,
    requests: Mutex<Vec<LlmRequest>>,
}

impl ScriptedLlm {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn push_failure(&self, message: impl Into<String>) {
        self.responses.lock().unwrap().push_back(Err(message.into()));
    }

    /// Requests seen so far, in call order.
    pub fn requests(&self) -> Vec<LlmRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        self.requests.lock().unwrap().push(request.clone());
        match self.responses.lock().unwrap().pop_front() {
            Some(Ok(text)) => Ok(text),
            Some(Err(msg)) => Err(LlmError::Transport(msg)),
            None => Err(LlmError::Transport("scripted responses exhausted".into())),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Pulls the first JSON object out of a model reply, tolerating markdown
/// code fences and leading prose.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_fenced_json() {
        let reply = "Sure!\n```json\n{\"a\": {\"b\": \"}\"}}\n```\n";
        assert_eq!(extract_json_object(reply), Some("{\"a\": {\"b\": \"}\"}}"));
        assert_eq!(extract_json_object("no json here"), None);
        assert_eq!(extract_json_object("{\"open\": 1"), None);
    }

    #[test]
    fn scripted_client_replays_then_fails() {
        let llm = ScriptedLlm::new(["one"]);
        let req = LlmRequest {
            system: String::new(),
            prompt: "p".into(),
            image_ref: None,
        };
        assert_eq!(llm.complete(&req).unwrap(), "one");
        assert!(matches!(llm.complete(&req), Err(LlmError::Transport(_))));
        assert_eq!(llm.requests().len(), 2);
    }

    #[test]
    fn http_client_rejects_empty_endpoint() {
        assert!(matches!(
            HttpLlmClient::new(LlmConfig::new("  ", "m")),
            Err(LlmError::NotConfigured(_))
        ));
    }
}
