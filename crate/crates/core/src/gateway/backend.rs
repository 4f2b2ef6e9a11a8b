//! Chat-completion backends: a scripted test double and an HTTP client.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Decoding parameters passed through to the backend untouched.
pub type DecodeParams = Map<String, Value>;

/// One completion call.
#[derive(Debug, Clone, Default)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    /// The bare question this call is about. Not sent over the wire; the
    /// scripted backend keys its replies on it.
    pub query: String,
    pub params: DecodeParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend {backend}: transport failure: {message}")]
    Transport { backend: String, message: String },
    #[error("backend {backend}: bad response: {message}")]
    BadResponse { backend: String, message: String },
    #[error("backend {backend}: {message}")]
    Scripted { backend: String, message: String },
}

/// A chat model. `complete` either returns the model's raw text or an error;
/// it never reports a failure as an empty successful reply.
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

/// What a scripted rule answers with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptReply {
    Text(String),
    /// Fail the call with this message.
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Case-insensitive substring of the question.
    pub contains: String,
    #[serde(flatten)]
    pub reply: ScriptReply,
}

/// Serializable form of a scripted backend.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default = "default_reply")]
    pub default: String,
}

fn default_reply() -> String {
    "i don't know".to_string()
}

/// Scripts for both models of the hybrid pipeline, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSet {
    pub rag: Script,
    pub finetuned: Script,
}

impl ScriptSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Deterministic backend replying by question substring. The longest matching
/// pattern wins; equal-length matches resolve to the lexicographically
/// smallest pattern.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    rules: BTreeMap<String, ScriptReply>,
    default: String,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, default: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rules: BTreeMap::new(),
            default: default.into(),
        }
    }

    pub fn from_script(script: &Script) -> Self {
        let mut backend = Self::new(
            script.name.clone().unwrap_or_else(|| "scripted".to_string()),
            script.default.clone(),
        );
        for rule in &script.rules {
            backend.rules.insert(rule.contains.to_lowercase(), rule.reply.clone());
        }
        backend
    }

    pub fn rule(mut self, contains: impl AsRef<str>, output: impl Into<String>) -> Self {
        self.rules
            .insert(contains.as_ref().to_lowercase(), ScriptReply::Text(output.into()));
        self
    }

    pub fn failing_rule(mut self, contains: impl AsRef<str>, message: impl Into<String>) -> Self {
        self.rules
            .insert(contains.as_ref().to_lowercase(), ScriptReply::Fail(message.into()));
        self
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The reply that would be chosen for `query`.
    pub fn lookup(&self, query: &str) -> Option<&ScriptReply> {
        let query = query.to_lowercase();
        self.rules
            .iter()
            .filter(|(pattern, _)| query.contains(pattern.as_str()))
            .fold(None, |best: Option<(&String, &ScriptReply)>, cand| match best {
                Some(b) if b.0.len() >= cand.0.len() => Some(b),
                _ => Some(cand),
            })
            .map(|(_, reply)| reply)
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        match self.lookup(&request.query) {
            Some(ScriptReply::Text(t)) => Ok(t.clone()),
            Some(ScriptReply::Fail(m)) => Err(BackendError::Scripted {
                backend: self.name.clone(),
                message: m.clone(),
            }),
            None => Ok(self.default.clone()),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    system: &'a str,
    user: &'a str,
    params: &'a DecodeParams,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Backend speaking `POST {model, system, user, params}` → `{text}`.
/// Transport failures and 5xx replies are retried once.
pub struct HttpChatBackend {
    url: String,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let url = url.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                backend: url.clone(),
                message: e.to_string(),
            })?;
        Ok(Self {
            url,
            model: model.into(),
            client,
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, (bool, BackendError)> {
        let body = WireRequest {
            model: &self.model,
            system: &request.system,
            user: &request.user,
            params: &request.params,
        };
        let transport = |message: String| BackendError::Transport {
            backend: self.name().to_string(),
            message,
        };
        let bad = |message: String| BackendError::BadResponse {
            backend: self.name().to_string(),
            message,
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| (true, transport(e.to_string())))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err((true, transport(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            return Err((false, bad(format!("HTTP {status}"))));
        }
        let parsed: WireResponse = resp.json().map_err(|e| (false, bad(e.to_string())))?;
        Ok(parsed.text)
    }
}

impl ChatBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        match self.attempt(request) {
            Ok(text) => Ok(text),
            Err((true, first)) => {
                tracing::debug!(error = %first, "retrying chat call");
                self.attempt(request).map_err(|(_, e)| e)
            }
            Err((false, e)) => Err(e),
        }
    }
}
