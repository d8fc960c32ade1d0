//! Pluggable text-generation backends: an HTTP chat-completion adapter,
//! a scripted backend replaying canned responses for golden tests, and a
//! closure-backed mock.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend {backend}: transport failure: {message}")]
    Transport { backend: String, message: String },
    #[error("backend {backend}: bad response: {message}")]
    BadResponse { backend: String, message: String },
    #[error("scripted backend has no response for prompt hash {0}")]
    UnscriptedPrompt(String),
}

/// A text-generation model reachable by the pipeline.
///
/// `complete` must be total: it returns text or a typed failure and
/// never hangs past its configured timeout. Implementations must
/// tolerate concurrent calls unless documented single-flight.
pub trait Backend: Send + Sync {
    /// Stable identity used in traces and error messages.
    fn name(&self) -> &str;

    /// Generates a completion for `prompt`, optionally grounded on an
    /// image. The backend decides how to transport the image reference.
    fn complete(&self, prompt: &str, image_ref: Option<&str>) -> Result<String, BackendError>;
}

pub fn sha256_hex(s: &str) -> String {
    format!("{:x}", Sha256::digest(s.as_bytes()))
}

/// Replays canned responses keyed by the SHA-256 of the prompt.
/// Deterministic by construction; ignores the image reference.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: HashMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ScriptLine {
    prompt_sha256: String,
    response: String,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a response for a prompt given in the clear.
    pub fn script(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(sha256_hex(prompt), response.into());
    }

    /// Registers a response for an already-hashed prompt.
    pub fn script_hash(&mut self, prompt_sha256: impl Into<String>, response: impl Into<String>) {
        self.responses.insert(prompt_sha256.into(), response.into());
    }

    /// Loads a JSONL script of `{prompt_sha256, response}` lines.
    pub fn from_jsonl(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut backend = Self::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptLine = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            backend.responses.insert(entry.prompt_sha256, entry.response);
        }
        Ok(backend)
    }

    pub fn to_jsonl(&self) -> String {
        let mut keys: Vec<_> = self.responses.keys().collect();
        keys.sort();
        keys.iter()
            .map(|k| {
                serde_json::to_string(&ScriptLine {
                    prompt_sha256: (*k).clone(),
                    response: self.responses[*k].clone(),
                })
                .expect("script line serializes")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, prompt: &str, _image_ref: Option<&str>) -> Result<String, BackendError> {
        let hash = sha256_hex(prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(BackendError::UnscriptedPrompt(hash))
    }
}

/// Wraps a closure as a backend; handy in tests.
pub struct FnBackend<F> {
    name: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&str, Option<&str>) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnBackend {
            name: name.into(),
            f,
        }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&str, Option<&str>) -> Result<String, BackendError> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, image_ref: Option<&str>) -> Result<String, BackendError> {
        (self.f)(prompt, image_ref)
    }
}

/// Connection settings for [`HttpBackend`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Chat-completions style endpoint URL.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; read from the env var named by `auth_env` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
    /// Env var consulted for the token (default `HALLEDIT_API_TOKEN`).
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_auth_env() -> String {
    "HALLEDIT_API_TOKEN".to_string()
}

fn default_timeout_secs() -> u64 {
    60
}

/// Chat-completions HTTP adapter. Sends
/// `{model, messages: [{role, content: [text | image_ref]}], temperature: 0}`
/// and reads `choices[0].message.content`.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    name: String,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport {
                backend: config.model.clone(),
                message: e.to_string(),
            })?;
        let name = format!("http:{}", config.model);
        Ok(HttpBackend {
            config,
            client,
            name,
        })
    }

    fn token(&self) -> Option<String> {
        self.config
            .auth_token
            .clone()
            .or_else(|| std::env::var(&self.config.auth_env).ok())
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, image_ref: Option<&str>) -> Result<String, BackendError> {
        let mut content = vec![serde_json::json!({"type": "text", "text": prompt})];
        if let Some(img) = image_ref {
            content.push(serde_json::json!({
                "type": "image_url",
                "image_url": {"url": img}
            }));
        }
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        });
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(token) = self.token() {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| BackendError::Transport {
            backend: self.name.clone(),
            message: e.to_string(),
        })?;
        if !resp.status().is_success() {
            return Err(BackendError::BadResponse {
                backend: self.name.clone(),
                message: format!("HTTP {}", resp.status()),
            });
        }
        let value: serde_json::Value = resp.json().map_err(|e| BackendError::BadResponse {
            backend: self.name.clone(),
            message: e.to_string(),
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::BadResponse {
                backend: self.name.clone(),
                message: "missing choices[0].message.content".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_round_trip() {
        let mut b = ScriptedBackend::new();
        b.script("hello", "world");
        assert_eq!(b.complete("hello", None).unwrap(), "world");
        assert!(matches!(
            b.complete("other", None),
            Err(BackendError::UnscriptedPrompt(_))
        ));
    }

    #[test]
    fn scripted_jsonl_round_trip() {
        let mut b = ScriptedBackend::new();
        b.script("p1", "r1");
        b.script("p2", "r2");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        std::fs::write(&path, b.to_jsonl()).unwrap();
        let loaded = ScriptedBackend::from_jsonl(&path).unwrap();
        assert_eq!(loaded.complete("p1", None).unwrap(), "r1");
        assert_eq!(loaded.complete("p2", Some("img")).unwrap(), "r2");
    }
}
