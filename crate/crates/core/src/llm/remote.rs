//! Chat-completion HTTP provider.

use std::fmt;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::gateway::{GatewayError, Provider, ProviderCall, ProviderConfig};

pub struct RemoteProvider {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key_env: String,
}

impl fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key_env", &self.api_key_env)
            .finish()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    pub max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

fn message(role: &str, content: impl Into<String>) -> ChatMessage {
    ChatMessage {
        role: role.to_owned(),
        content: content.into(),
    }
}

/// Persona as the system message, instruction plus state as the user
/// message, then each failed attempt and its corrective note.
pub fn build_messages(call: &ProviderCall<'_>) -> Vec<ChatMessage> {
    let req = call.request;
    let mut messages = vec![
        message("system", req.persona_preamble.clone()),
        message("user", format!("{}\n\n{}", req.instruction, req.state_xml)),
    ];
    for c in call.corrections {
        messages.push(message("assistant", c.raw.clone()));
        messages.push(message("user", c.note.clone()));
    }
    messages
}

impl RemoteProvider {
    pub fn new(cfg: &ProviderConfig) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model_name.clone(),
            api_key_env: cfg.api_key_env.clone(),
        })
    }

    fn api_key(&self) -> Result<String, GatewayError> {
        match std::env::var(&self.api_key_env) {
            Ok(key) if !key.trim().is_empty() => Ok(key),
            _ => Err(GatewayError::ProviderAuth(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))),
        }
    }
}

#[async_trait]
impl Provider for RemoteProvider {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<String, GatewayError> {
        let key = self.api_key()?;
        let body = ChatRequest {
            model: self.model.clone(),
            messages: build_messages(&call),
            temperature: call.request.temperature,
            max_tokens: call.request.max_output_tokens,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    GatewayError::ProviderTimeout(std::time::Duration::ZERO)
                } else {
                    GatewayError::ProviderUnavailable(e.without_url().to_string())
                }
            })?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(GatewayError::ProviderAuth(format!(
                "provider rejected the key from {} ({status})",
                self.api_key_env
            )));
        }
        if !status.is_success() {
            return Err(GatewayError::ProviderUnavailable(format!("provider returned {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| GatewayError::ProviderUnavailable(format!("unreadable response: {}", e.without_url())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| GatewayError::ProviderUnavailable("response had no choices".into()))
    }
}
