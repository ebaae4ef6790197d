use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio_util::sync::CancellationToken;

use super::mock::MockProvider;
use super::remote::RemoteProvider;
use super::schema::{extract_json, validate_payload, Meta, Payload, SchemaId};

pub const PERSONA_MARKER: &str = "therapeutic assistant";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("provider did not answer within {0:?}")]
    ProviderTimeout(Duration),
    #[error("provider authentication failed: {0}")]
    ProviderAuth(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("output failed schema validation after {attempts} attempt(s): {message}")]
    SchemaViolation {
        message: String,
        raw: String,
        attempts: u32,
    },
    #[error("request cancelled")]
    Cancelled,
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Remote,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_seed() -> u64 {
    7
}
fn default_temperature() -> f32 {
    0.7
}
fn default_base_url() -> String {
    "https://api.openai.com/v1".to_owned()
}
fn default_max_output_tokens() -> u32 {
    1_500
}

/// The `[llm]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider: ProviderKind,
    #[serde(default)]
    pub model_name: String,
    /// Name of the environment variable holding the API key, never the key.
    #[serde(default)]
    pub api_key_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
}

impl ProviderConfig {
    pub fn mock(seed: u64) -> Self {
        Self {
            provider: ProviderKind::Mock,
            model_name: "mock".to_owned(),
            api_key_env: String::new(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            seed,
            temperature: default_temperature(),
            base_url: String::new(),
            max_output_tokens: default_max_output_tokens(),
        }
    }

    pub fn remote(model_name: &str, api_key_env: &str, base_url: &str) -> Self {
        Self {
            provider: ProviderKind::Remote,
            model_name: model_name.to_owned(),
            api_key_env: api_key_env.to_owned(),
            base_url: base_url.to_owned(),
            ..Self::mock(0)
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.provider == ProviderKind::Remote {
            if self.model_name.trim().is_empty() {
                return Err(GatewayError::InvalidConfig(
                    "llm.model_name is required for the remote provider".into(),
                ));
            }
            if self.api_key_env.trim().is_empty() {
                return Err(GatewayError::InvalidConfig(
                    "llm.api_key_env is required for the remote provider".into(),
                ));
            }
            if self.base_url.trim().is_empty() {
                return Err(GatewayError::InvalidConfig("llm.base_url must not be empty".into()));
            }
        }
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidConfig("llm.timeout_ms must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidConfig(
                "llm.temperature must lie in [0, 2]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub persona_preamble: String,
    pub instruction: String,
    pub state_xml: String,
    pub output_schema: SchemaId,
    pub locale: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
    /// Number of items asked for, when the schema returns a list.
    pub item_count: Option<u32>,
}

impl CompletionRequest {
    pub fn check(&self) -> Result<(), GatewayError> {
        if !self.persona_preamble.contains(PERSONA_MARKER) {
            return Err(GatewayError::InvalidRequest(format!(
                "persona preamble must contain {PERSONA_MARKER:?}"
            )));
        }
        roxmltree::Document::parse(&self.state_xml)
            .map_err(|e| GatewayError::InvalidRequest(format!("state xml is malformed: {e}")))?;
        Ok(())
    }
}

/// A previous attempt and the note sent back to correct it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub raw: String,
    pub note: String,
}

pub struct ProviderCall<'a> {
    pub request: &'a CompletionRequest,
    pub corrections: &'a [Correction],
}

/// A text-completion backend.
#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOutput {
    pub payload: Payload,
    pub meta: Meta,
    pub raw: String,
    pub attempts: u32,
}

pub fn corrective_note(schema: SchemaId, error: &str) -> String {
    format!(
        "Your previous answer could not be used: {error}. Reply again with exactly one fenced ```json block matching {}.",
        schema.describe()
    )
}

/// Stateless front door to a provider. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
}

impl Gateway {
    pub fn from_config(config: ProviderConfig) -> Result<Self, GatewayError> {
        config.check()?;
        let provider: Arc<dyn Provider> = match config.provider {
            ProviderKind::Mock => Arc::new(MockProvider::new(config.seed)),
            ProviderKind::Remote => Arc::new(RemoteProvider::new(&config)?),
        };
        Ok(Self { provider, config })
    }

    pub fn with_provider(provider: Arc<dyn Provider>, config: ProviderConfig) -> Self {
        Self { provider, config }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub async fn complete_structured(
        &self,
        req: &CompletionRequest,
    ) -> Result<StructuredOutput, GatewayError> {
        self.complete_with_notes(req, Vec::new()).await
    }

    /// Like [`Gateway::complete_structured`] but aborts with
    /// [`GatewayError::Cancelled`] once `token` fires.
    pub async fn complete_structured_cancellable(
        &self,
        req: &CompletionRequest,
        token: &CancellationToken,
    ) -> Result<StructuredOutput, GatewayError> {
        tokio::select! {
            biased;
            _ = token.cancelled() => Err(GatewayError::Cancelled),
            out = self.complete_structured(req) => out,
        }
    }

    /// Runs the repair loop starting from caller-supplied corrections (used
    /// by pipelines that reject a valid-looking payload on content grounds).
    pub async fn complete_with_notes(
        &self,
        req: &CompletionRequest,
        mut corrections: Vec<Correction>,
    ) -> Result<StructuredOutput, GatewayError> {
        req.check()?;
        let max_attempts = self.config.max_retries + 1;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let call = ProviderCall {
                request: req,
                corrections: &corrections,
            };
            let raw = tokio::time::timeout(self.config.timeout(), self.provider.complete(call))
                .await
                .map_err(|_| GatewayError::ProviderTimeout(self.config.timeout()))??;
            let checked = extract_json(&raw).and_then(|v| validate_payload(req.output_schema, &v));
            match checked {
                Ok((payload, meta)) => {
                    return Ok(StructuredOutput {
                        payload,
                        meta,
                        raw,
                        attempts,
                    })
                }
                Err(e) if attempts < max_attempts => {
                    tracing::debug!(schema = %req.output_schema, attempt = attempts, error = %e, "repairing model output");
                    corrections.push(Correction {
                        raw,
                        note: corrective_note(req.output_schema, &e.0),
                    });
                }
                Err(e) => {
                    return Err(GatewayError::SchemaViolation {
                        message: e.0,
                        raw,
                        attempts,
                    })
                }
            }
        }
    }
}

/// One-shot convenience over [`Gateway`].
pub async fn complete_structured(
    req: &CompletionRequest,
    cfg: &ProviderConfig,
) -> Result<StructuredOutput, GatewayError> {
    Gateway::from_config(cfg.clone())?.complete_structured(req).await
}
