//! Instruction text providers: the built-in template renderer and an HTTP
//! endpoint speaking a small JSON contract (typically fronting a language model).

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compose::render_template;
use super::sketch::RouteSketch;
use super::style::NavStyle;

pub const LLM_ENDPOINT_ENV: &str = "ASKWORLD_LLM_ENDPOINT";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRef {
    pub id: String,
    pub name: String,
}

/// Request body sent to external providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRequest {
    pub sketch: RouteSketch,
    pub style: NavStyle,
    pub goal: GoalRef,
    pub profile_summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderReply {
    pub text: String,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider request failed: {0}")]
    Transport(String),
    #[error("provider returned an empty instruction")]
    EmptyReply,
}

pub trait InstructionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn compose(&self, request: &InstructionRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateProvider;

impl InstructionProvider for TemplateProvider {
    fn name(&self) -> &str {
        "template"
    }

    fn compose(&self, request: &InstructionRequest) -> Result<String, ProviderError> {
        Ok(render_template(&request.sketch, &request.style, &request.goal.name))
    }
}

/// Blocking HTTP provider. Requests are serialized; each has a timeout.
pub struct HttpProvider {
    endpoint: String,
    agent: ureq::Agent,
    lock: Mutex<()>,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpProvider { endpoint: endpoint.into(), agent, lock: Mutex::new(()) }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(LLM_ENDPOINT_ENV).ok().filter(|s| !s.is_empty()).map(|e| Self::new(e, DEFAULT_TIMEOUT))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl InstructionProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn compose(&self, request: &InstructionRequest) -> Result<String, ProviderError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let reply: ProviderReply = resp.body_mut().read_json().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let text = reply.text.trim().to_string();
        if text.is_empty() {
            return Err(ProviderError::EmptyReply);
        }
        Ok(text)
    }
}
