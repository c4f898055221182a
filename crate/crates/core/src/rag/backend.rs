use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Instruction, PromptBundle};
use crate::consult::Speaker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendProfile {
    Mock,
    HttpChatCompletion,
}

impl BackendProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendProfile::Mock => "mock",
            BackendProfile::HttpChatCompletion => "http_chat_completion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend transport failure: {message}")]
    Transport { message: String, retriable: bool },
    #[error("backend returned HTTP {status}")]
    Status { status: u16, retriable: bool },
    #[error("backend response could not be parsed: {0}")]
    InvalidResponse(String),
    #[error("backend returned an empty completion")]
    EmptyGeneration,
}

impl BackendError {
    pub fn retriable(&self) -> bool {
        match self {
            BackendError::Transport { retriable, .. } | BackendError::Status { retriable, .. } => {
                *retriable
            }
            BackendError::InvalidResponse(_) => false,
            BackendError::EmptyGeneration => true,
        }
    }
}

/// A text generator behind the pipeline. Calls may block up to the backend's timeout.
pub trait GenerationBackend: Send + Sync {
    fn profile(&self) -> BackendProfile;
    fn generate(&self, bundle: &PromptBundle) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpChatConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_ms: u64,
}

impl Default for HttpChatConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            model: "default".into(),
            api_key: None,
            timeout_ms: 30_000,
        }
    }
}

/// OpenAI-style chat-completion client.
pub struct HttpChatBackend {
    config: HttpChatConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("url", &self.config.url)
            .field("model", &self.config.model)
            .field("timeout_ms", &self.config.timeout_ms)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpChatBackend {
    pub fn new(config: HttpChatConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &HttpChatConfig {
        &self.config
    }

    fn messages(bundle: &PromptBundle) -> Vec<serde_json::Value> {
        let mut system = bundle.system_text.clone();
        if !bundle.context_block.is_empty() {
            system.push_str("\n\nReference material:\n");
            system.push_str(&bundle.context_block);
        }
        let mut out = vec![json!({"role": "system", "content": system})];
        for (speaker, text) in &bundle.history {
            let role = match speaker {
                Speaker::User => "user",
                Speaker::Assistant => "assistant",
            };
            out.push(json!({"role": role, "content": text}));
        }
        let task = match &bundle.instruction {
            Instruction::AskFollowUp { slots, question } => {
                let names: Vec<&str> = slots.iter().map(|s| s.as_str()).collect();
                format!(
                    "Ask one follow-up question about: {}. Suggested wording: {question}",
                    if names.is_empty() {
                        "anything the patient wants to add".to_string()
                    } else {
                        names.join(", ")
                    }
                )
            }
            Instruction::ConcludeWithSummary { .. } => {
                "Conclude the consultation with the structured analysis now.".to_string()
            }
        };
        out.push(json!({"role": "system", "content": task}));
        out
    }
}

fn transport(e: ureq::Error) -> BackendError {
    let retriable = matches!(
        e,
        ureq::Error::Timeout(_)
            | ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
    );
    BackendError::Transport {
        message: e.to_string(),
        retriable,
    }
}

impl GenerationBackend for HttpChatBackend {
    fn profile(&self) -> BackendProfile {
        BackendProfile::HttpChatCompletion
    }

    fn generate(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let body = json!({"model": self.config.model, "messages": Self::messages(bundle)});
        let mut req = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::Status {
                status,
                retriable: status == 429 || status >= 500,
            });
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(BackendError::EmptyGeneration);
        }
        Ok(content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locale::Locale;

    fn bundle() -> PromptBundle {
        PromptBundle {
            system_text: "sys".into(),
            context_block: "[source: a] text".into(),
            history: vec![(Speaker::User, "headache".into())],
            instruction: Instruction::AskFollowUp {
                slots: vec![],
                question: "q".into(),
            },
            locale: Locale::En,
            grounding: vec![],
        }
    }

    #[test]
    fn unreachable_endpoint_is_retriable() {
        let backend = HttpChatBackend::new(HttpChatConfig {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            timeout_ms: 2_000,
            ..Default::default()
        });
        let err = backend.generate(&bundle()).unwrap_err();
        assert!(err.retriable(), "{err:?}");
    }

    #[test]
    fn messages_follow_history_order() {
        let msgs = HttpChatBackend::messages(&bundle());
        assert_eq!(msgs.len(), 3);
        assert_eq!(msgs[1]["role"], "user");
        assert!(msgs[0]["content"].as_str().unwrap().contains("[source: a]"));
    }
}
