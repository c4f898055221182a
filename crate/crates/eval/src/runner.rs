use std::time::Duration;

use erkang_core::consult::Phase;
use erkang_core::engine::{Engine, TurnResult};
use erkang_core::Locale;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::suite::TestCase;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("service returned {status} {code}: {message}")]
    Service {
        status: u16,
        code: String,
        message: String,
    },
    #[error("unreadable response: {0}")]
    Decode(String),
}

/// Something that can hold a consultation: the HTTP service or an in-process engine.
pub trait CaseRunner: Send + Sync {
    fn create_session(&self, locale: Locale) -> Result<String, RunError>;
    fn send(&self, session_id: &str, text: &str) -> Result<TurnResult, RunError>;
}

/// Everything captured while playing one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub case_id: String,
    pub session_id: Option<String>,
    pub turns: Vec<TurnResult>,
    pub error: Option<String>,
}

impl CaseRun {
    pub fn final_phase(&self) -> Option<Phase> {
        self.turns.last().map(|t| t.phase_after)
    }

    pub fn errored(&self) -> bool {
        self.error.is_some()
    }
}

/// Plays the script until the session reaches a terminal phase or the script
/// runs out. The first failure stops the case and is recorded on it.
pub fn run_case(case: &TestCase, runner: &dyn CaseRunner) -> CaseRun {
    let mut run = CaseRun {
        case_id: case.case_id.clone(),
        session_id: None,
        turns: Vec::new(),
        error: None,
    };
    let id = match runner.create_session(case.locale) {
        Ok(id) => id,
        Err(e) => {
            run.error = Some(e.to_string());
            return run;
        }
    };
    run.session_id = Some(id.clone());
    for text in &case.script {
        match runner.send(&id, text) {
            Ok(result) => {
                let done = result.phase_after.is_terminal();
                run.turns.push(result);
                if done {
                    break;
                }
            }
            Err(e) => {
                run.error = Some(e.to_string());
                break;
            }
        }
    }
    run
}

pub struct HttpRunner {
    base: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct Created {
    session_id: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Deserialize)]
struct ErrorDetail {
    code: String,
    message: String,
}

impl HttpRunner {
    /// `endpoint` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn post<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T, RunError> {
        let mut resp = self
            .agent
            .post(&format!("{}{path}", self.base))
            .send_json(body)
            .map_err(|e| RunError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| RunError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
                Ok(b) => (b.error.code, b.error.message),
                Err(_) => ("unknown".into(), text),
            };
            return Err(RunError::Service {
                status,
                code,
                message,
            });
        }
        serde_json::from_str(&text).map_err(|e| RunError::Decode(e.to_string()))
    }
}

impl CaseRunner for HttpRunner {
    fn create_session(&self, locale: Locale) -> Result<String, RunError> {
        let created: Created = self.post("/v1/sessions", json!({ "locale": locale }))?;
        Ok(created.session_id)
    }

    fn send(&self, session_id: &str, text: &str) -> Result<TurnResult, RunError> {
        self.post(
            &format!("/v1/sessions/{session_id}/messages"),
            json!({ "text": text }),
        )
    }
}

/// Runs cases against an engine in the same process.
pub struct EngineRunner<'a> {
    engine: &'a Engine,
}

impl<'a> EngineRunner<'a> {
    pub fn new(engine: &'a Engine) -> Self {
        Self { engine }
    }
}

fn service_error(e: erkang_core::engine::EngineError) -> RunError {
    RunError::Service {
        status: 0,
        code: e.code().into(),
        message: e.to_string(),
    }
}

impl CaseRunner for EngineRunner<'_> {
    fn create_session(&self, locale: Locale) -> Result<String, RunError> {
        self.engine
            .create_session(Some(locale), None)
            .map_err(service_error)
    }

    fn send(&self, session_id: &str, text: &str) -> Result<TurnResult, RunError> {
        self.engine
            .handle_turn(session_id, text, None)
            .map_err(service_error)
    }
}
