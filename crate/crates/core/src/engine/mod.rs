//! Per-turn orchestration: screening, inquiry, retrieval, generation,
//! sanitization and formatting, with an append-only session log.

mod persist;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::consult::{
    is_valid_session_id, Action, ActionTag, ConsultConfig, ConsultError, Inquiry, Phase,
    SessionState, Speaker,
};
use crate::format::{FormattedResponse, HighlightLexicon};
use crate::knowledge::{embed_reference, Exec, KnowledgeStore};
use crate::locale::Locale;
use crate::rag::{
    assemble_context, build_query, compose_prompt, GenerationBackend, MockBackend,
    DEFAULT_CONTEXT_BUDGET, DEFAULT_K,
};
use crate::safety::{
    append_disclaimer, DisclaimerKind, EmergencyDirectory, EmergencySymptom, EmergencyTrigger,
    SafetyFilter, SafetyVerdict, VerdictTag,
};

pub use persist::{
    LogCodec, LogRecord, PassThrough, PersistError, PlainCodec, Redactor, SessionLog,
};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session is already {0}")]
    Conflict(Phase),
    #[error("session was closed after blocked content")]
    Blocked,
    #[error("{0}")]
    Validation(String),
    #[error("generation backend failed: {message}")]
    Upstream { message: String, retriable: bool },
    #[error("session storage failed: {0}")]
    Storage(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound(_) => "not_found",
            EngineError::Conflict(_) => "conflict",
            EngineError::Blocked => "blocked",
            EngineError::Validation(_) => "validation",
            EngineError::Upstream { .. } => "upstream_failure",
            EngineError::Storage(_) => "storage_failure",
        }
    }

    pub fn retriable(&self) -> bool {
        match self {
            EngineError::Upstream { retriable, .. } => *retriable,
            EngineError::Storage(_) => true,
            _ => false,
        }
    }
}

impl From<ConsultError> for EngineError {
    fn from(e: ConsultError) -> Self {
        match e {
            ConsultError::InvalidState { phase, .. } if phase.is_terminal() => {
                EngineError::Conflict(phase)
            }
            other => EngineError::Validation(other.to_string()),
        }
    }
}

impl From<PersistError> for EngineError {
    fn from(e: PersistError) -> Self {
        EngineError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub verdict: VerdictTag,
    pub replacements_count: usize,
    pub retrieved_chunk_ids: Vec<String>,
    /// Symptom class that halted the session, on the halting turn only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emergency: Option<EmergencySymptom>,
}

/// Inquiry progress after the turn, used by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InquiryProgress {
    pub round: u32,
    pub critical_resolved: u32,
    pub critical_slot_quorum: u32,
    pub max_rounds: u32,
}

impl InquiryProgress {
    fn of(state: &SessionState) -> Self {
        Self {
            round: state.round,
            critical_resolved: state.critical_resolved(),
            critical_slot_quorum: state.config.critical_slot_quorum,
            max_rounds: state.config.max_rounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub session_id: String,
    pub phase_after: Phase,
    pub response: FormattedResponse,
    pub action_taken: ActionTag,
    pub audit: Audit,
    pub inquiry: InquiryProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptViewEntry {
    pub speaker: Speaker,
    pub text: String,
    pub at_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<FormattedResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptView {
    pub session_id: String,
    pub phase: Phase,
    pub round: u32,
    pub locale: Locale,
    pub entries: Vec<TranscriptViewEntry>,
}

/// Partial consult settings supplied at session creation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsultOverrides {
    pub min_rounds: Option<u32>,
    pub max_rounds: Option<u32>,
    pub critical_slot_quorum: Option<u32>,
}

impl ConsultOverrides {
    pub fn apply(self, base: ConsultConfig) -> ConsultConfig {
        ConsultConfig {
            min_rounds: self.min_rounds.unwrap_or(base.min_rounds),
            max_rounds: self.max_rounds.unwrap_or(base.max_rounds),
            critical_slot_quorum: self
                .critical_slot_quorum
                .unwrap_or(base.critical_slot_quorum),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub consult: ConsultConfig,
    pub default_locale: Locale,
    pub retrieval_k: usize,
    pub context_budget: usize,
    pub fsync: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            consult: ConsultConfig::default(),
            default_locale: Locale::Zh,
            retrieval_k: DEFAULT_K,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            fsync: false,
        }
    }
}

/// Builds an [`Engine`]; every component defaults to the shipped fixture.
pub struct EngineBuilder {
    config: EngineConfig,
    inquiry: Option<Inquiry>,
    safety: Option<SafetyFilter>,
    directory: Option<EmergencyDirectory>,
    highlights: Option<HighlightLexicon>,
    store: Option<KnowledgeStore>,
    backend: Option<Arc<dyn GenerationBackend>>,
    data_dir: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    redactor: Arc<dyn Redactor>,
    codec: Arc<dyn LogCodec>,
}

impl Default for EngineBuilder {
    fn default() -> Self {
        Self {
            config: EngineConfig::default(),
            inquiry: None,
            safety: None,
            directory: None,
            highlights: None,
            store: None,
            backend: None,
            data_dir: None,
            clock: Arc::new(SystemClock),
            redactor: Arc::new(PassThrough),
            codec: Arc::new(PlainCodec),
        }
    }
}

impl EngineBuilder {
    pub fn config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn inquiry(mut self, inquiry: Inquiry) -> Self {
        self.inquiry = Some(inquiry);
        self
    }

    pub fn safety(mut self, safety: SafetyFilter) -> Self {
        self.safety = Some(safety);
        self
    }

    pub fn directory(mut self, directory: EmergencyDirectory) -> Self {
        self.directory = Some(directory);
        self
    }

    pub fn highlights(mut self, highlights: HighlightLexicon) -> Self {
        self.highlights = Some(highlights);
        self
    }

    pub fn knowledge(mut self, store: KnowledgeStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn backend(mut self, backend: Arc<dyn GenerationBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    /// Enables the session log; existing logs under this directory are recovered.
    pub fn data_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.data_dir = Some(dir.into());
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn redactor(mut self, redactor: Arc<dyn Redactor>) -> Self {
        self.redactor = redactor;
        self
    }

    pub fn codec(mut self, codec: Arc<dyn LogCodec>) -> Self {
        self.codec = codec;
        self
    }

    pub fn build(self) -> Result<Engine, EngineError> {
        self.config.consult.validate()?;
        if self.config.retrieval_k == 0 || self.config.context_budget == 0 {
            return Err(EngineError::Validation(
                "retrieval_k and context_budget must be positive".into(),
            ));
        }
        let store = match self.store {
            Some(s) => s,
            None => {
                let mut s = KnowledgeStore::default();
                crate::knowledge::load_kb_str(&mut s, crate::fixtures::KNOWLEDGE_BASE)
                    .map_err(|e| EngineError::Validation(e.to_string()))?;
                s
            }
        };
        let log = match &self.data_dir {
            Some(dir) => Some(SessionLog::open(
                dir,
                self.config.fsync,
                self.redactor.clone(),
                self.codec.clone(),
            )?),
            None => None,
        };
        let mut sessions = HashMap::new();
        if let Some(log) = &log {
            for state in log.recover()? {
                sessions.insert(state.session_id.clone(), Arc::new(Mutex::new(state)));
            }
            log::info!(
                "recovered {} sessions from {}",
                sessions.len(),
                log.dir().display()
            );
        }
        Ok(Engine {
            config: self.config,
            inquiry: self.inquiry.unwrap_or_else(Inquiry::shipped),
            safety: self.safety.unwrap_or_else(SafetyFilter::shipped),
            directory: self.directory.unwrap_or_else(EmergencyDirectory::shipped),
            highlights: self.highlights.unwrap_or_else(HighlightLexicon::shipped),
            store: RwLock::new(store),
            backend: self.backend.unwrap_or_else(|| Arc::new(MockBackend::new())),
            sessions: RwLock::new(sessions),
            log,
            clock: self.clock,
        })
    }
}

/// The consultation service core. Turns on one session are serialized; turns
/// on different sessions run concurrently.
pub struct Engine {
    config: EngineConfig,
    inquiry: Inquiry,
    safety: SafetyFilter,
    directory: EmergencyDirectory,
    highlights: HighlightLexicon,
    store: RwLock<KnowledgeStore>,
    backend: Arc<dyn GenerationBackend>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    log: Option<SessionLog>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("backend", &self.backend.profile())
            .field("sessions", &self.sessions.read().len())
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn builder() -> EngineBuilder {
        EngineBuilder::default()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn safety(&self) -> &SafetyFilter {
        &self.safety
    }

    pub fn highlights(&self) -> &HighlightLexicon {
        &self.highlights
    }

    pub fn backend(&self) -> &Arc<dyn GenerationBackend> {
        &self.backend
    }

    pub fn kb_chunks(&self) -> usize {
        self.store.read().len()
    }

    /// Exclusive access to the knowledge store, e.g. for live upserts.
    pub fn with_knowledge_mut<R>(&self, f: impl FnOnce(&mut KnowledgeStore) -> R) -> R {
        f(&mut self.store.write())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// A copy of the in-memory state.
    pub fn session_state(&self, id: &str) -> Option<SessionState> {
        self.sessions.read().get(id).map(|s| s.lock().clone())
    }

    pub fn create_session(
        &self,
        locale: Option<Locale>,
        overrides: Option<ConsultOverrides>,
    ) -> Result<String, EngineError> {
        let config = overrides.unwrap_or_default().apply(self.config.consult);
        let state = SessionState::new(config, locale.unwrap_or(self.config.default_locale))?;
        let id = state.session_id.clone();
        if let Some(log) = &self.log {
            log.append(&LogRecord::Created {
                state: state.clone(),
            })?;
        }
        self.sessions
            .write()
            .insert(id.clone(), Arc::new(Mutex::new(state)));
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, EngineError> {
        if !is_valid_session_id(id) {
            return Err(EngineError::NotFound(id.to_string()));
        }
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(id.to_string()))
    }

    pub fn get_transcript(&self, id: &str) -> Result<TranscriptView, EngineError> {
        let state = self.session(id)?.lock().clone();
        let entries = state
            .transcript
            .iter()
            .map(|e| TranscriptViewEntry {
                speaker: e.speaker,
                text: e.text.clone(),
                at_ms: e.at_ms,
                response: match e.speaker {
                    Speaker::Assistant => {
                        FormattedResponse::from_text(&e.text, state.locale, &self.highlights).ok()
                    }
                    Speaker::User => None,
                },
            })
            .collect();
        Ok(TranscriptView {
            session_id: state.session_id,
            phase: state.phase,
            round: state.round,
            locale: state.locale,
            entries,
        })
    }

    /// Runs one user turn. On any error the session is left exactly as before.
    pub fn handle_turn(
        &self,
        id: &str,
        text: &str,
        region_code: Option<&str>,
    ) -> Result<TurnResult, EngineError> {
        let session = self.session(id)?;
        let mut state = session.lock();
        match state.phase {
            Phase::Blocked => return Err(EngineError::Blocked),
            p if p.is_terminal() => return Err(EngineError::Conflict(p)),
            _ => {}
        }
        if text.trim().is_empty() {
            return Err(EngineError::Validation("message text is empty".into()));
        }
        let snapshot = state.clone();
        let outcome = self.run_turn(&mut state, text, region_code);
        let outcome = outcome.and_then(|result| {
            if let Some(log) = &self.log {
                log.append(&LogRecord::Turn {
                    state: state.clone(),
                    result: Box::new(result.clone()),
                })?;
            }
            Ok(result)
        });
        if outcome.is_err() {
            *state = snapshot;
        }
        outcome
    }

    fn run_turn(
        &self,
        state: &mut SessionState,
        text: &str,
        region: Option<&str>,
    ) -> Result<TurnResult, EngineError> {
        let now = self.clock.now_ms();
        let verdict = self.safety.screen_input(text);

        if let SafetyVerdict::Blocked { category, .. } = &verdict {
            state.transcript.push(crate::consult::TranscriptEntry {
                speaker: Speaker::User,
                text: text.trim().to_string(),
                at_ms: now,
            });
            state.phase = Phase::Blocked;
            let message = self.safety.refusal_message(*category, state.locale);
            return self.finish(
                state,
                message,
                DisclaimerKind::Final,
                ActionTag::Refused,
                &verdict,
                0,
                vec![],
                now,
            );
        }

        self.inquiry.record_user_turn(state, text, now)?;

        let trigger = match &verdict {
            SafetyVerdict::Emergency { trigger } => Some(trigger.clone()),
            _ => self.safety.detect_emergency(text, &state.slots),
        };
        if let Some(trigger) = trigger {
            return self.halt(state, &trigger, region, &verdict, now);
        }

        let action = self.inquiry.next_action(state, &self.safety)?;
        if let Action::EmergencyHalt { trigger } = &action {
            return self.halt(state, trigger, region, &verdict, now);
        }

        let query = build_query(state).map_err(|e| EngineError::Validation(e.to_string()))?;
        let context = {
            let store = self.store.read();
            let hits = match embed_reference(&query, store.dimension()) {
                Ok(q) => store
                    .search_with(&q, self.config.retrieval_k, None, Exec::default())
                    .map_err(|e| EngineError::Validation(e.to_string()))?,
                Err(e) => {
                    log::debug!("query not embeddable ({e}); generating without context");
                    Vec::new()
                }
            };
            assemble_context(&hits, self.config.context_budget)
                .map_err(|e| EngineError::Validation(e.to_string()))?
        };
        let terms: Vec<&str> = self.safety.absolute_terms().collect();
        let bundle = compose_prompt(state, &context, &action, &terms)
            .map_err(|e| EngineError::Validation(e.to_string()))?;
        let raw = self
            .backend
            .generate(&bundle)
            .map_err(|e| EngineError::Upstream {
                message: e.to_string(),
                retriable: e.retriable(),
            })?;

        let sanitized = self.safety.sanitize(&raw);
        let kind = match action {
            Action::AskFollowUp { .. } => DisclaimerKind::MidDialogue,
            _ => DisclaimerKind::Final,
        };
        let chunk_ids = context.chunk_ids();
        self.finish(
            state,
            sanitized.text,
            kind,
            action.tag(),
            &verdict,
            sanitized.replacements.len(),
            chunk_ids,
            now,
        )
    }

    fn halt(
        &self,
        state: &mut SessionState,
        trigger: &EmergencyTrigger,
        region: Option<&str>,
        verdict: &SafetyVerdict,
        now: u64,
    ) -> Result<TurnResult, EngineError> {
        state.phase = Phase::EmergencyHalted;
        let message = self
            .safety
            .emergency_message(trigger, region, &self.directory, state.locale);
        let mut result = self.finish(
            state,
            message,
            DisclaimerKind::Final,
            ActionTag::EmergencyHalt,
            verdict,
            0,
            vec![],
            now,
        )?;
        result.audit.emergency = Some(trigger.symptom.clone());
        Ok(result)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        state: &mut SessionState,
        body: String,
        kind: DisclaimerKind,
        action: ActionTag,
        verdict: &SafetyVerdict,
        replacements_count: usize,
        retrieved_chunk_ids: Vec<String>,
        now: u64,
    ) -> Result<TurnResult, EngineError> {
        let text = append_disclaimer(&body, kind, state.locale);
        let response = FormattedResponse::from_text(&text, state.locale, &self.highlights)
            .map_err(|e| EngineError::Validation(e.to_string()))?;
        state.push_assistant(text, now);
        Ok(TurnResult {
            session_id: state.session_id.clone(),
            phase_after: state.phase,
            response,
            action_taken: action,
            audit: Audit {
                verdict: verdict.tag(),
                replacements_count,
                retrieved_chunk_ids,
                emergency: None,
            },
            inquiry: InquiryProgress::of(state),
        })
    }
}
