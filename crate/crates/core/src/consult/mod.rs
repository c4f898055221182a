//! Multi-round symptom inquiry.
//!
//! A consultation opens with a chief complaint, then runs follow-up rounds that
//! fill a fixed set of symptom slots. After every user turn [`Inquiry::next_action`]
//! decides whether to ask about more slots, conclude, or halt for an emergency.

mod lexicon;
mod machine;
mod questions;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::locale::Locale;
use crate::safety::EmergencyTrigger;

pub use lexicon::{Extraction, LexiconError, SlotLexicon};
pub use machine::{
    is_sufficient, EmergencyCheck, Inquiry, NoEmergencyCheck, MAX_SLOTS_PER_QUESTION,
};
pub use questions::QuestionTemplates;

/// Symptom attribute tracked during the inquiry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKey {
    Location,
    Quality,
    Duration,
    Aggravating,
    Relieving,
    Associated,
    BowelHabits,
}

impl SlotKey {
    pub const ALL: [SlotKey; 7] = [
        SlotKey::Location,
        SlotKey::Quality,
        SlotKey::Duration,
        SlotKey::Aggravating,
        SlotKey::Relieving,
        SlotKey::Associated,
        SlotKey::BowelHabits,
    ];

    /// The five slots that count toward the sufficiency quorum.
    pub const CRITICAL: [SlotKey; 5] = [
        SlotKey::Location,
        SlotKey::Quality,
        SlotKey::Duration,
        SlotKey::Aggravating,
        SlotKey::Relieving,
    ];

    pub fn is_critical(self) -> bool {
        Self::CRITICAL.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SlotKey::Location => "location",
            SlotKey::Quality => "quality",
            SlotKey::Duration => "duration",
            SlotKey::Aggravating => "aggravating",
            SlotKey::Relieving => "relieving",
            SlotKey::Associated => "associated",
            SlotKey::BowelHabits => "bowel_habits",
        }
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    Unknown,
    Asked,
    Filled,
    Denied,
}

impl SlotStatus {
    /// Filled or Denied.
    pub fn is_resolved(self) -> bool {
        matches!(self, SlotStatus::Filled | SlotStatus::Denied)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotState {
    pub key: SlotKey,
    pub status: SlotStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_filled: Option<u32>,
}

impl SlotState {
    pub fn unknown(key: SlotKey) -> Self {
        Self {
            key,
            status: SlotStatus::Unknown,
            value: None,
            round_filled: None,
        }
    }

    pub fn filled(key: SlotKey, value: impl Into<String>, round: u32) -> Self {
        Self {
            key,
            status: SlotStatus::Filled,
            value: Some(value.into()),
            round_filled: Some(round),
        }
    }

    pub fn denied(key: SlotKey, round: u32) -> Self {
        Self {
            key,
            status: SlotStatus::Denied,
            value: None,
            round_filled: Some(round),
        }
    }
}

pub type SlotMap = BTreeMap<SlotKey, SlotState>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingChiefComplaint,
    Inquiring,
    Concluded,
    EmergencyHalted,
    Blocked,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Phase::Concluded | Phase::EmergencyHalted | Phase::Blocked
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::AwaitingChiefComplaint => "awaiting_chief_complaint",
            Phase::Inquiring => "inquiring",
            Phase::Concluded => "concluded",
            Phase::EmergencyHalted => "emergency_halted",
            Phase::Blocked => "blocked",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
    /// Unix epoch milliseconds.
    pub at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsultConfig {
    pub min_rounds: u32,
    pub max_rounds: u32,
    pub critical_slot_quorum: u32,
}

impl Default for ConsultConfig {
    fn default() -> Self {
        Self {
            min_rounds: 3,
            max_rounds: 5,
            critical_slot_quorum: 4,
        }
    }
}

impl ConsultConfig {
    pub fn validate(&self) -> Result<(), ConsultError> {
        if self.min_rounds < 1 || self.min_rounds > self.max_rounds {
            return Err(ConsultError::InvalidConfig(format!(
                "need 1 <= min_rounds <= max_rounds, got min_rounds={} max_rounds={}",
                self.min_rounds, self.max_rounds
            )));
        }
        let critical = SlotKey::CRITICAL.len() as u32;
        if self.critical_slot_quorum < 1 || self.critical_slot_quorum > critical {
            return Err(ConsultError::InvalidConfig(format!(
                "critical_slot_quorum must be in 1..={critical}, got {}",
                self.critical_slot_quorum
            )));
        }
        Ok(())
    }
}

/// Per-consultation state. Every operation on it is state-in/state-out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: Phase,
    /// Completed inquiry rounds; the chief complaint does not count.
    pub round: u32,
    pub chief_complaint: Option<String>,
    pub slots: SlotMap,
    pub transcript: Vec<TranscriptEntry>,
    pub config: ConsultConfig,
    pub locale: Locale,
    /// Slots named by the latest follow-up question; a bare negation resolves against these.
    #[serde(default)]
    pub last_asked: Vec<SlotKey>,
}

impl SessionState {
    /// Opens a fresh session with a random 128-bit id.
    pub fn new(config: ConsultConfig, locale: Locale) -> Result<Self, ConsultError> {
        Self::with_id(new_session_id(), config, locale)
    }

    pub fn with_id(
        session_id: String,
        config: ConsultConfig,
        locale: Locale,
    ) -> Result<Self, ConsultError> {
        config.validate()?;
        Ok(Self {
            session_id,
            phase: Phase::AwaitingChiefComplaint,
            round: 0,
            chief_complaint: None,
            slots: SlotKey::ALL
                .iter()
                .map(|&k| (k, SlotState::unknown(k)))
                .collect(),
            transcript: Vec::new(),
            config,
            locale,
            last_asked: Vec::new(),
        })
    }

    pub fn slot(&self, key: SlotKey) -> &SlotState {
        &self.slots[&key]
    }

    pub fn critical_resolved(&self) -> u32 {
        SlotKey::CRITICAL
            .iter()
            .filter(|k| self.slot(**k).status.is_resolved())
            .count() as u32
    }

    pub fn latest_user_text(&self) -> Option<&str> {
        self.transcript
            .iter()
            .rev()
            .find(|e| e.speaker == Speaker::User)
            .map(|e| e.text.as_str())
    }

    pub fn push_assistant(&mut self, text: impl Into<String>, at_ms: u64) {
        self.transcript.push(TranscriptEntry {
            speaker: Speaker::Assistant,
            text: text.into(),
            at_ms,
        });
    }

    /// Filled slot values in slot order.
    pub fn filled_values(&self) -> impl Iterator<Item = (SlotKey, &str)> {
        self.slots
            .values()
            .filter_map(|s| match (s.status, s.value.as_deref()) {
                (SlotStatus::Filled, Some(v)) => Some((s.key, v)),
                _ => None,
            })
    }
}

/// 32 lowercase hex digits drawn from the thread-local CSPRNG.
pub fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

/// Whether `id` has the shape produced by [`new_session_id`].
pub fn is_valid_session_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// What the engine does after a user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// `slots` is empty only when every slot is already resolved but the
    /// minimum round count has not been reached; the question is then an open
    /// supplementary one.
    AskFollowUp {
        slots: Vec<SlotKey>,
        question: String,
    },
    Conclude,
    EmergencyHalt {
        trigger: EmergencyTrigger,
    },
}

impl Action {
    pub fn tag(&self) -> ActionTag {
        match self {
            Action::AskFollowUp { .. } => ActionTag::AskFollowUp,
            Action::Conclude => ActionTag::Conclude,
            Action::EmergencyHalt { .. } => ActionTag::EmergencyHalt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTag {
    AskFollowUp,
    Conclude,
    EmergencyHalt,
    /// Input was blocked by content screening; no inquiry action ran.
    Refused,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConsultError {
    #[error("invalid consultation config: {0}")]
    InvalidConfig(String),
    #[error("cannot {op} in phase {phase}")]
    InvalidState { phase: Phase, op: &'static str },
    #[error("{0}")]
    Validation(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_session_has_seven_unknown_slots() {
        let s = SessionState::new(ConsultConfig::default(), Locale::Zh).unwrap();
        assert_eq!(s.phase, Phase::AwaitingChiefComplaint);
        assert_eq!(s.round, 0);
        assert_eq!(s.slots.len(), 7);
        assert!(s.slots.values().all(|v| v.status == SlotStatus::Unknown));
        assert!(s.transcript.is_empty());
        assert!(is_valid_session_id(&s.session_id));
    }

    #[test]
    fn config_is_echoed() {
        let cfg = ConsultConfig {
            min_rounds: 3,
            max_rounds: 5,
            critical_slot_quorum: 4,
        };
        let s = SessionState::new(cfg, Locale::En).unwrap();
        assert_eq!(s.config, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ConsultConfig {
                min_rounds: 6,
                max_rounds: 5,
                critical_slot_quorum: 4,
            },
            ConsultConfig {
                min_rounds: 0,
                max_rounds: 5,
                critical_slot_quorum: 4,
            },
            ConsultConfig {
                min_rounds: 3,
                max_rounds: 5,
                critical_slot_quorum: 0,
            },
            ConsultConfig {
                min_rounds: 3,
                max_rounds: 5,
                critical_slot_quorum: 6,
            },
        ];
        for cfg in bad {
            assert!(matches!(
                SessionState::new(cfg, Locale::Zh),
                Err(ConsultError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn session_ids_are_distinct() {
        let a = new_session_id();
        let b = new_session_id();
        assert_ne!(a, b);
        assert!(!is_valid_session_id("../etc/passwd"));
    }
}
