//! Retrieval-augmented prompt assembly and generation backends.

mod backend;
mod mock;

use serde::{Deserialize, Serialize};

use crate::consult::{Action, SessionState, SlotKey, Speaker};
use crate::knowledge::{ChunkKind, SearchHit};
use crate::locale::Locale;

pub use backend::{
    BackendError, BackendProfile, GenerationBackend, HttpChatBackend, HttpChatConfig,
};
pub use mock::MockBackend;

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_CONTEXT_BUDGET: usize = 2000;

/// Section names requested from the model for a conclusion.
pub const SECTION_NAMES_EN: [&str; 4] = [
    "Symptom Analysis",
    "Possible Causes",
    "Recommended Actions",
    "Urgent Notes",
];
pub const SECTION_NAMES_ZH: [&str; 4] = ["病情分析", "检查建议", "治疗建议", "注意事项"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RagError {
    #[error("cannot {0}: no chief complaint recorded")]
    MissingChiefComplaint(&'static str),
    #[error("context budget must be positive")]
    InvalidBudget,
    #[error("emergency actions never reach generation")]
    EmergencyAction,
}

/// A chunk that made it into the context block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingRef {
    pub chunk_id: String,
    pub disease: String,
    pub kind: ChunkKind,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledContext {
    pub text: String,
    pub refs: Vec<GroundingRef>,
}

impl AssembledContext {
    pub fn chunk_ids(&self) -> Vec<String> {
        self.refs.iter().map(|r| r.chunk_id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Instruction {
    AskFollowUp {
        slots: Vec<SlotKey>,
        question: String,
    },
    ConcludeWithSummary {
        chief_complaint: String,
        findings: Vec<(SlotKey, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub context_block: String,
    pub history: Vec<(Speaker, String)>,
    pub instruction: Instruction,
    pub locale: Locale,
    pub grounding: Vec<GroundingRef>,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Chief complaint, then Filled slot values in slot order, then the latest user
/// message (skipped when it is the chief complaint itself).
pub fn build_query(state: &SessionState) -> Result<String, RagError> {
    let chief = state
        .chief_complaint
        .as_deref()
        .ok_or(RagError::MissingChiefComplaint("build a query"))?;
    let mut parts = vec![chief];
    parts.extend(state.filled_values().map(|(_, v)| v));
    if let Some(latest) = state.latest_user_text() {
        if latest != chief {
            parts.push(latest);
        }
    }
    Ok(normalize_ws(&parts.join(" ")))
}

/// Joins `[source: id] text` fragments in rank order with newlines. A fragment
/// that does not fit the remaining budget is skipped whole; later smaller ones
/// may still fit. Repeated chunk ids keep their first occurrence.
pub fn assemble_context(hits: &[SearchHit], budget: usize) -> Result<AssembledContext, RagError> {
    if budget == 0 {
        return Err(RagError::InvalidBudget);
    }
    let mut out = AssembledContext::default();
    let mut used = 0usize;
    for hit in hits {
        let c = &hit.chunk;
        if out.refs.iter().any(|r| r.chunk_id == c.chunk_id) {
            continue;
        }
        let fragment = format!("[source: {}] {}", c.chunk_id, normalize_ws(&c.text));
        let sep = usize::from(!out.text.is_empty());
        let cost = fragment.chars().count() + sep;
        if used + cost > budget {
            continue;
        }
        if sep == 1 {
            out.text.push('\n');
        }
        out.text.push_str(&fragment);
        used += cost;
        out.refs.push(GroundingRef {
            chunk_id: c.chunk_id.clone(),
            disease: c.disease.clone(),
            kind: c.kind,
            text: c.text.clone(),
        });
    }
    Ok(out)
}

fn system_text(absolute_terms: &[&str]) -> String {
    let mut s = String::from(
        "You are a careful medical consultation assistant. Ask focused follow-up questions until the \
         symptoms are clear, then give a structured, patient-friendly analysis grounded in the reference \
         material. Cite fragments by their [source: id] tag.\n",
    );
    s.push_str(
        "Prudence rules: never state a diagnosis or outcome as certain. Do not use these terms: ",
    );
    s.push_str(&absolute_terms.join(", "));
    s.push_str(
        ". Prefer prudent wording such as \"possible\", \"consider\" and \"suggest screening\".\n",
    );
    s.push_str("When concluding, organise the answer under the headings ");
    s.push_str(&SECTION_NAMES_EN.map(|n| format!("\"{n}\"")).join(", "));
    s.push_str(" (Chinese replies: ");
    s.push_str(&SECTION_NAMES_ZH.join(", "));
    s.push_str(
        "), each heading followed by a colon, with list items on lines starting with \"- \".",
    );
    s
}

/// Builds the backend prompt for a follow-up question or a conclusion.
pub fn compose_prompt(
    state: &SessionState,
    context: &AssembledContext,
    action: &Action,
    absolute_terms: &[&str],
) -> Result<PromptBundle, RagError> {
    let instruction = match action {
        Action::EmergencyHalt { .. } => return Err(RagError::EmergencyAction),
        Action::AskFollowUp { slots, question } => Instruction::AskFollowUp {
            slots: slots.clone(),
            question: question.clone(),
        },
        Action::Conclude => Instruction::ConcludeWithSummary {
            chief_complaint: state
                .chief_complaint
                .clone()
                .ok_or(RagError::MissingChiefComplaint("compose a conclusion"))?,
            findings: state
                .filled_values()
                .map(|(k, v)| (k, v.to_string()))
                .collect(),
        },
    };
    Ok(PromptBundle {
        system_text: system_text(absolute_terms),
        context_block: context.text.clone(),
        history: state
            .transcript
            .iter()
            .map(|e| (e.speaker, e.text.clone()))
            .collect(),
        instruction,
        locale: state.locale,
        grounding: context.refs.clone(),
    })
}
