use super::{
    Action, ConsultError, Phase, QuestionTemplates, SessionState, SlotKey, SlotLexicon, SlotMap,
    SlotStatus, Speaker, TranscriptEntry,
};
use crate::safety::EmergencyTrigger;

/// Follow-up questions bundle at most this many slots.
pub const MAX_SLOTS_PER_QUESTION: usize = 3;

/// Emergency re-check over slot values, run by [`Inquiry::next_action`].
pub trait EmergencyCheck {
    fn check_slots(&self, slots: &SlotMap) -> Option<EmergencyTrigger>;
}

/// Skips the slot re-check; used when the caller has no safety lexicon at hand.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoEmergencyCheck;

impl EmergencyCheck for NoEmergencyCheck {
    fn check_slots(&self, _slots: &SlotMap) -> Option<EmergencyTrigger> {
        None
    }
}

/// Enough information to conclude: the minimum round count is reached with a
/// quorum of critical slots resolved, or the round budget is spent.
pub fn is_sufficient(state: &SessionState) -> bool {
    let cfg = &state.config;
    (state.round >= cfg.min_rounds && state.critical_resolved() >= cfg.critical_slot_quorum)
        || state.round >= cfg.max_rounds
}

/// The inquiry state machine: a slot lexicon plus question templates.
#[derive(Debug, Clone)]
pub struct Inquiry {
    lexicon: SlotLexicon,
    templates: QuestionTemplates,
}

impl Inquiry {
    pub fn new(lexicon: SlotLexicon, templates: QuestionTemplates) -> Self {
        Self { lexicon, templates }
    }

    pub fn shipped() -> Self {
        Self::new(SlotLexicon::shipped(), QuestionTemplates::shipped())
    }

    pub fn lexicon(&self) -> &SlotLexicon {
        &self.lexicon
    }

    pub fn templates(&self) -> &QuestionTemplates {
        &self.templates
    }

    /// Records one user message. The first message becomes the chief complaint;
    /// each later one completes an inquiry round. Slot evidence is merged without
    /// ever overwriting a Filled value.
    pub fn record_user_turn(
        &self,
        state: &mut SessionState,
        text: &str,
        at_ms: u64,
    ) -> Result<(), ConsultError> {
        if !matches!(
            state.phase,
            Phase::AwaitingChiefComplaint | Phase::Inquiring
        ) {
            return Err(ConsultError::InvalidState {
                phase: state.phase,
                op: "record a user turn",
            });
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(ConsultError::Validation("user message is empty".into()));
        }
        if state.phase == Phase::Inquiring && state.round >= state.config.max_rounds {
            return Err(ConsultError::InvalidState {
                phase: state.phase,
                op: "exceed max_rounds",
            });
        }

        state.transcript.push(TranscriptEntry {
            speaker: Speaker::User,
            text: text.to_string(),
            at_ms,
        });
        if state.phase == Phase::AwaitingChiefComplaint {
            state.chief_complaint = Some(text.to_string());
            state.phase = Phase::Inquiring;
        } else {
            state.round += 1;
        }

        let extraction = self.lexicon.extract(text, state.round);
        for (key, found) in extraction.slots {
            let current = state.slots.get_mut(&key).expect("all slots present");
            // a filled slot is never overwritten, nor a denial by another denial
            let replace = !matches!(
                (current.status, found.status),
                (SlotStatus::Filled, _) | (SlotStatus::Denied, SlotStatus::Denied)
            );
            if replace {
                *current = found;
            }
        }
        if extraction.bare_negation {
            for key in state.last_asked.clone() {
                let current = state.slots.get_mut(&key).expect("all slots present");
                if !current.status.is_resolved() {
                    *current = super::SlotState::denied(key, state.round);
                }
            }
        }
        Ok(())
    }

    /// Decides the next step and applies it to `state`: Conclude and
    /// EmergencyHalt move the phase to terminal, AskFollowUp marks its slots Asked.
    pub fn next_action(
        &self,
        state: &mut SessionState,
        emergency: &dyn EmergencyCheck,
    ) -> Result<Action, ConsultError> {
        if state.phase != Phase::Inquiring {
            return Err(ConsultError::InvalidState {
                phase: state.phase,
                op: "choose the next action",
            });
        }
        if let Some(trigger) = emergency.check_slots(&state.slots) {
            state.phase = Phase::EmergencyHalted;
            return Ok(Action::EmergencyHalt { trigger });
        }
        if is_sufficient(state) {
            state.phase = Phase::Concluded;
            return Ok(Action::Conclude);
        }

        let chief = state.chief_complaint.clone().unwrap_or_default();
        let slots = self.pick_slots(state, &chief);
        let closing = state.round >= 1;
        let question = if slots.is_empty() {
            self.templates.supplementary(&chief, state.locale, closing)
        } else {
            self.templates
                .question_for(&slots, &chief, state.locale, closing)?
        };
        for key in &slots {
            state.slots.get_mut(key).expect("all slots present").status = SlotStatus::Asked;
        }
        state.last_asked = slots.clone();
        Ok(Action::AskFollowUp { slots, question })
    }

    /// Unresolved slots in ladder order, never-asked ones first.
    fn pick_slots(&self, state: &SessionState, chief: &str) -> Vec<SlotKey> {
        let ladder = self.lexicon.priority_for(chief);
        let with_status = |status: SlotStatus| {
            ladder
                .iter()
                .copied()
                .filter(move |k| state.slot(*k).status == status)
        };
        with_status(SlotStatus::Unknown)
            .chain(with_status(SlotStatus::Asked))
            .take(MAX_SLOTS_PER_QUESTION)
            .collect()
    }
}
