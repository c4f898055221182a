use std::collections::BTreeMap;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::Deserialize;

use super::{SlotKey, SlotMap, SlotState};
use crate::lexmatch::PatternSet;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("reading lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad pattern `{pattern}` for slot {slot}: {source}")]
    Pattern {
        slot: SlotKey,
        pattern: String,
        source: Box<regex::Error>,
    },
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
struct SlotPatternsFile {
    #[serde(default)]
    fill: Vec<String>,
    #[serde(default)]
    deny: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct OverrideFile {
    name: String,
    complaint_patterns: Vec<String>,
    priority: Vec<SlotKey>,
}

#[derive(Debug, Deserialize)]
struct LexiconFile {
    priority: Vec<SlotKey>,
    #[serde(default)]
    overrides: Vec<OverrideFile>,
    #[serde(default)]
    negations: Vec<String>,
    slots: BTreeMap<SlotKey, SlotPatternsFile>,
}

#[derive(Debug, Clone)]
struct PriorityOverride {
    name: String,
    complaint: PatternSet<()>,
    priority: Vec<SlotKey>,
}

/// Keyword patterns used to pull slot values out of free-text answers.
#[derive(Debug, Clone)]
pub struct SlotLexicon {
    fill: Vec<(SlotKey, Regex)>,
    deny: Vec<(SlotKey, Regex)>,
    negations: Vec<String>,
    priority: Vec<SlotKey>,
    overrides: Vec<PriorityOverride>,
}

/// Result of scanning one answer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    /// Only slots the text gives evidence for.
    pub slots: SlotMap,
    /// The whole answer is a bare negation ("没有", "no") that the caller must
    /// resolve against the most recently asked slots.
    pub bare_negation: bool,
}

fn complete_ladder(order: &[SlotKey], what: &str) -> Result<(), LexiconError> {
    let mut seen: Vec<SlotKey> = order.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != order.len() || seen.len() != SlotKey::ALL.len() {
        return Err(LexiconError::Invalid(format!(
            "{what} must list every slot exactly once"
        )));
    }
    Ok(())
}

fn normalize_negation(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_whitespace() && !c.is_ascii_punctuation() && !is_cjk_punct(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

fn is_cjk_punct(c: char) -> bool {
    matches!(
        c,
        '，' | '。' | '、' | '；' | '：' | '！' | '？' | '…' | '～' | '“' | '”' | '（' | '）'
    )
}

impl SlotLexicon {
    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile = serde_json::from_str(json)?;
        complete_ladder(&file.priority, "priority")?;
        let compile = |slot: SlotKey, pattern: &str| {
            RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| LexiconError::Pattern {
                    slot,
                    pattern: pattern.to_string(),
                    source: Box::new(e),
                })
        };
        let mut fill = Vec::new();
        let mut deny = Vec::new();
        for (&slot, patterns) in &file.slots {
            for p in &patterns.fill {
                fill.push((slot, compile(slot, p)?));
            }
            for p in &patterns.deny {
                deny.push((slot, compile(slot, p)?));
            }
        }
        let mut overrides = Vec::new();
        for o in file.overrides {
            complete_ladder(&o.priority, &format!("override `{}`", o.name))?;
            let mut complaint = PatternSet::new();
            for p in &o.complaint_patterns {
                complaint.insert(p, ());
            }
            overrides.push(PriorityOverride {
                name: o.name,
                complaint,
                priority: o.priority,
            });
        }
        Ok(Self {
            fill,
            deny,
            negations: file
                .negations
                .iter()
                .map(|n| normalize_negation(n))
                .filter(|n| !n.is_empty())
                .collect(),
            priority: file.priority,
            overrides,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    /// The lexicon shipped with the crate (headache and abdominal-pain families).
    pub fn shipped() -> Self {
        Self::from_json(crate::fixtures::SLOT_LEXICON).expect("shipped slot lexicon is valid")
    }

    /// Question priority for a chief complaint: the first override whose
    /// complaint patterns match, else the default ladder.
    pub fn priority_for(&self, chief_complaint: &str) -> &[SlotKey] {
        self.overrides
            .iter()
            .find(|o| o.complaint.is_match(chief_complaint))
            .map(|o| o.priority.as_slice())
            .unwrap_or(&self.priority)
    }

    /// Name of the override applied to a complaint, if any.
    pub fn override_name(&self, chief_complaint: &str) -> Option<&str> {
        self.overrides
            .iter()
            .find(|o| o.complaint.is_match(chief_complaint))
            .map(|o| o.name.as_str())
    }

    /// Scans an answer for slot evidence. `round` is recorded on every slot found.
    ///
    /// Deny patterns are applied first and mask their spans; fill patterns then
    /// run over the rest. Within one answer a Filled result beats a Denied one
    /// for the same slot, and each slot keeps its leftmost value.
    pub fn extract(&self, text: &str, round: u32) -> Extraction {
        let mut out = Extraction::default();
        let text = text.trim();
        if text.is_empty() {
            return out;
        }
        let normalized = normalize_negation(text);
        if !normalized.is_empty() && self.negations.contains(&normalized) {
            out.bare_negation = true;
            return out;
        }

        let mut taken: Vec<(usize, usize)> = Vec::new();
        let overlaps = |taken: &[(usize, usize)], s: usize, e: usize| {
            taken.iter().any(|&(a, b)| s < b && a < e)
        };

        let deny_hits = collect_hits(&self.deny, text);
        let mut denied: Vec<SlotKey> = Vec::new();
        for (slot, s, e) in deny_hits {
            if overlaps(&taken, s, e) {
                continue;
            }
            taken.push((s, e));
            if !denied.contains(&slot) {
                denied.push(slot);
            }
        }

        let fill_hits = collect_hits(&self.fill, text);
        for (slot, s, e) in fill_hits {
            if overlaps(&taken, s, e) {
                continue;
            }
            taken.push((s, e));
            out.slots
                .entry(slot)
                .or_insert_with(|| SlotState::filled(slot, &text[s..e], round));
        }
        for slot in denied {
            out.slots
                .entry(slot)
                .or_insert_with(|| SlotState::denied(slot, round));
        }
        out
    }
}

/// All regex hits, ordered by start then longer first.
fn collect_hits(patterns: &[(SlotKey, Regex)], text: &str) -> Vec<(SlotKey, usize, usize)> {
    let mut hits: Vec<(SlotKey, usize, usize)> = patterns
        .iter()
        .flat_map(|(slot, re)| {
            re.find_iter(text)
                .filter(|m| !m.as_str().trim().is_empty())
                .map(move |m| (*slot, m.start(), m.end()))
        })
        .collect();
    hits.sort_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)));
    hits
}
