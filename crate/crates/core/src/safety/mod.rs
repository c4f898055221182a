//! Layered protection: content screening, emergency detection and referral,
//! absolute-statement rewriting and disclaimers.

mod directory;
mod disclaimer;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consult::{EmergencyCheck, SlotMap, SlotStatus};
use crate::lexmatch::PatternSet;
use crate::locale::Locale;

pub use directory::{DirectoryError, EmergencyDirectory, EmergencyDirectoryEntry};
pub use disclaimer::{
    append_disclaimer, count_disclaimers, disclaimer_text, split_disclaimer, DisclaimerKind,
};

/// The 120 referral advice, verbatim per locale.
pub fn emergency_advice(locale: Locale) -> &'static str {
    match locale {
        Locale::Zh => "请立即拨打120或前往最近的医院急诊科",
        Locale::En => "call 120 immediately or go to the nearest hospital emergency department",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCategory {
    SelfHarm,
    Violence,
    Illegal,
    Unethical,
}

/// Critical symptom class. Lexicon entries beyond the three built-in ones are
/// carried by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum EmergencySymptom {
    ChestPain,
    AcuteAbdominalPain,
    ImpairedConsciousness,
    Other(String),
}

impl From<String> for EmergencySymptom {
    fn from(s: String) -> Self {
        match s.as_str() {
            "chest_pain" => Self::ChestPain,
            "acute_abdominal_pain" => Self::AcuteAbdominalPain,
            "impaired_consciousness" => Self::ImpairedConsciousness,
            _ => Self::Other(s),
        }
    }
}

impl From<EmergencySymptom> for String {
    fn from(s: EmergencySymptom) -> Self {
        s.to_string()
    }
}

impl fmt::Display for EmergencySymptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ChestPain => f.write_str("chest_pain"),
            Self::AcuteAbdominalPain => f.write_str("acute_abdominal_pain"),
            Self::ImpairedConsciousness => f.write_str("impaired_consciousness"),
            Self::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmergencyTrigger {
    pub symptom: EmergencySymptom,
    /// The text that fired, as it appeared in the input.
    pub matched: String,
    pub locale: Locale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SafetyVerdict {
    Pass,
    Blocked {
        category: BlockCategory,
        matched: String,
    },
    Emergency {
        trigger: EmergencyTrigger,
    },
}

impl SafetyVerdict {
    pub fn tag(&self) -> VerdictTag {
        match self {
            SafetyVerdict::Pass => VerdictTag::Pass,
            SafetyVerdict::Blocked { .. } => VerdictTag::Blocked,
            SafetyVerdict::Emergency { .. } => VerdictTag::Emergency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictTag {
    Pass,
    Blocked,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCategory {
    #[default]
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizeRule {
    pub pattern: String,
    pub replacement: String,
    #[serde(default)]
    pub category: RuleCategory,
}

/// One rewrite performed by [`SafetyFilter::sanitize`]. `offset` is the char
/// offset of the match in the input text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub pattern: String,
    pub replacement: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sanitized {
    pub text: String,
    pub replacements: Vec<Replacement>,
}

/// Hook for an external content classifier consulted after the lexicon passes.
/// It returns a category and the offending substring.
pub trait ContentClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Option<(BlockCategory, String)>;
}

#[derive(Debug, thiserror::Error)]
pub enum SafetyError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing safety lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid safety lexicon: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
struct BlockedGroup {
    category: BlockCategory,
    patterns: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct EmergencyGroup {
    symptom: EmergencySymptom,
    locale: Locale,
    patterns: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SafetyLexiconFile {
    blocked: Vec<BlockedGroup>,
    emergency: Vec<EmergencyGroup>,
    sanitize: Vec<SanitizeRule>,
}

#[derive(Debug, Clone)]
struct EmergencyEntry {
    symptom: EmergencySymptom,
    locale: Locale,
}

/// Loaded, immutable safety tables. Cheap to share across threads.
pub struct SafetyFilter {
    blocked: PatternSet<BlockCategory>,
    // payload: index into `emergency_entries`; patterns inserted in lexicon order
    emergency: PatternSet<usize>,
    emergency_entries: Vec<EmergencyEntry>,
    sanitize: PatternSet<usize>,
    rules: Vec<SanitizeRule>,
    classifier: Option<Box<dyn ContentClassifier>>,
}

impl fmt::Debug for SafetyFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SafetyFilter")
            .field("blocked_patterns", &self.blocked.len())
            .field("emergency_patterns", &self.emergency.len())
            .field("sanitize_rules", &self.rules.len())
            .field("classifier", &self.classifier.is_some())
            .finish()
    }
}

impl SafetyFilter {
    pub fn from_json(json: &str) -> Result<Self, SafetyError> {
        let file: SafetyLexiconFile = serde_json::from_str(json)?;
        let mut blocked = PatternSet::new();
        for group in &file.blocked {
            for p in &group.patterns {
                blocked.insert(p, group.category);
            }
        }
        let mut emergency = PatternSet::new();
        let mut emergency_entries = Vec::new();
        for group in file.emergency {
            let idx = emergency_entries.len();
            for p in &group.patterns {
                emergency.insert(p, idx);
            }
            emergency_entries.push(EmergencyEntry {
                symptom: group.symptom,
                locale: group.locale,
            });
        }
        let mut sanitize = PatternSet::new();
        for (i, rule) in file.sanitize.iter().enumerate() {
            if !sanitize.insert(&rule.pattern, i) {
                return Err(SafetyError::Invalid(format!(
                    "sanitize rule {i} has an empty pattern"
                )));
            }
        }
        for rule in &file.sanitize {
            if let Some(m) = sanitize.leftmost_longest(&rule.replacement).first() {
                return Err(SafetyError::Invalid(format!(
                    "replacement `{}` matches pattern `{}`",
                    rule.replacement, m.pattern
                )));
            }
        }
        Ok(Self {
            blocked,
            emergency,
            emergency_entries,
            sanitize,
            rules: file.sanitize,
            classifier: None,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SafetyError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| SafetyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn shipped() -> Self {
        Self::from_json(crate::fixtures::SAFETY_LEXICON).expect("shipped safety lexicon is valid")
    }

    pub fn with_classifier(mut self, classifier: Box<dyn ContentClassifier>) -> Self {
        self.classifier = Some(classifier);
        self
    }

    pub fn sanitize_rules(&self) -> &[SanitizeRule] {
        &self.rules
    }

    /// Absolute-wording patterns, for the prudence rules embedded in prompts.
    pub fn absolute_terms(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.pattern.as_str())
    }

    /// Every emergency pattern with its symptom, in lexicon order.
    pub fn emergency_patterns(&self) -> impl Iterator<Item = (&str, &EmergencySymptom)> {
        self.emergency
            .patterns()
            .map(|(p, idx)| (p, &self.emergency_entries[*idx].symptom))
    }

    pub fn blocked_patterns(&self) -> impl Iterator<Item = (&str, BlockCategory)> {
        self.blocked.patterns().map(|(p, c)| (p, *c))
    }

    /// Screens user input. Emergency patterns take precedence over blocked
    /// categories; both scans are leftmost, longest match first.
    pub fn screen_input(&self, text: &str) -> SafetyVerdict {
        if let Some(m) = self.emergency.leftmost_longest(text).into_iter().next() {
            let entry = &self.emergency_entries[*m.value];
            return SafetyVerdict::Emergency {
                trigger: EmergencyTrigger {
                    symptom: entry.symptom.clone(),
                    matched: m.slice(text).to_string(),
                    locale: entry.locale,
                },
            };
        }
        if let Some(m) = self.blocked.leftmost_longest(text).into_iter().next() {
            return SafetyVerdict::Blocked {
                category: *m.value,
                matched: m.slice(text).to_string(),
            };
        }
        if let Some((category, matched)) = self.classifier.as_ref().and_then(|c| c.classify(text)) {
            let matched = if !matched.is_empty() && text.contains(&matched) {
                matched
            } else {
                text.to_string()
            };
            return SafetyVerdict::Blocked { category, matched };
        }
        SafetyVerdict::Pass
    }

    /// Looks for a critical symptom in `text` and in Filled slot values. The
    /// earliest lexicon pattern that occurs anywhere wins.
    pub fn detect_emergency(&self, text: &str, slots: &SlotMap) -> Option<EmergencyTrigger> {
        let values: Vec<&str> = slots
            .values()
            .filter(|s| s.status == SlotStatus::Filled)
            .filter_map(|s| s.value.as_deref())
            .collect();
        let found = std::iter::once(text)
            .chain(values.iter().copied())
            .filter_map(|haystack| {
                self.emergency.first_by_insertion_order(haystack).map(|m| {
                    (
                        self.pattern_rank(m.pattern),
                        *m.value,
                        m.slice(haystack).to_string(),
                    )
                })
            })
            .min_by_key(|(rank, _, _)| *rank)?;
        let entry = &self.emergency_entries[found.1];
        Some(EmergencyTrigger {
            symptom: entry.symptom.clone(),
            matched: found.2,
            locale: entry.locale,
        })
    }

    fn pattern_rank(&self, pattern: &str) -> usize {
        self.emergency
            .patterns()
            .position(|(p, _)| p == pattern)
            .unwrap_or(usize::MAX)
    }

    /// Rewrites absolute wording in a single left-to-right pass.
    pub fn sanitize(&self, text: &str) -> Sanitized {
        let mut out = String::with_capacity(text.len());
        let mut replacements = Vec::new();
        let mut last = 0;
        for m in self.sanitize.leftmost_longest(text) {
            let rule = &self.rules[*m.value];
            out.push_str(&text[last..m.byte_start]);
            out.push_str(&rule.replacement);
            last = m.byte_end;
            replacements.push(Replacement {
                pattern: rule.pattern.clone(),
                replacement: rule.replacement.clone(),
                offset: m.start,
            });
        }
        out.push_str(&text[last..]);
        Sanitized {
            text: out,
            replacements,
        }
    }

    /// Number of absolute-wording matches left in `text`.
    pub fn absolute_matches(&self, text: &str) -> usize {
        self.sanitize.leftmost_longest(text).len()
    }

    /// Number of blocked-lexicon matches in `text`.
    pub fn blocked_matches(&self, text: &str) -> usize {
        self.blocked.leftmost_longest(text).len()
    }

    /// Referral message for an emergency halt. A resolvable region adds the
    /// facility's contact details; an unresolvable one adds a lookup note.
    pub fn emergency_message(
        &self,
        trigger: &EmergencyTrigger,
        region_code: Option<&str>,
        directory: &EmergencyDirectory,
        locale: Locale,
    ) -> String {
        let advice = emergency_advice(locale);
        let mut msg = match locale {
            Locale::Zh => format!(
                "紧急提示:\n您提到的“{}”可能提示急症, 本次问诊已中止。{}。",
                trigger.matched, advice
            ),
            Locale::En => format!(
                "Urgent Notes:\nThe symptom you described (\"{}\") may indicate an emergency, so this consultation has stopped. Please {}.",
                trigger.matched, advice
            ),
        };
        match region_code.map(str::trim).filter(|r| !r.is_empty()) {
            None => {}
            Some(region) => match directory.lookup(region) {
                Some(entry) => {
                    msg.push('\n');
                    msg.push_str(&match locale {
                        Locale::Zh => format!(
                            "就近急诊: {}, 电话 {}, 地址 {}",
                            entry.facility_name, entry.phone, entry.address
                        ),
                        Locale::En => format!(
                            "Nearest emergency department: {}, phone {}, address {}",
                            entry.facility_name, entry.phone, entry.address
                        ),
                    });
                }
                None => {
                    msg.push('\n');
                    msg.push_str(match locale {
                        Locale::Zh => "未能查询到您所在地区的急诊联系方式, 请直接拨打120。",
                        Locale::En => "Local emergency contact lookup was unavailable for your region; please dial 120 directly.",
                    });
                }
            },
        }
        msg
    }

    /// Reply sent when input is blocked. It names no lexicon terms.
    pub fn refusal_message(&self, category: BlockCategory, locale: Locale) -> String {
        match (locale, category) {
            (Locale::Zh, BlockCategory::SelfHarm) => {
                "很抱歉, 我无法协助这个请求, 本次咨询已结束。如果您正处于危险之中或有伤害自身的想法, 请立即联系身边信任的人, 或拨打120寻求紧急帮助。".into()
            }
            (Locale::Zh, _) => "很抱歉, 您的请求超出了健康咨询的范围, 我无法协助, 本次咨询已结束。".into(),
            (Locale::En, BlockCategory::SelfHarm) => {
                "I'm sorry, I can't help with this request and this consultation has ended. If you are in danger or thinking about harming yourself, please reach out to someone you trust right away or dial 120 for urgent help.".into()
            }
            (Locale::En, _) => {
                "I'm sorry, this request is outside the scope of a health consultation and I can't help with it. This consultation has ended.".into()
            }
        }
    }
}

impl EmergencyCheck for SafetyFilter {
    fn check_slots(&self, slots: &SlotMap) -> Option<EmergencyTrigger> {
        self.detect_emergency("", slots)
    }
}
