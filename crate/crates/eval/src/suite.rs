use std::path::{Path, PathBuf};

use erkang_core::consult::Phase;
use erkang_core::safety::EmergencySymptom;
use erkang_core::Locale;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot read suite {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

/// One scripted consultation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub case_id: String,
    pub locale: Locale,
    pub script: Vec<String>,
    #[serde(default)]
    pub expected_diagnosis_tags: Vec<String>,
    pub expected_phase: Phase,
    #[serde(default)]
    pub is_emergency: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_trigger: Option<EmergencySymptom>,
}

impl TestCase {
    fn validate(&self) -> Result<(), String> {
        if self.case_id.trim().is_empty() {
            return Err("case_id is empty".into());
        }
        if self.script.is_empty() || self.script.iter().any(|t| t.trim().is_empty()) {
            return Err(format!(
                "{}: script must be non-empty with no blank turns",
                self.case_id
            ));
        }
        if !self.expected_phase.is_terminal() {
            return Err(format!("{}: expected_phase must be terminal", self.case_id));
        }
        if self.is_emergency {
            if self.expected_trigger.is_none() {
                return Err(format!(
                    "{}: emergency case needs expected_trigger",
                    self.case_id
                ));
            }
            if self.expected_phase != Phase::EmergencyHalted {
                return Err(format!(
                    "{}: emergency case must expect emergency_halted",
                    self.case_id
                ));
            }
        }
        Ok(())
    }
}

/// Parses a JSONL suite. Blank lines and `#` comments are skipped; every other
/// line must be a valid case and case ids must be unique.
pub fn parse_suite(text: &str) -> Result<Vec<TestCase>, SuiteError> {
    let mut cases: Vec<TestCase> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let case: TestCase = serde_json::from_str(raw).map_err(|e| SuiteError::Invalid {
            line,
            message: e.to_string(),
        })?;
        case.validate()
            .map_err(|message| SuiteError::Invalid { line, message })?;
        if cases.iter().any(|c| c.case_id == case.case_id) {
            return Err(SuiteError::Invalid {
                line,
                message: format!("duplicate case_id {}", case.case_id),
            });
        }
        cases.push(case);
    }
    Ok(cases)
}

pub fn load_suite(path: &Path) -> Result<Vec<TestCase>, SuiteError> {
    let text = std::fs::read_to_string(path).map_err(|source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_suite(&text)
}
