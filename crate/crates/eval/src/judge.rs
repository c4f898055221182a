use std::time::Duration;

use serde_json::json;

use crate::runner::CaseRun;
use crate::suite::TestCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgedDimension {
    PatientFriendliness,
    Professionalism,
}

impl JudgedDimension {
    fn rubric(self) -> &'static str {
        match self {
            JudgedDimension::PatientFriendliness => {
                "Patient-friendliness: is the assistant empathetic and patient-centered, using plain language the patient can follow?"
            }
            JudgedDimension::Professionalism => {
                "Professionalism: does the assistant show sound medical knowledge, with accurate analysis and appropriate recommendations?"
            }
        }
    }
}

/// Scores a transcript on a subjective dimension, returning a value in [0, 1].
pub trait Judge: Send + Sync {
    fn rate(
        &self,
        dimension: JudgedDimension,
        case: &TestCase,
        run: &CaseRun,
    ) -> Result<f64, String>;
}

/// A judge model behind an OpenAI-style chat-completion endpoint. The model is
/// asked for an integer from 0 to 10.
pub struct HttpJudge {
    url: String,
    model: String,
    agent: ureq::Agent,
}

impl HttpJudge {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.to_string(),
            model: "default".into(),
            agent,
        }
    }

    pub fn with_model(mut self, model: &str) -> Self {
        self.model = model.to_string();
        self
    }
}

pub(crate) fn transcript_text(case: &TestCase, run: &CaseRun) -> String {
    let mut out = String::new();
    for (user, turn) in case.script.iter().zip(&run.turns) {
        out.push_str("Patient: ");
        out.push_str(user);
        out.push_str("\nAssistant: ");
        out.push_str(&turn.response.plain_text());
        out.push_str("\n\n");
    }
    out
}

/// First integer in `text`, scaled from 0..=10 to 0..=1.
pub fn parse_rating(text: &str) -> Option<f64> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let n: u32 = digits.parse().ok()?;
    (n <= 10).then(|| f64::from(n) / 10.0)
}

impl Judge for HttpJudge {
    fn rate(
        &self,
        dimension: JudgedDimension,
        case: &TestCase,
        run: &CaseRun,
    ) -> Result<f64, String> {
        let prompt = format!(
            "{}\nRate the consultation below from 0 (worst) to 10 (best). Reply with the number only.\n\n{}",
            dimension.rubric(),
            transcript_text(case, run)
        );
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let value: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or("judge reply has no content")?;
        parse_rating(content).ok_or_else(|| format!("judge reply has no 0-10 rating: {content:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::parse_rating;

    #[test]
    fn ratings() {
        assert_eq!(parse_rating("8"), Some(0.8));
        assert_eq!(parse_rating("Score: 10/10"), Some(1.0));
        assert_eq!(parse_rating("0"), Some(0.0));
        assert_eq!(parse_rating("eleven"), None);
        assert_eq!(parse_rating("42"), None);
    }
}
