use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{ConsultError, LexiconError, SlotKey};
use crate::locale::Locale;

#[derive(Debug, Clone, Deserialize)]
struct LocaleTemplates {
    preamble: String,
    closing: String,
    supplementary: String,
    slots: BTreeMap<SlotKey, String>,
}

/// Follow-up question templates keyed by (slot, locale).
#[derive(Debug, Clone)]
pub struct QuestionTemplates {
    by_locale: BTreeMap<Locale, LocaleTemplates>,
}

impl QuestionTemplates {
    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let by_locale: BTreeMap<Locale, LocaleTemplates> = serde_json::from_str(json)?;
        for locale in Locale::ALL {
            let t = by_locale.get(&locale).ok_or_else(|| {
                LexiconError::Invalid(format!("templates missing locale {locale}"))
            })?;
            if let Some(missing) = SlotKey::ALL.iter().find(|k| !t.slots.contains_key(k)) {
                return Err(LexiconError::Invalid(format!(
                    "templates for {locale} missing slot {missing}"
                )));
            }
        }
        Ok(Self { by_locale })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn shipped() -> Self {
        Self::from_json(crate::fixtures::QUESTION_TEMPLATES).expect("shipped templates are valid")
    }

    fn locale(&self, locale: Locale) -> &LocaleTemplates {
        // every locale is checked at load time
        &self.by_locale[&locale]
    }

    /// One question covering `slots`, opened with the chief complaint. With
    /// `closing` set the invitation to reply "没有了" / "nothing else" is appended.
    pub fn question_for(
        &self,
        slots: &[SlotKey],
        chief_complaint: &str,
        locale: Locale,
        closing: bool,
    ) -> Result<String, ConsultError> {
        if slots.is_empty() {
            return Err(ConsultError::Validation(
                "question_for needs at least one slot".into(),
            ));
        }
        let t = self.locale(locale);
        let body: Vec<&str> = slots.iter().map(|k| t.slots[k].as_str()).collect();
        Ok(self.compose(t, &body.join(" "), chief_complaint, closing))
    }

    /// The open question used once every slot is resolved but more rounds are required.
    pub fn supplementary(&self, chief_complaint: &str, locale: Locale, closing: bool) -> String {
        let t = self.locale(locale);
        self.compose(t, &t.supplementary, chief_complaint, closing)
    }

    pub fn closing(&self, locale: Locale) -> &str {
        &self.locale(locale).closing
    }

    fn compose(
        &self,
        t: &LocaleTemplates,
        body: &str,
        chief_complaint: &str,
        closing: bool,
    ) -> String {
        let mut q = t.preamble.replace("{complaint}", chief_complaint.trim());
        q.push_str(body);
        if closing {
            q.push_str("\n\n");
            q.push_str(&t.closing);
        }
        q
    }
}
