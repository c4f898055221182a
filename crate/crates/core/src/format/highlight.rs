use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{HighlightCategory, HighlightSpan, Section};
use crate::lexmatch::PatternSet;
use crate::locale::Locale;

#[derive(Debug, thiserror::Error)]
pub enum HighlightLexiconError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing highlight lexicon: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Deserialize)]
struct LocaleKeywords {
    #[serde(default)]
    high_risk: Vec<String>,
    #[serde(default)]
    warning: Vec<String>,
}

/// Highlight keywords of every locale in one case-insensitive set.
#[derive(Debug, Clone, Default)]
pub struct HighlightLexicon {
    set: PatternSet<HighlightCategory>,
}

impl HighlightLexicon {
    pub fn from_json(json: &str) -> Result<Self, HighlightLexiconError> {
        let by_locale: BTreeMap<Locale, LocaleKeywords> = serde_json::from_str(json)?;
        let mut lex = Self::default();
        for kw in by_locale.values() {
            for p in &kw.high_risk {
                lex.insert(p, HighlightCategory::HighRisk);
            }
            for p in &kw.warning {
                lex.insert(p, HighlightCategory::Warning);
            }
        }
        Ok(lex)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HighlightLexiconError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| HighlightLexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn shipped() -> Self {
        Self::from_json(crate::fixtures::HIGHLIGHT_LEXICON)
            .expect("shipped highlight lexicon is valid")
    }

    pub fn insert(&mut self, keyword: &str, category: HighlightCategory) -> bool {
        self.set.insert(keyword, category)
    }

    pub fn keywords(&self) -> impl Iterator<Item = (&str, HighlightCategory)> {
        self.set.patterns().map(|(p, c)| (p, *c))
    }
}

/// Tags keyword occurrences in every section body. Among overlapping candidates
/// the longer match wins, then the earlier one, then HighRisk over Warning.
pub fn tag_keywords(sections: &[Section], lexicon: &HighlightLexicon) -> Vec<HighlightSpan> {
    let mut out = Vec::new();
    for (section_index, section) in sections.iter().enumerate() {
        let mut candidates: Vec<HighlightSpan> = lexicon
            .set
            .all_matches(&section.body)
            .into_iter()
            .map(|m| HighlightSpan {
                section_index,
                start: m.start,
                end: m.end,
                category: *m.value,
                keyword: m.slice(&section.body).to_string(),
            })
            .collect();
        candidates.sort_by(|a, b| {
            (b.end - b.start)
                .cmp(&(a.end - a.start))
                .then(a.start.cmp(&b.start))
                .then(a.category.cmp(&b.category))
        });
        let mut accepted: Vec<HighlightSpan> = Vec::new();
        for c in candidates {
            if !accepted.iter().any(|a| a.start < c.end && c.start < a.end) {
                accepted.push(c);
            }
        }
        accepted.sort_by_key(|s| s.start);
        out.extend(accepted);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::SectionId;

    fn sec(body: &str) -> Section {
        Section {
            id: SectionId::Other,
            heading_text: String::new(),
            body: body.into(),
            bullets: vec![],
        }
    }

    #[test]
    fn immediate_care_is_high_risk() {
        let spans = tag_keywords(
            &[sec("若出现疼痛加剧、发热, 应立即就医")],
            &HighlightLexicon::shipped(),
        );
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].keyword, "立即就医");
        assert_eq!(spans[0].category, HighlightCategory::HighRisk);
    }

    #[test]
    fn empty_input_no_spans() {
        assert!(tag_keywords(&[], &HighlightLexicon::shipped()).is_empty());
    }

    #[test]
    fn longer_match_then_high_risk_wins() {
        let mut lex = HighlightLexicon::default();
        lex.insert("pain", HighlightCategory::Warning);
        lex.insert("chest pain", HighlightCategory::HighRisk);
        lex.insert("rash", HighlightCategory::Warning);
        lex.insert("rash", HighlightCategory::HighRisk);
        let spans = tag_keywords(&[sec("Chest pain and rash")], &lex);
        assert_eq!(spans.len(), 2);
        assert_eq!(
            (spans[0].start, spans[0].end, spans[0].keyword.as_str()),
            (0, 10, "Chest pain")
        );
        assert_eq!(spans[1].category, HighlightCategory::HighRisk);
    }
}
