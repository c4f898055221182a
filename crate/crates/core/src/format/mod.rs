//! Structured formatting of model output: section segmentation, keyword
//! highlighting and rendering to JSON, HTML or ANSI text.

mod highlight;
mod render;
mod segment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::locale::Locale;
use crate::safety::split_disclaimer;

pub use highlight::{tag_keywords, HighlightLexicon, HighlightLexiconError};
pub use render::{render, RenderTarget, STYLESHEET};
pub use segment::{heading_id, segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionId {
    Inquiry,
    SymptomAnalysis,
    PossibleCauses,
    RecommendedActions,
    UrgentNotes,
    Other,
}

impl SectionId {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionId::Inquiry => "inquiry",
            SectionId::SymptomAnalysis => "symptom_analysis",
            SectionId::PossibleCauses => "possible_causes",
            SectionId::RecommendedActions => "recommended_actions",
            SectionId::UrgentNotes => "urgent_notes",
            SectionId::Other => "other",
        }
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One segment of a response. `heading_text` is the heading line exactly as it
/// appeared, line break included, and is empty for leading text without a heading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub id: SectionId,
    pub heading_text: String,
    pub body: String,
    pub bullets: Vec<String>,
}

impl Section {
    /// The heading without markup, colon or line break.
    pub fn title(&self) -> &str {
        segment::clean_heading(&self.heading_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighlightCategory {
    HighRisk,
    Warning,
}

/// A keyword occurrence. Offsets count chars in the section body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub section_index: usize,
    pub start: usize,
    pub end: usize,
    pub category: HighlightCategory,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("a formatted response needs a non-empty disclaimer")]
    MissingDisclaimer,
    #[error("invalid highlight span: {0}")]
    InvalidSpan(String),
    #[error("unknown render target `{0}`")]
    UnknownTarget(String),
}

#[derive(Deserialize)]
struct RawResponse {
    sections: Vec<Section>,
    highlights: Vec<HighlightSpan>,
    disclaimer: String,
    locale: Locale,
}

/// A fully formatted assistant message. Construction checks that the disclaimer
/// is present and every span fits its section without overlapping another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawResponse")]
pub struct FormattedResponse {
    sections: Vec<Section>,
    highlights: Vec<HighlightSpan>,
    disclaimer: String,
    locale: Locale,
}

impl TryFrom<RawResponse> for FormattedResponse {
    type Error = FormatError;

    fn try_from(r: RawResponse) -> Result<Self, Self::Error> {
        Self::new(r.sections, r.highlights, r.disclaimer, r.locale)
    }
}

impl FormattedResponse {
    pub fn new(
        sections: Vec<Section>,
        highlights: Vec<HighlightSpan>,
        disclaimer: String,
        locale: Locale,
    ) -> Result<Self, FormatError> {
        if disclaimer.trim().is_empty() {
            return Err(FormatError::MissingDisclaimer);
        }
        let lens: Vec<usize> = sections.iter().map(|s| s.body.chars().count()).collect();
        for (i, h) in highlights.iter().enumerate() {
            let Some(&len) = lens.get(h.section_index) else {
                return Err(FormatError::InvalidSpan(format!(
                    "span {i} names missing section {}",
                    h.section_index
                )));
            };
            if h.start >= h.end || h.end > len {
                return Err(FormatError::InvalidSpan(format!(
                    "span {i} [{}, {}) outside 0..{len}",
                    h.start, h.end
                )));
            }
            let overlaps = highlights[..i]
                .iter()
                .any(|o| o.section_index == h.section_index && o.start < h.end && h.start < o.end);
            if overlaps {
                return Err(FormatError::InvalidSpan(format!(
                    "span {i} overlaps an earlier span"
                )));
            }
        }
        Ok(Self {
            sections,
            highlights,
            disclaimer,
            locale,
        })
    }

    /// Segments and tags `text`, which must end with a known disclaimer.
    pub fn from_text(
        text: &str,
        locale: Locale,
        lexicon: &HighlightLexicon,
    ) -> Result<Self, FormatError> {
        let (body, disclaimer, _) = split_disclaimer(text).ok_or(FormatError::MissingDisclaimer)?;
        let sections = if body.is_empty() {
            Vec::new()
        } else {
            segment(body, locale)
        };
        let highlights = tag_keywords(&sections, lexicon);
        Self::new(sections, highlights, disclaimer.to_string(), locale)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn highlights(&self) -> &[HighlightSpan] {
        &self.highlights
    }

    pub fn disclaimer(&self) -> &str {
        &self.disclaimer
    }

    pub fn locale(&self) -> Locale {
        self.locale
    }

    pub fn section(&self, id: SectionId) -> Option<&Section> {
        self.sections.iter().find(|s| s.id == id)
    }

    /// The original text: headings and bodies in order, then the disclaimer.
    pub fn plain_text(&self) -> String {
        let mut s: String = self
            .sections
            .iter()
            .flat_map(|x| [x.heading_text.as_str(), x.body.as_str()])
            .collect();
        if !s.is_empty() {
            s.push_str("\n\n");
        }
        s.push_str(&self.disclaimer);
        s
    }
}

impl FromStr for RenderTarget {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(RenderTarget::Json),
            "html" => Ok(RenderTarget::Html),
            "ansi" => Ok(RenderTarget::Ansi),
            _ => Err(FormatError::UnknownTarget(s.to_string())),
        }
    }
}
