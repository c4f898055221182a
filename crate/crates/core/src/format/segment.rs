use super::{Section, SectionId};
use crate::locale::Locale;

const ALIASES: &[(&str, SectionId)] = &[
    ("问诊", SectionId::Inquiry),
    ("病情分析", SectionId::SymptomAnalysis),
    ("可能原因", SectionId::PossibleCauses),
    ("检查建议", SectionId::RecommendedActions),
    ("治疗建议", SectionId::RecommendedActions),
    ("注意事项", SectionId::UrgentNotes),
    ("紧急提示", SectionId::UrgentNotes),
    ("inquiry", SectionId::Inquiry),
    ("symptom analysis", SectionId::SymptomAnalysis),
    ("possible causes", SectionId::PossibleCauses),
    ("recommended actions", SectionId::RecommendedActions),
    ("urgent notes", SectionId::UrgentNotes),
];

pub(super) fn clean_heading(line: &str) -> &str {
    let t = line
        .trim()
        .trim_start_matches('#')
        .trim()
        .trim_matches('*')
        .trim();
    let t = t
        .strip_suffix(':')
        .or_else(|| t.strip_suffix('：'))
        .unwrap_or(t);
    t.trim_matches('*').trim()
}

/// The section a heading line opens. A heading is a known alias alone on its
/// line, optionally wrapped in `#` or `**` and followed by a colon.
pub fn heading_id(line: &str) -> Option<SectionId> {
    let name = clean_heading(line).to_lowercase();
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map(|(_, id)| *id)
}

fn bullet_text(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let mut chars = t.chars();
    let marker = chars.next()?;
    if !matches!(marker, '-' | '*' | '•') {
        return None;
    }
    let rest = chars.as_str();
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

fn bullets_of(body: &str) -> Vec<String> {
    body.lines()
        .filter_map(bullet_text)
        .map(str::to_string)
        .collect()
}

/// Splits `raw` at heading lines. Text before the first heading becomes an
/// `Other` section. Concatenating every `heading_text` and `body` in order
/// gives back `raw` exactly.
pub fn segment(raw: &str, _locale: Locale) -> Vec<Section> {
    let mut sections = Vec::new();
    let mut current = Section {
        id: SectionId::Other,
        heading_text: String::new(),
        body: String::new(),
        bullets: vec![],
    };
    for line in raw.split_inclusive('\n') {
        match heading_id(line) {
            Some(id) => {
                let done = std::mem::replace(
                    &mut current,
                    Section {
                        id,
                        heading_text: line.to_string(),
                        body: String::new(),
                        bullets: vec![],
                    },
                );
                if !(done.heading_text.is_empty() && done.body.is_empty()) {
                    sections.push(done);
                }
            }
            None => current.body.push_str(line),
        }
    }
    sections.push(current);
    for s in &mut sections {
        s.bullets = bullets_of(&s.body);
    }
    sections
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_text_is_one_other_section() {
        let s = segment("hello", Locale::En);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, SectionId::Other);
        assert_eq!(s[0].body, "hello");
        assert!(s[0].bullets.is_empty());
    }

    #[test]
    fn heading_variants() {
        for line in [
            "病情分析:",
            "病情分析：",
            "**病情分析**:",
            "## 病情分析",
            "病情分析\n",
            "Symptom Analysis:",
        ] {
            assert_eq!(heading_id(line), Some(SectionId::SymptomAnalysis), "{line}");
        }
        assert_eq!(heading_id("病情分析: 右下腹"), None);
        assert_eq!(heading_id("- 饮食方面:**"), None);
    }

    #[test]
    fn bullets_need_marker_and_space() {
        let s = segment("- a\n* b\n• c\n**bold**\n-x\n  - d", Locale::Zh);
        assert_eq!(s[0].bullets, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn segmentation_is_lossless() {
        let raw = "intro\n问诊:\n您说头痛\n\n治疗建议:\n- x\n";
        let s = segment(raw, Locale::Zh);
        let joined: String = s
            .iter()
            .flat_map(|x| [x.heading_text.as_str(), x.body.as_str()])
            .collect();
        assert_eq!(joined, raw);
        assert_eq!(
            s.iter().map(|x| x.id).collect::<Vec<_>>(),
            [
                SectionId::Other,
                SectionId::Inquiry,
                SectionId::RecommendedActions
            ]
        );
        assert_eq!(s[2].title(), "治疗建议");
    }
}
