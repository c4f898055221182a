use serde::{Deserialize, Serialize};

use crate::locale::Locale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisclaimerKind {
    /// Short banner after each follow-up question.
    MidDialogue,
    /// Full notice at the end of a conclusion, referral or refusal.
    Final,
}

pub fn disclaimer_text(kind: DisclaimerKind, locale: Locale) -> &'static str {
    match (kind, locale) {
        (DisclaimerKind::MidDialogue, Locale::Zh) => "-----内容由AI生成, 仅供参考-----",
        (DisclaimerKind::MidDialogue, Locale::En) => "-----AI-generated content, for reference only-----",
        (DisclaimerKind::Final, Locale::Zh) => "本AI分析仅供参考, 不能替代专业医疗诊断。如遇紧急情况, 请立即就医。",
        (DisclaimerKind::Final, Locale::En) => {
            "This AI analysis is for reference only and cannot replace professional medical diagnosis. Please seek immediate medical care in case of an emergency."
        }
    }
}

const SEPARATOR: &str = "\n\n";

fn all_disclaimers() -> impl Iterator<Item = (DisclaimerKind, Locale, &'static str)> {
    [DisclaimerKind::MidDialogue, DisclaimerKind::Final]
        .into_iter()
        .flat_map(|k| {
            Locale::ALL
                .into_iter()
                .map(move |l| (k, l, disclaimer_text(k, l)))
        })
}

/// Appends the disclaimer after a blank line. Text that already ends with
/// this exact disclaimer is returned unchanged.
pub fn append_disclaimer(text: &str, kind: DisclaimerKind, locale: Locale) -> String {
    let disclaimer = disclaimer_text(kind, locale);
    if text.ends_with(disclaimer) {
        return text.to_string();
    }
    let body = text.trim_end();
    if body.is_empty() {
        disclaimer.to_string()
    } else {
        format!("{body}{SEPARATOR}{disclaimer}")
    }
}

/// Splits a trailing disclaimer off `text`: `(body, disclaimer, kind)`.
pub fn split_disclaimer(text: &str) -> Option<(&str, &'static str, DisclaimerKind)> {
    all_disclaimers().find_map(|(kind, _, d)| {
        text.strip_suffix(d)
            .map(|body| (body.strip_suffix(SEPARATOR).unwrap_or(body), d, kind))
    })
}

/// Occurrences of any known disclaimer in `text`.
pub fn count_disclaimers(text: &str) -> usize {
    all_disclaimers()
        .map(|(_, _, d)| text.matches(d).count())
        .sum()
}
