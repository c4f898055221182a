use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use super::{
    BackendError, BackendProfile, GenerationBackend, GroundingRef, Instruction, PromptBundle,
};
use crate::consult::SlotKey;
use crate::knowledge::ChunkKind;
use crate::locale::Locale;

/// Deterministic offline backend. Follow-ups echo the template question;
/// conclusions fill a fixed four-section template from the grounding refs.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: AtomicUsize,
    failing: AtomicBool,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of `generate` calls so far, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// While set, every call fails with a retriable transport error.
    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }
}

impl GenerationBackend for MockBackend {
    fn profile(&self) -> BackendProfile {
        BackendProfile::Mock
    }

    fn generate(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failing.load(Ordering::SeqCst) {
            return Err(BackendError::Transport {
                message: "mock backend set to fail".into(),
                retriable: true,
            });
        }
        let text = match &bundle.instruction {
            Instruction::AskFollowUp { question, .. } => question.clone(),
            Instruction::ConcludeWithSummary {
                chief_complaint,
                findings,
            } => match bundle.locale {
                Locale::Zh => conclude_zh(chief_complaint, findings, &bundle.grounding),
                Locale::En => conclude_en(chief_complaint, findings, &bundle.grounding),
            },
        };
        if text.trim().is_empty() {
            return Err(BackendError::EmptyGeneration);
        }
        Ok(text)
    }
}

/// Distinct disease tags in rank order, at most two.
fn top_diseases(refs: &[GroundingRef]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in refs {
        if !out.contains(&r.disease.as_str()) {
            out.push(&r.disease);
        }
        if out.len() == 2 {
            break;
        }
    }
    out
}

/// First ref of `kind` belonging to one of the cited diseases, in citation order.
fn pick<'a>(refs: &'a [GroundingRef], kind: ChunkKind, cited: &[&str]) -> Option<&'a GroundingRef> {
    cited
        .iter()
        .find_map(|tag| refs.iter().find(|r| r.kind == kind && r.disease == *tag))
}

fn first_sentence(text: &str) -> &str {
    match text.find(['。', '.']) {
        Some(i) => &text[..i + text[i..].chars().next().map_or(0, char::len_utf8)],
        None => text,
    }
}

fn conclude_zh(chief: &str, findings: &[(SlotKey, String)], refs: &[GroundingRef]) -> String {
    let tags = top_diseases(refs);
    let mut s = String::from("病情分析:\n");
    s.push_str(&format!("您描述的情况是“{chief}”"));
    if !findings.is_empty() {
        let values: Vec<&str> = findings.iter().map(|(_, v)| v.as_str()).collect();
        s.push_str(&format!(", 表现为{}", values.join("、")));
    }
    match tags.as_slice() {
        [] => s.push_str(", 目前资料有限, 需结合进一步检查判断原因。"),
        [a] => s.push_str(&format!(", 结合症状特点, 需考虑**{a}**的可能。")),
        [a, b, ..] => s.push_str(&format!(", 结合症状特点, 需考虑**{a}**或**{b}**的可能。")),
    }
    if let Some(desc) = pick(refs, ChunkKind::DiseaseDescription, &tags) {
        s.push_str(first_sentence(&desc.text));
    }
    s.push_str("\n\n检查建议:\n");
    match pick(refs, ChunkKind::ExaminationRecommendation, &tags) {
        Some(exam) => s.push_str(&exam.text),
        None => s.push_str("建议到医院相关专科就诊, 由医生查体后完善必要的检查, 以明确病因。"),
    }
    s.push_str("\n\n治疗建议:\n目前可先予对症处理:\n\n");
    match pick(refs, ChunkKind::MedicationGuideline, &tags) {
        Some(med) => s.push_str(&format!("- {}\n", med.text)),
        None => s.push_str("- 症状较轻时以观察和休息为主, 用药请在医生或药师指导下进行。\n"),
    }
    s.push_str("- 保持规律作息和清淡饮食, 避免辛辣、油腻和刺激性食物。\n");
    s.push_str("- 如症状持续不缓解, 及时复诊并在医生指导下调整方案, 留意药物副作用。\n");
    s.push_str("\n注意事项:\n\n");
    s.push_str("- 观察症状: 若出现疼痛加剧、发热、呕吐、便血或其他新发症状, 应立即就医。\n");
    s.push_str("- 生活方式: 保持心情放松, 避免过度劳累。");
    s
}

fn conclude_en(chief: &str, findings: &[(SlotKey, String)], refs: &[GroundingRef]) -> String {
    let tags = top_diseases(refs);
    let mut s = String::from("Symptom Analysis:\n");
    s.push_str(&format!("You described \"{chief}\""));
    if !findings.is_empty() {
        let values: Vec<&str> = findings.iter().map(|(_, v)| v.as_str()).collect();
        s.push_str(&format!(", with {}", values.join(", ")));
    }
    match tags.as_slice() {
        [] => s.push_str(". The information so far is limited, so further examination is needed."),
        [a] => s.push_str(&format!(
            ". Based on these features, **{a}** should be considered."
        )),
        [a, b, ..] => s.push_str(&format!(
            ". Based on these features, **{a}** or **{b}** should be considered."
        )),
    }
    s.push_str("\n\nPossible Causes:\n");
    if tags.is_empty() {
        s.push_str("- Several common conditions could explain these symptoms.\n");
    }
    for tag in &tags {
        match pick(refs, ChunkKind::DiseaseDescription, &[tag]) {
            Some(desc) => s.push_str(&format!("- **{tag}**: {}\n", first_sentence(&desc.text))),
            None => s.push_str(&format!("- **{tag}**\n")),
        }
    }
    s.push_str("\nRecommended Actions:\n");
    match pick(refs, ChunkKind::ExaminationRecommendation, &tags) {
        Some(exam) => s.push_str(&format!("- {}\n", exam.text)),
        None => s.push_str("- Recommend investigation at a clinic so a doctor can examine you.\n"),
    }
    match pick(refs, ChunkKind::MedicationGuideline, &tags) {
        Some(med) => s.push_str(&format!("- {}\n", med.text)),
        None => {
            s.push_str("- Rest, stay hydrated and use medication only under medical guidance.\n")
        }
    }
    s.push_str("- Keep regular meals and sleep, and note any side effects of medication.\n");
    s.push_str("\nUrgent Notes:\n");
    s.push_str(
        "- Seek immediate medical attention if the pain becomes severe or new symptoms appear.",
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gref(id: &str, disease: &str, kind: ChunkKind, text: &str) -> GroundingRef {
        GroundingRef {
            chunk_id: id.into(),
            disease: disease.into(),
            kind,
            text: text.into(),
        }
    }

    fn conclude(locale: Locale, refs: Vec<GroundingRef>) -> PromptBundle {
        PromptBundle {
            system_text: String::new(),
            context_block: String::new(),
            history: vec![],
            instruction: Instruction::ConcludeWithSummary {
                chief_complaint: "右下腹部有时候有点痛".into(),
                findings: vec![(SlotKey::Quality, "钝痛".into())],
            },
            locale,
            grounding: refs,
        }
    }

    #[test]
    fn zh_conclusion_cites_top_disease() {
        let refs = vec![
            gref(
                "a",
                "慢性阑尾炎",
                ChunkKind::DiseaseDescription,
                "慢性阑尾炎多表现为右下腹痛。尾句。",
            ),
            gref("b", "肠易激综合征", ChunkKind::DiseaseDescription, "x"),
        ];
        let m = MockBackend::new();
        let text = m.generate(&conclude(Locale::Zh, refs)).unwrap();
        assert!(text.contains("病情分析"));
        assert!(text.contains("**慢性阑尾炎**"));
        assert!(text.contains("**肠易激综合征**"));
        assert!(text.contains("慢性阑尾炎多表现为右下腹痛。"));
        assert!(!text.contains("尾句"));
        assert_eq!(m.calls(), 1);
    }

    #[test]
    fn follow_up_echoes_question() {
        let b = PromptBundle {
            instruction: Instruction::AskFollowUp {
                slots: vec![SlotKey::Quality],
                question: "疼痛的性质?".into(),
            },
            ..conclude(Locale::Zh, vec![])
        };
        assert_eq!(MockBackend::new().generate(&b).unwrap(), "疼痛的性质?");
    }

    #[test]
    fn failing_mock_is_retriable() {
        let m = MockBackend::new();
        m.set_failing(true);
        assert!(m
            .generate(&conclude(Locale::En, vec![]))
            .unwrap_err()
            .retriable());
        assert_eq!(m.calls(), 1);
    }

    #[test]
    fn output_is_deterministic() {
        let refs = vec![gref(
            "a",
            "migraine",
            ChunkKind::DiseaseDescription,
            "Migraine hurts. More.",
        )];
        let m = MockBackend::new();
        let a = m.generate(&conclude(Locale::En, refs.clone())).unwrap();
        let b = m.generate(&conclude(Locale::En, refs)).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("**migraine**: Migraine hurts."));
    }
}
