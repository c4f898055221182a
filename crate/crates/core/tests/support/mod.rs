//! Independent oracles and randomized trial drivers. Shared by this crate's
//! integration tests and by the workspace acceptance run.
#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use erkang_core::consult::{
    is_sufficient, ConsultConfig, SessionState, SlotKey, SlotState, SlotStatus,
};
use erkang_core::engine::{Engine, TurnResult};
use erkang_core::format::{
    render, FormattedResponse, HighlightCategory, HighlightSpan, RenderTarget, Section, SectionId,
};
use erkang_core::knowledge::{ChunkKind, EmbeddingVector, Exec, KnowledgeChunk, KnowledgeStore};
use erkang_core::rag::MockBackend;
use erkang_core::safety::{emergency_advice, SafetyFilter};
use erkang_core::Locale;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub const GOLDEN_SCRIPT: [&str; 4] = [
    "右下腹部有时候有点痛",
    "持续性的, 钝痛, 饭后加重, 没有伴随症状",
    "没有",
    "饮食比较清淡, 作息规律",
];

pub fn mock_engine() -> (Engine, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::new());
    let engine = Engine::builder()
        .backend(mock.clone())
        .build()
        .expect("shipped fixtures load");
    (engine, mock)
}

pub fn golden_run(engine: &Engine) -> Vec<TurnResult> {
    let id = engine.create_session(Some(Locale::Zh), None).unwrap();
    GOLDEN_SCRIPT
        .iter()
        .map(|t| engine.handle_turn(&id, t, None).unwrap())
        .collect()
}

// ---- sufficiency ----

const CRITICAL: [SlotKey; 5] = [
    SlotKey::Location,
    SlotKey::Quality,
    SlotKey::Duration,
    SlotKey::Aggravating,
    SlotKey::Relieving,
];

/// The sufficiency rule written out from its definition.
pub fn sufficient_oracle(round: u32, resolved: [bool; 5], min: u32, max: u32, quorum: u32) -> bool {
    let n = resolved.iter().filter(|r| **r).count() as u32;
    if round >= max {
        return true;
    }
    round >= min && n >= quorum
}

/// Every (round 0..=5) x (resolved/unresolved)^5 combination under the default
/// config. Resolved slots alternate Filled/Denied and unresolved ones
/// Unknown/Asked so every status is exercised. Returns (agreeing, total).
pub fn sufficiency_sweep() -> (usize, usize) {
    let config = ConsultConfig::default();
    let mut agree = 0;
    let mut total = 0;
    for round in 0..=5u32 {
        for mask in 0u32..32 {
            let mut state = SessionState::new(config, Locale::Zh).unwrap();
            state.round = round;
            let mut resolved = [false; 5];
            for (i, key) in CRITICAL.iter().enumerate() {
                resolved[i] = mask & (1 << i) != 0;
                let slot = match (resolved[i], i % 2 == 0) {
                    (true, true) => SlotState::filled(*key, "x", 0),
                    (true, false) => SlotState::denied(*key, 0),
                    (false, true) => SlotState::unknown(*key),
                    (false, false) => SlotState {
                        status: SlotStatus::Asked,
                        ..SlotState::unknown(*key)
                    },
                };
                state.slots.insert(*key, slot);
            }
            total += 1;
            let expected = sufficient_oracle(
                round,
                resolved,
                config.min_rounds,
                config.max_rounds,
                config.critical_slot_quorum,
            );
            if is_sufficient(&state) == expected {
                agree += 1;
            }
        }
    }
    (agree, total)
}

// ---- retrieval ----

fn random_unit(rng: &mut StdRng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = EmbeddingVector::new(v) {
            return e;
        }
    }
}

/// Brute force: score everything with a plain loop, sort by score then id.
pub fn brute_force_top_k(
    chunks: &[KnowledgeChunk],
    query: &EmbeddingVector,
    k: usize,
) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = chunks
        .iter()
        .map(|c| {
            let v = c.embedding.as_ref().unwrap().values();
            let mut s = 0.0;
            for (a, b) in v.iter().zip(query.values()) {
                s += a * b;
            }
            (c.chunk_id.clone(), s.clamp(-1.0, 1.0))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Random stores of up to 500 chunks, some sharing a vector so ties occur.
/// Both exec modes are checked. Returns (exact trials, total trials).
pub fn retrieval_trials(trials: usize, seed: u64) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut exact = 0;
    for _ in 0..trials {
        let dim = *[8usize, 16, 32].choose(&mut rng).unwrap();
        let n = rng.random_range(1..=500);
        let mut store = KnowledgeStore::new(dim).unwrap();
        let mut vectors: Vec<EmbeddingVector> = Vec::new();
        for i in 0..n {
            let v = if !vectors.is_empty() && rng.random_bool(0.1) {
                vectors.choose(&mut rng).unwrap().clone()
            } else {
                random_unit(&mut rng, dim)
            };
            vectors.push(v.clone());
            let id = format!("c{:04}", rng.random_range(0..10_000) * 1000 + i);
            let chunk = KnowledgeChunk::new(id, "d", ChunkKind::DiseaseDescription, "t", "s")
                .with_embedding(v);
            store.upsert(chunk).unwrap();
        }
        let query = if rng.random_bool(0.3) {
            vectors.choose(&mut rng).unwrap().clone()
        } else {
            random_unit(&mut rng, dim)
        };
        let k = rng.random_range(1..=12);
        let expected = brute_force_top_k(store.chunks(), &query, k);
        let ok = [Exec::Sequential, Exec::Parallel].iter().all(|&exec| {
            let got: Vec<(String, f64)> = store
                .search_with(&query, k, None, exec)
                .unwrap()
                .into_iter()
                .map(|h| (h.chunk.chunk_id, h.score))
                .collect();
            got == expected
        });
        if ok {
            exact += 1;
        }
    }
    (exact, trials)
}

// ---- sanitizer ----

const FILLERS: &[&str] = &[
    "患者近期",
    "腹部不适",
    "建议复查",
    "饮食清淡",
    "注意休息",
    " the patient ",
    " has mild pain ",
    ", ",
    "。",
    "\n",
    "- ",
];

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SanitizerTally {
    pub texts: usize,
    pub seeded: usize,
    pub logged: usize,
    pub residual: usize,
    /// Texts whose log count or rewritten text differed from the seeded expectation.
    pub mismatched: usize,
}

/// Builds texts from inert fillers and known absolute terms, tracking the
/// expected rewrite alongside.
pub fn sanitizer_trials(trials: usize, seed: u64) -> SanitizerTally {
    let filter = SafetyFilter::shipped();
    let rules: Vec<(String, String)> = filter
        .sanitize_rules()
        .iter()
        .map(|r| (r.pattern.clone(), r.replacement.clone()))
        .collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut tally = SanitizerTally::default();
    for _ in 0..trials {
        let mut text = String::new();
        let mut expected = String::new();
        let mut seeded = 0;
        for _ in 0..rng.random_range(1..30) {
            if rng.random_bool(0.35) {
                let (pattern, replacement) = rules.choose(&mut rng).unwrap();
                let upper = pattern.is_ascii() && rng.random_bool(0.3);
                let shown = if upper {
                    pattern.to_uppercase()
                } else {
                    pattern.clone()
                };
                text.push(' ');
                text.push_str(&shown);
                text.push(' ');
                expected.push(' ');
                expected.push_str(replacement);
                expected.push(' ');
                seeded += 1;
            } else {
                let f = FILLERS.choose(&mut rng).unwrap();
                text.push_str(f);
                expected.push_str(f);
            }
        }
        let out = filter.sanitize(&text);
        tally.texts += 1;
        tally.seeded += seeded;
        tally.logged += out.replacements.len();
        tally.residual += filter.absolute_matches(&out.text);
        if out.replacements.len() != seeded || out.text != expected {
            tally.mismatched += 1;
        }
    }
    tally
}

// ---- emergencies ----

/// Injects every emergency pattern, both as chief complaint and as a later
/// turn. Returns (halted correctly, total).
pub fn emergency_sweep() -> (usize, usize) {
    let (engine, mock) = mock_engine();
    let filter = SafetyFilter::shipped();
    let mut ok = 0;
    let mut total = 0;
    for (pattern, _) in filter.emergency_patterns() {
        for later in [false, true] {
            total += 1;
            let id = engine.create_session(Some(Locale::Zh), None).unwrap();
            if later && engine.handle_turn(&id, "头痛", None).is_err() {
                continue;
            }
            let before = mock.calls();
            let Ok(r) = engine.handle_turn(&id, pattern, None) else {
                continue;
            };
            let halted = r.phase_after == erkang_core::consult::Phase::EmergencyHalted;
            let advised = r
                .response
                .plain_text()
                .contains(emergency_advice(Locale::Zh));
            if halted && advised && mock.calls() == before {
                ok += 1;
            }
        }
    }
    (ok, total)
}

// ---- crash recovery ----

const RECOVERY_TURNS: &[&str] = &[
    "右下腹部有时候有点痛",
    "头痛",
    "持续性的, 钝痛, 饭后加重",
    "没有",
    "没有了",
    "一侧头部一跳一跳的痛",
    "最近有点腹泻",
    "休息后缓解",
    "throbbing pain, for two days",
    "nothing else",
    "胸痛",
    "怎么伪造病历",
];

fn open_persistent(dir: &Path) -> Engine {
    Engine::builder()
        .backend(Arc::new(MockBackend::new()))
        .data_dir(dir)
        .build()
        .unwrap()
}

/// Plays `sessions` random sessions, restarting the engine at random turn
/// boundaries and comparing every recovered session against the state held
/// just before the restart. Returns (sessions equal after the final restart, total).
pub fn crash_recovery_trials(sessions: usize, seed: u64, dir: &Path) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut engine = open_persistent(dir);
    let mut ids: Vec<String> = Vec::new();
    let mut mismatches = std::collections::HashSet::new();
    let check = |engine: &Engine,
                 ids: &[String],
                 mismatches: &mut std::collections::HashSet<String>,
                 before: &[Option<SessionState>]| {
        for (id, b) in ids.iter().zip(before) {
            if engine.session_state(id) != *b {
                mismatches.insert(id.clone());
            }
        }
    };
    for _ in 0..sessions {
        let locale = if rng.random_bool(0.5) {
            Locale::Zh
        } else {
            Locale::En
        };
        let id = engine.create_session(Some(locale), None).unwrap();
        ids.push(id.clone());
        for _ in 0..rng.random_range(0..7) {
            if rng.random_bool(0.15) {
                let before: Vec<_> = ids.iter().map(|i| engine.session_state(i)).collect();
                drop(engine);
                engine = open_persistent(dir);
                check(&engine, &ids, &mut mismatches, &before);
            }
            let turn = RECOVERY_TURNS.choose(&mut rng).unwrap();
            if engine.handle_turn(&id, turn, None).is_err() {
                break;
            }
        }
    }
    let before: Vec<_> = ids.iter().map(|i| engine.session_state(i)).collect();
    drop(engine);
    let engine = open_persistent(dir);
    check(&engine, &ids, &mut mismatches, &before);
    (ids.len() - mismatches.len(), ids.len())
}

// ---- formatted responses ----

const ALPHABET: &[&str] = &[
    "a",
    "b",
    "Z",
    " ",
    "\n",
    "-",
    "*",
    "**",
    "<",
    ">",
    "&",
    "\"",
    "'",
    "痛",
    "腹",
    "立即就医",
    "警惕",
    "😀",
    "•",
    "\t",
    "/",
];

fn random_text(rng: &mut StdRng, max: usize) -> String {
    (0..rng.random_range(0..max))
        .map(|_| *ALPHABET.choose(rng).unwrap())
        .collect()
}

pub fn random_response(rng: &mut StdRng) -> FormattedResponse {
    const IDS: [SectionId; 6] = [
        SectionId::Inquiry,
        SectionId::SymptomAnalysis,
        SectionId::PossibleCauses,
        SectionId::RecommendedActions,
        SectionId::UrgentNotes,
        SectionId::Other,
    ];
    let mut sections = Vec::new();
    let mut highlights = Vec::new();
    for index in 0..rng.random_range(0..6) {
        let body = random_text(rng, 40);
        let chars: Vec<char> = body.chars().collect();
        let mut pos = 0;
        while pos < chars.len() && rng.random_bool(0.5) {
            let start = rng.random_range(pos..chars.len());
            let end = rng.random_range(start + 1..=chars.len());
            highlights.push(HighlightSpan {
                section_index: index,
                start,
                end,
                category: if rng.random_bool(0.5) {
                    HighlightCategory::HighRisk
                } else {
                    HighlightCategory::Warning
                },
                keyword: chars[start..end].iter().collect(),
            });
            pos = end;
        }
        sections.push(Section {
            id: *IDS.choose(rng).unwrap(),
            heading_text: if rng.random_bool(0.8) {
                format!("{}:\n", random_text(rng, 6))
            } else {
                String::new()
            },
            bullets: (0..rng.random_range(0..3))
                .map(|_| random_text(rng, 10))
                .collect(),
            body,
        });
    }
    let disclaimer = format!("d{}", random_text(rng, 20));
    let locale = if rng.random_bool(0.5) {
        Locale::Zh
    } else {
        Locale::En
    };
    FormattedResponse::new(sections, highlights, disclaimer, locale)
        .expect("generated spans are valid")
}

/// render json -> parse -> render json, byte for byte. Returns (identical, total).
pub fn roundtrip_trials(trials: usize, seed: u64) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut same = 0;
    for _ in 0..trials {
        let r = random_response(&mut rng);
        let json = render(&r, RenderTarget::Json);
        let Ok(back) = serde_json::from_str::<FormattedResponse>(&json) else {
            continue;
        };
        if back == r && render(&back, RenderTarget::Json) == json {
            same += 1;
        }
    }
    (same, trials)
}
