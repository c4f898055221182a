mod support;

use erkang_core::format::{
    render, tag_keywords, HighlightCategory, HighlightLexicon, RenderTarget, Section, SectionId,
};
use erkang_core::knowledge::{
    load_kb_str, ChunkKind, EmbeddingVector, KnowledgeChunk, KnowledgeStore, SearchHit,
};
use erkang_core::rag::assemble_context;
use erkang_core::safety::EmergencyDirectory;
use erkang_core::{fixtures, Locale};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn sufficiency_matches_oracle_on_all_192_combinations() {
    assert_eq!(support::sufficiency_sweep(), (192, 192));
}

#[test]
fn retrieval_equals_brute_force() {
    let (exact, total) = support::retrieval_trials(1000, 11);
    assert_eq!(exact, total);
}

#[test]
fn sanitizer_removes_every_seeded_term() {
    let t = support::sanitizer_trials(1000, 23);
    assert_eq!(t.texts, 1000);
    assert!(t.seeded > 1000, "{t:?}");
    assert_eq!(t.residual, 0, "{t:?}");
    assert_eq!(t.logged, t.seeded, "{t:?}");
    assert_eq!(t.mismatched, 0, "{t:?}");
}

#[test]
fn json_round_trip_is_byte_identical() {
    assert_eq!(support::roundtrip_trials(1000, 5), (1000, 1000));
}

#[test]
fn shipped_knowledge_base_loads_cleanly() {
    let mut store = KnowledgeStore::default();
    let stats = load_kb_str(&mut store, fixtures::KNOWLEDGE_BASE).unwrap();
    assert!(stats.chunks_loaded >= 40, "{stats:?}");
    assert!(stats.diseases >= 10, "{stats:?}");
    assert_eq!(stats.rejected_lines, 0);
    assert!(store
        .chunks()
        .iter()
        .any(|c| c.kind == ChunkKind::GraphTriple));
}

#[test]
fn shipped_directory_resolves_chengdu() {
    let dir = EmergencyDirectory::shipped();
    let entry = dir.lookup("510100").unwrap();
    assert_eq!(entry.phone, "028-8000-0120");
    assert!(dir.lookup("000000").is_none());
}

fn hit(id: &str, text: &str, score: f64) -> SearchHit {
    let chunk = KnowledgeChunk::new(id, "d", ChunkKind::DiseaseDescription, text, "s")
        .with_embedding(EmbeddingVector::new(vec![1.0; 8]).unwrap());
    SearchHit { chunk, score }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn context_respects_budget_and_order(
        texts in prop::collection::vec("[a-z 痛腹\n]{1,40}", 0..12),
        dup in prop::collection::vec(0usize..12, 0..4),
        budget in 1usize..400,
    ) {
        let mut hits: Vec<SearchHit> =
            texts.iter().enumerate().map(|(i, t)| hit(&format!("c{i}"), t, 1.0 - i as f64 / 100.0)).collect();
        for d in dup {
            if let Some(h) = hits.get(d).cloned() {
                hits.push(h);
            }
        }
        let ctx = assemble_context(&hits, budget).unwrap();
        prop_assert!(ctx.text.chars().count() <= budget);
        let ids = ctx.chunk_ids();
        let mut dedup = ids.clone();
        dedup.dedup();
        prop_assert_eq!(&ids, &dedup);
        // included ids keep hit order and each appears in the text
        let positions: Vec<usize> =
            ids.iter().map(|id| hits.iter().position(|h| &h.chunk.chunk_id == id).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        for id in &ids {
            let tag = format!("[source: {}]", id);
            prop_assert!(ctx.text.contains(&tag));
        }
    }

    #[test]
    fn highlight_spans_are_maximal_and_disjoint(body in "[ab 痛急诊紧c]{0,40}") {
        let mut lex = HighlightLexicon::default();
        for (k, c) in [
            ("ab", HighlightCategory::Warning),
            ("abab", HighlightCategory::HighRisk),
            ("b a", HighlightCategory::Warning),
            ("急诊", HighlightCategory::HighRisk),
            ("紧急", HighlightCategory::HighRisk),
            ("诊紧", HighlightCategory::Warning),
            ("痛", HighlightCategory::Warning),
        ] {
            lex.insert(k, c);
        }
        let section = Section { id: SectionId::Other, heading_text: String::new(), body: body.clone(), bullets: vec![] };
        let spans = tag_keywords(std::slice::from_ref(&section), &lex);
        let chars: Vec<char> = body.chars().collect();

        // brute-force candidates, honouring the ASCII word-boundary rule
        let word = |c: char| c.is_ascii_alphanumeric();
        let mut candidates = Vec::new();
        for (kw, cat) in lex.keywords() {
            let k: Vec<char> = kw.chars().collect();
            for s in 0..chars.len() {
                let e = s + k.len();
                if e > chars.len() || chars[s..e] != k[..] {
                    continue;
                }
                if word(k[0]) && s > 0 && word(chars[s - 1]) {
                    continue;
                }
                if word(k[k.len() - 1]) && e < chars.len() && word(chars[e]) {
                    continue;
                }
                candidates.push((s, e, cat));
            }
        }
        for (i, a) in spans.iter().enumerate() {
            prop_assert!(candidates.contains(&(a.start, a.end, a.category)));
            prop_assert_eq!(a.keyword.clone(), chars[a.start..a.end].iter().collect::<String>());
            for b in &spans[i + 1..] {
                prop_assert!(a.end <= b.start, "unsorted or overlapping");
            }
        }
        // any candidate left out is blocked by an accepted span at least as long
        for (s, e, _) in &candidates {
            let blocked = spans.iter().any(|a| a.start < *e && *s < a.end && a.end - a.start >= e - s);
            prop_assert!(blocked, "candidate {s}..{e} neither taken nor dominated");
        }
    }
}

#[test]
fn html_output_escapes_all_user_text() {
    let tag = regex::Regex::new(
        r#"</?(article|section|h3|p|ul|li|strong|footer)( class="[a-z -]+"| lang="[a-z]+"| data-section="[a-z_]+")*>|<span class="hl-(highrisk|warning)">|</span>"#,
    )
    .unwrap();
    let entity = regex::Regex::new("&(amp|lt|gt|quot|#39);").unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..1000 {
        let r = support::random_response(&mut rng);
        let html = render(&r, RenderTarget::Html);
        let stripped = tag.replace_all(&html, "");
        assert_no_markup(&stripped, &entity);
    }
    let lex = HighlightLexicon::shipped();
    let r = erkang_core::format::FormattedResponse::from_text(
        "注意事项:\n- <script>alert(1)</script> 立即就医 & \"quoted\"\n\n本AI分析仅供参考, 不能替代专业医疗诊断。如遇紧急情况, 请立即就医。",
        Locale::Zh,
        &lex,
    )
    .unwrap();
    let html = render(&r, RenderTarget::Html);
    assert!(html.contains("&lt;script&gt;alert(1)&lt;/script&gt;"));
    assert!(html.contains("&amp; &quot;quoted&quot;"));
}

fn assert_no_markup(stripped: &str, entity: &regex::Regex) {
    assert!(
        !stripped.contains('<') && !stripped.contains('>'),
        "{stripped}"
    );
    assert!(!stripped.contains('"'), "{stripped}");
    let without_entities = entity.replace_all(stripped, "");
    assert!(!without_entities.contains('&'), "{stripped}");
}
