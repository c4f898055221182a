use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use erkang_core::consult::{ActionTag, Phase};
use erkang_core::engine::Engine;
use erkang_core::format::{FormattedResponse, Section, SectionId};
use erkang_core::safety::{disclaimer_text, DisclaimerKind};
use erkang_core::Locale;
use erkang_eval::judge::{Judge, JudgedDimension};
use erkang_eval::score::{proactiveness, safety, stylization};
use erkang_eval::*;

fn sample() -> Vec<TestCase> {
    parse_suite(SAMPLE_SUITE).unwrap()
}

fn case(id: &str) -> TestCase {
    sample().into_iter().find(|c| c.case_id == id).unwrap()
}

fn play(c: &TestCase) -> CaseRun {
    let engine = Engine::builder().build().unwrap();
    run_case(c, &EngineRunner::new(&engine))
}

#[test]
fn sample_suite_shape() {
    let cases = sample();
    assert!(cases.len() >= 12);
    assert!(cases.iter().filter(|c| c.is_emergency).count() >= 2);
    assert!(cases.iter().any(|c| c.expected_phase == Phase::Blocked));
}

#[test]
fn golden_case_scores_full_marks() {
    let c = case("zh-appendicitis-golden");
    let run = play(&c);
    assert!(run.error.is_none());
    assert_eq!(run.final_phase(), Some(Phase::Concluded));
    let asks = run
        .turns
        .iter()
        .filter(|t| t.action_taken == ActionTag::AskFollowUp)
        .count();
    assert_eq!(asks, 3);
    assert_eq!(run.turns.last().unwrap().inquiry.round, 3);
    let s = Scorer::default().score(&c, &run);
    assert_eq!(s.stylization.value, 1.0);
    assert_eq!(s.safety.value, 1.0);
    assert_eq!(s.proactiveness.value, 1.0);
    assert_eq!(s.patient_friendliness.method, Method::RuleBased);
}

#[test]
fn chest_pain_halts_on_first_turn() {
    let c = case("zh-emergency-chest-pain");
    let run = play(&c);
    assert_eq!(run.turns.len(), 1);
    assert_eq!(run.final_phase(), Some(Phase::EmergencyHalted));
    assert_eq!(Scorer::default().score(&c, &run).safety.value, 1.0);

    let mut wrong = c.clone();
    wrong.expected_trigger = Some("impaired_consciousness".to_string().into());
    assert_eq!(
        safety(&wrong, &run, &erkang_core::safety::SafetyFilter::shipped()),
        0.0
    );
}

fn replace_last_response(run: &mut CaseRun, body: &str, disclaimer: &str) {
    let section = Section {
        id: SectionId::SymptomAnalysis,
        heading_text: "病情分析:\n".into(),
        body: body.into(),
        bullets: vec![],
    };
    let resp =
        FormattedResponse::new(vec![section], vec![], disclaimer.into(), Locale::Zh).unwrap();
    run.turns.last_mut().unwrap().response = resp;
}

#[test]
fn missing_or_doubled_disclaimer_fails_safety() {
    let c = case("zh-migraine");
    let filter = erkang_core::safety::SafetyFilter::shipped();
    let good = play(&c);
    assert_eq!(safety(&c, &good, &filter), 1.0);

    let mut run = good.clone();
    replace_last_response(&mut run, "偏头痛。\n\n", "仅供参考");
    assert!(safety(&c, &run, &filter) < 1.0);

    let final_text = disclaimer_text(DisclaimerKind::Final, Locale::Zh);
    let mut run = good.clone();
    replace_last_response(&mut run, &format!("偏头痛。{final_text}\n\n"), final_text);
    assert!(safety(&c, &run, &filter) < 1.0);

    // right text, wrong kind for a terminal turn
    let mut run = good.clone();
    replace_last_response(
        &mut run,
        "偏头痛。\n\n",
        disclaimer_text(DisclaimerKind::MidDialogue, Locale::Zh),
    );
    assert!(safety(&c, &run, &filter) < 1.0);

    let mut run = good;
    replace_last_response(&mut run, "保证治愈。\n\n", final_text);
    assert!(safety(&c, &run, &filter) < 1.0);
}

#[test]
fn early_conclusion_with_open_slots_scores_zero_proactiveness() {
    let c = case("zh-migraine");
    let mut run = play(&c);
    run.turns.truncate(2);
    let t = &mut run.turns[1];
    t.action_taken = ActionTag::Conclude;
    t.phase_after = Phase::Concluded;
    t.inquiry.round = 1;
    t.inquiry.critical_resolved = 0;
    assert_eq!(proactiveness(&run), 0.0);
    // and a conclusion without the expected sections loses stylization
    replace_last_response(
        &mut run,
        "偏头痛。\n\n",
        disclaimer_text(DisclaimerKind::Final, Locale::Zh),
    );
    assert!((stylization(&run) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn aggregate_means_are_arithmetic_and_empty_is_an_error() {
    assert!(aggregate(vec![]).is_err());
    let engine = Engine::builder().build().unwrap();
    let reports = evaluate(
        &sample(),
        &EngineRunner::new(&engine),
        &Scorer::default(),
        3,
    )
    .unwrap();
    let mut skewed = reports.clone();
    skewed[0].scores.fluency.value = 0.25;
    skewed[1].scores.fluency.value = 0.5;
    let n = skewed.len() as f64;
    let expected = skewed.iter().map(|r| r.scores.fluency.value).sum::<f64>() / n;
    let report = aggregate(skewed).unwrap();
    assert!((report.mean(Dimension::Fluency) - expected).abs() < 1e-12);
    for d in Dimension::ALL {
        let m = report.mean(d);
        assert!((0.0..=1.0).contains(&m), "{d:?} {m}");
    }

    // sequential and parallel runs score identically
    let sequential = evaluate(
        &sample(),
        &EngineRunner::new(&engine),
        &Scorer::default(),
        1,
    )
    .unwrap();
    assert_eq!(sequential, reports);
}

#[test]
fn unreachable_service_marks_cases_errored() {
    let runner = HttpRunner::new("http://127.0.0.1:9", Duration::from_secs(2));
    let cases: Vec<TestCase> = sample().into_iter().take(2).collect();
    let reports = evaluate(&cases, &runner, &Scorer::default(), 2).unwrap();
    assert!(reports.iter().all(|r| r.error.is_some() && r.turns == 0));
    let report = aggregate(reports).unwrap();
    assert_eq!(report.errored, 2);
    assert_eq!(report.phase_counts.get("errored"), Some(&2));
    assert_eq!(report.mean(Dimension::Safety), 0.0);
}

#[test]
fn http_run_matches_in_process_run() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Arc::new(Engine::builder().data_dir(dir.path()).build().unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let addr = rt
        .block_on(erkang_server::spawn(
            engine,
            SocketAddr::from(([127, 0, 0, 1], 0)),
        ))
        .unwrap();
    let runner = HttpRunner::new(&format!("http://{addr}/"), Duration::from_secs(10));
    let over_http =
        aggregate(evaluate(&sample(), &runner, &Scorer::default(), 4).unwrap()).unwrap();

    let local = Engine::builder().build().unwrap();
    let in_process =
        aggregate(evaluate(&sample(), &EngineRunner::new(&local), &Scorer::default(), 4).unwrap())
            .unwrap();
    assert_eq!(over_http.errored, 0);
    assert_eq!(over_http.means, in_process.means);
    assert_eq!(over_http.consistency_rate, in_process.consistency_rate);
    assert_eq!(over_http.phase_counts, in_process.phase_counts);
}

#[test]
fn csv_report_reads_back() {
    let engine = Engine::builder().build().unwrap();
    let report = aggregate(
        evaluate(
            &sample(),
            &EngineRunner::new(&engine),
            &Scorer::default(),
            2,
        )
        .unwrap(),
    )
    .unwrap();
    let text = report.to_csv().unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "case_id");
    assert_eq!(&headers[4], "stylization");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), report.cases.len() + 1);
    let mean = rows.last().unwrap();
    assert_eq!(&mean[0], "MEAN");
    assert_eq!(&mean[7], "1.0000");
    assert!(report.to_table().contains("consistency_rate: 1.000"));
}

struct Fixed(Result<f64, String>);

impl Judge for Fixed {
    fn rate(&self, _: JudgedDimension, _: &TestCase, _: &CaseRun) -> Result<f64, String> {
        self.0.clone()
    }
}

#[test]
fn judge_scores_are_flagged_and_failures_fall_back() {
    let c = case("en-migraine");
    let run = play(&c);
    let judged = Scorer::default()
        .with_judge(Box::new(Fixed(Ok(0.7))))
        .score(&c, &run);
    assert_eq!(judged.patient_friendliness.value, 0.7);
    assert_eq!(judged.professionalism.method, Method::JudgeBacked);
    assert_eq!(judged.safety.method, Method::RuleBased);

    let fallback = Scorer::default()
        .with_judge(Box::new(Fixed(Err("down".into()))))
        .score(&c, &run);
    assert_eq!(fallback, Scorer::default().score(&c, &run));
}

fn report_with(values: &[(f64, Option<bool>)]) -> Vec<CaseReport> {
    values
        .iter()
        .enumerate()
        .map(|(i, (v, consistent))| {
            let s = DimensionScore {
                value: *v,
                method: Method::RuleBased,
            };
            CaseReport {
                case_id: format!("c{i}"),
                expected_phase: Phase::Concluded,
                phase: Some(Phase::Concluded),
                turns: 1,
                scores: DimensionScores {
                    stylization: s,
                    patient_friendliness: s,
                    professionalism: s,
                    safety: s,
                    fluency: s,
                    proactiveness: s,
                },
                consistent: *consistent,
                error: None,
            }
        })
        .collect()
}

proptest::proptest! {
    #[test]
    fn means_and_rates_stay_in_range(values in proptest::collection::vec((0.0f64..=1.0, proptest::option::of(proptest::bool::ANY)), 1..40)) {
        let report = aggregate(report_with(&values)).unwrap();
        let expected = values.iter().map(|(v, _)| v).sum::<f64>() / values.len() as f64;
        for d in Dimension::ALL {
            proptest::prop_assert!((report.mean(d) - expected).abs() < 1e-12);
        }
        let judged: Vec<bool> = values.iter().filter_map(|(_, c)| *c).collect();
        match report.consistency_rate {
            None => proptest::prop_assert!(judged.is_empty()),
            Some(r) => {
                proptest::prop_assert!((0.0..=1.0).contains(&r));
                let hits = judged.iter().filter(|b| **b).count() as f64;
                proptest::prop_assert!((r - hits / judged.len() as f64).abs() < 1e-12);
            }
        }
    }
}
