//! Replays scripted consultations and scores them on six rubric dimensions
//! plus agreement with the expected diagnoses.

pub mod judge;
pub mod report;
pub mod runner;
pub mod score;
pub mod suite;

use rayon::prelude::*;

pub use judge::{HttpJudge, Judge};
pub use report::{aggregate, CaseReport, Report};
pub use runner::{run_case, CaseRun, CaseRunner, EngineRunner, HttpRunner, RunError};
pub use score::{Dimension, DimensionScore, DimensionScores, Method, Scorer};
pub use suite::{load_suite, parse_suite, SuiteError, TestCase};

/// The sample suite shipped with the harness.
pub const SAMPLE_SUITE: &str = include_str!("../data/suite.jsonl");

/// Runs and scores every case on a pool of `parallel` threads. Output order
/// follows `cases`.
pub fn evaluate(
    cases: &[TestCase],
    runner: &dyn CaseRunner,
    scorer: &Scorer,
    parallel: usize,
) -> Result<Vec<CaseReport>, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()?;
    Ok(pool.install(|| {
        cases
            .par_iter()
            .map(|case| {
                let run = run_case(case, runner);
                if let Some(e) = &run.error {
                    log::warn!("{}: {e}", case.case_id);
                }
                CaseReport::new(case, &run, scorer)
            })
            .collect()
    }))
}
