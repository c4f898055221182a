use std::collections::BTreeMap;
use std::fmt::Write as _;

use erkang_core::consult::Phase;
use serde::{Deserialize, Serialize};

use crate::runner::CaseRun;
use crate::score::{consistency, Dimension, DimensionScores, Scorer};
use crate::suite::TestCase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub expected_phase: Phase,
    pub phase: Option<Phase>,
    pub turns: usize,
    pub scores: DimensionScores,
    pub consistent: Option<bool>,
    pub error: Option<String>,
}

impl CaseReport {
    pub fn new(case: &TestCase, run: &CaseRun, scorer: &Scorer) -> Self {
        Self {
            case_id: case.case_id.clone(),
            expected_phase: case.expected_phase,
            phase: run.final_phase(),
            turns: run.turns.len(),
            scores: scorer.score(case, run),
            consistent: consistency(case, run),
            error: run.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cases: Vec<CaseReport>,
    pub means: BTreeMap<Dimension, f64>,
    /// Over non-emergency cases that concluded; `None` when there are none.
    pub consistency_rate: Option<f64>,
    /// Final phase per case, with `errored` and `unfinished` buckets.
    pub phase_counts: BTreeMap<String, usize>,
    pub errored: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no cases to aggregate")]
pub struct EmptyReport;

fn phase_name(p: Phase) -> String {
    serde_json::to_value(p)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{p:?}"))
}

/// Means are plain arithmetic means over every case, errored ones included.
pub fn aggregate(cases: Vec<CaseReport>) -> Result<Report, EmptyReport> {
    if cases.is_empty() {
        return Err(EmptyReport);
    }
    let n = cases.len() as f64;
    let means = Dimension::ALL
        .iter()
        .map(|d| {
            (
                *d,
                cases.iter().map(|c| c.scores.get(*d).value).sum::<f64>() / n,
            )
        })
        .collect();
    let judged: Vec<bool> = cases.iter().filter_map(|c| c.consistent).collect();
    let consistency_rate = (!judged.is_empty())
        .then(|| judged.iter().filter(|b| **b).count() as f64 / judged.len() as f64);
    let mut phase_counts = BTreeMap::new();
    let mut errored = 0;
    for c in &cases {
        let key = if c.error.is_some() {
            errored += 1;
            "errored".to_string()
        } else {
            match c.phase {
                Some(p) if p.is_terminal() => phase_name(p),
                _ => "unfinished".to_string(),
            }
        };
        *phase_counts.entry(key).or_insert(0) += 1;
    }
    Ok(Report {
        cases,
        means,
        consistency_rate,
        phase_counts,
        errored,
    })
}

impl Report {
    pub fn mean(&self, d: Dimension) -> f64 {
        self.means[&d]
    }

    /// One row per case, then a `MEAN` row.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["case_id", "expected_phase", "phase", "turns"];
        header.extend(Dimension::ALL.iter().map(|d| d.as_str()));
        header.extend([
            "patient_friendliness_method",
            "professionalism_method",
            "consistent",
            "error",
        ]);
        w.write_record(&header)?;
        for c in &self.cases {
            let mut row = vec![
                c.case_id.clone(),
                phase_name(c.expected_phase),
                c.phase.map(phase_name).unwrap_or_default(),
                c.turns.to_string(),
            ];
            row.extend(
                Dimension::ALL
                    .iter()
                    .map(|d| format!("{:.4}", c.scores.get(*d).value)),
            );
            row.push(c.scores.patient_friendliness.method.as_str().into());
            row.push(c.scores.professionalism.method.as_str().into());
            row.push(c.consistent.map(|b| b.to_string()).unwrap_or_default());
            row.push(c.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        let mut row = vec![
            "MEAN".to_string(),
            String::new(),
            String::new(),
            String::new(),
        ];
        row.extend(
            Dimension::ALL
                .iter()
                .map(|d| format!("{:.4}", self.mean(*d))),
        );
        row.extend([String::new(), String::new()]);
        row.push(
            self.consistency_rate
                .map(|r| format!("{r:.4}"))
                .unwrap_or_default(),
        );
        row.push(String::new());
        w.write_record(&row)?;
        let bytes = w
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_table(&self) -> String {
        let short = [
            "style",
            "friendly",
            "prof",
            "safety",
            "fluency",
            "proactive",
        ];
        let width = self
            .cases
            .iter()
            .map(|c| c.case_id.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = format!("{:<width$}  {:<16}", "case", "phase");
        for s in short {
            let _ = write!(out, " {s:>9}");
        }
        out.push_str("  consistent\n");
        for c in &self.cases {
            let phase = match (&c.error, c.phase) {
                (Some(_), _) => "errored".to_string(),
                (None, Some(p)) => phase_name(p),
                (None, None) => "-".to_string(),
            };
            let _ = write!(out, "{:<width$}  {:<16}", c.case_id, phase);
            for d in Dimension::ALL {
                let _ = write!(out, " {:>9.3}", c.scores.get(d).value);
            }
            let consistent = c
                .consistent
                .map(|b| if b { "yes" } else { "no" })
                .unwrap_or("-");
            let _ = writeln!(out, "  {consistent}");
        }
        let _ = write!(out, "{:<width$}  {:<16}", "MEAN", "");
        for d in Dimension::ALL {
            let _ = write!(out, " {:>9.3}", self.mean(d));
        }
        out.push('\n');
        match self.consistency_rate {
            Some(r) => {
                let _ = writeln!(out, "consistency_rate: {r:.3}");
            }
            None => out.push_str("consistency_rate: n/a\n"),
        }
        let counts: Vec<String> = self
            .phase_counts
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(out, "phases: {}", counts.join(" "));
        out
    }
}
