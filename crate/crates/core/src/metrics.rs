//! Corpus scoring, violation rates and threshold sweeps.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceLabel, ChoiceUniverse};
use crate::error::{Error, Result};
use crate::reward::{RewardBreakdown, RewardModel};

/// One multiple-choice item together with the generation to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(default)]
    pub question: String,
    #[serde(default)]
    pub options: BTreeMap<ChoiceLabel, String>,
    pub gold: ChoiceLabel,
    pub response: String,
}

impl CorpusRecord {
    pub fn validate(&self, universe: &ChoiceUniverse) -> Result<()> {
        if !universe.contains(self.gold) {
            return Err(Error::validation("gold", format!("{} is outside the choice universe", self.gold)));
        }
        if !self.options.is_empty() && !self.options.contains_key(&self.gold) {
            return Err(Error::validation("gold", format!("{} is not one of the options", self.gold)));
        }
        if let Some(bad) = self.options.keys().find(|k| !universe.contains(**k)) {
            return Err(Error::validation("options", format!("option {bad} is outside the choice universe")));
        }
        Ok(())
    }
}

/// Read JSON-lines records; blank lines are skipped, malformed lines are
/// reported with their 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub breakdown: RewardBreakdown,
    pub answer_violation: bool,
    pub structural_violation: bool,
    pub correct: bool,
}

impl ScoredRecord {
    fn new(id: String, breakdown: RewardBreakdown, gold: ChoiceLabel, tau_answer: f64, tau_preamble: usize) -> Self {
        let mut s = ScoredRecord {
            id,
            correct: breakdown.choice == Some(gold),
            breakdown,
            answer_violation: false,
            structural_violation: false,
        };
        s.set_thresholds(tau_answer, tau_preamble);
        s
    }

    /// Recompute the violation flags for other thresholds. The breakdown's
    /// penalty values are left as scored.
    pub fn set_thresholds(&mut self, tau_answer: f64, tau_preamble: usize) {
        self.answer_violation = self.breakdown.s_answer > tau_answer;
        self.structural_violation = self.breakdown.preamble_words > tau_preamble;
    }

    pub fn violated(&self) -> bool {
        self.answer_violation || self.structural_violation
    }
}

/// A record that could not be scored (provider failure or invalid record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    pub id: String,
    pub error: String,
}

pub type RecordOutcome = std::result::Result<ScoredRecord, RecordError>;

/// One line of scored JSON-lines output.
pub fn outcome_json(outcome: &RecordOutcome) -> String {
    match outcome {
        Ok(s) => serde_json::to_string(s),
        Err(e) => serde_json::to_string(e),
    }
    .expect("scored records serialize")
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::usage(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Score every record, preserving input order.
///
/// Per-record failures are returned in place; the call itself fails only
/// for an empty corpus or when every record failed. `jobs` bounds the
/// worker threads (`None` uses the global pool).
pub fn score_corpus(records: &[CorpusRecord], model: &RewardModel, jobs: Option<usize>) -> Result<Vec<RecordOutcome>> {
    if records.is_empty() {
        return Err(Error::usage("empty corpus"));
    }
    let cfg = model.config();
    let outcomes: Vec<RecordOutcome> = with_pool(jobs, || {
        records
            .par_iter()
            .map(|rec| {
                rec.validate(&cfg.choices)
                    .and_then(|_| model.score(&rec.response, rec.gold))
                    .map(|b| ScoredRecord::new(rec.id.clone(), b, rec.gold, cfg.tau_answer, cfg.tau_preamble))
                    .map_err(|e| RecordError {
                        id: rec.id.clone(),
                        error: e.to_string(),
                    })
            })
            .collect()
    })?;
    if outcomes.iter().all(Result::is_err) {
        let first = outcomes[0].as_ref().unwrap_err();
        return Err(Error::transport(format!(
            "all {} records failed; first error: {}",
            outcomes.len(),
            first.error
        )));
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub answer_violation_rate: f64,
    pub structural_violation_rate: f64,
    /// Fraction flagged by either detector; this is the hacking rate.
    pub overall_violation_rate: f64,
}

pub fn compute_report<'a, I>(scored: I) -> Result<MetricsReport>
where
    I: IntoIterator<Item = &'a ScoredRecord>,
{
    let (mut n, mut correct, mut answer, mut structural, mut overall) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for s in scored {
        n += 1;
        correct += usize::from(s.correct);
        answer += usize::from(s.answer_violation);
        structural += usize::from(s.structural_violation);
        overall += usize::from(s.violated());
    }
    if n == 0 {
        return Err(Error::usage("cannot report on an empty set of scored records"));
    }
    let rate = |k: usize| k as f64 / n as f64;
    Ok(MetricsReport {
        n,
        accuracy: rate(correct),
        answer_violation_rate: rate(answer),
        structural_violation_rate: rate(structural),
        overall_violation_rate: rate(overall),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_answer: f64,
    pub tau_preamble: usize,
    pub report: MetricsReport,
}

/// Violation rates over a `tau_answer x tau_preamble` grid.
///
/// Records are embedded and counted once; each cell only re-applies the
/// thresholds. Rows come out with `tau_answer` as the outer loop.
pub fn threshold_sweep(
    records: &[CorpusRecord],
    model: &RewardModel,
    tau_answer_grid: &[f64],
    tau_preamble_grid: &[usize],
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if tau_answer_grid.is_empty() || tau_preamble_grid.is_empty() {
        return Err(Error::usage("sweep grids must not be empty"));
    }
    for &ta in tau_answer_grid {
        if !(ta.is_finite() && ta > 0.0) {
            return Err(Error::usage(format!("tau_answer grid value {ta} must be positive")));
        }
        if ta > 1.0 {
            log::warn!("tau_answer = {ta} exceeds 1; the answer detector cannot fire in that cell");
        }
    }
    let scored: Vec<ScoredRecord> = score_corpus(records, model, jobs)?
        .into_iter()
        .filter_map(|o| o.map_err(|e| log::warn!("record {} skipped: {}", e.id, e.error)).ok())
        .collect();

    let mut rows = Vec::with_capacity(tau_answer_grid.len() * tau_preamble_grid.len());
    let mut cell = scored;
    for &ta in tau_answer_grid {
        for &tp in tau_preamble_grid {
            for s in &mut cell {
                s.set_thresholds(ta, tp);
            }
            rows.push(SweepRow {
                tau_answer: ta,
                tau_preamble: tp,
                report: compute_report(&cell)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SweepCsvRow {
    tau_answer: f64,
    tau_preamble: usize,
    answer_violation_rate: f64,
    structural_violation_rate: f64,
    overall_violation_rate: f64,
}

/// Columns: `tau_answer,tau_preamble,answer_violation_rate,structural_violation_rate,overall_violation_rate`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(SweepCsvRow {
            tau_answer: r.tau_answer,
            tau_preamble: r.tau_preamble,
            answer_violation_rate: r.report.answer_violation_rate,
            structural_violation_rate: r.report.structural_violation_rate,
            overall_violation_rate: r.report.overall_violation_rate,
        })?;
    }
    w.flush()?;
    Ok(())
}
