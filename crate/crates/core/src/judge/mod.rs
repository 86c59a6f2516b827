//! LLM-as-a-judge protocol and the agreement/preference statistics.

mod client;
mod scores;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceLabel;
use crate::error::{Error, Result};

pub use client::{JudgeClient, JudgeConfig, JUDGE_KEY_ENV};
pub use scores::{
    parse_judge_scores, FormatViolation, JudgeScores, OverallAssessment, ReasoningLevel, Severity,
    CRITERIA,
};
pub use stats::{
    chi_square_gof, chi_square_sf, ln_gamma, pearson_correlation, regularized_gamma_q,
    ChiSquareResult, PreferenceCounts,
};

const JUDGE_TEMPLATE: &str = include_str!("../../assets/judge_prompt.txt");

/// Fill the judge template with a response and its gold letter.
///
/// Substitution is single-pass over the template, so placeholder-looking
/// text inside `response_text` is left alone.
pub fn build_judge_prompt(response_text: &str, correct_answer: ChoiceLabel) -> String {
    let mut out = String::with_capacity(JUDGE_TEMPLATE.len() + response_text.len());
    let mut rest = JUDGE_TEMPLATE;
    loop {
        let next = [("{response}", 0u8), ("{correct_answer}", 1u8)]
            .into_iter()
            .filter_map(|(p, k)| rest.find(p).map(|i| (i, p, k)))
            .min_by_key(|(i, _, _)| *i);
        match next {
            Some((i, placeholder, kind)) => {
                out.push_str(&rest[..i]);
                if kind == 0 {
                    out.push_str(response_text);
                } else {
                    out.push(correct_answer.letter());
                }
                rest = &rest[i + placeholder.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// The raw template as shipped.
pub fn judge_template() -> &'static str {
    JUDGE_TEMPLATE
}

/// One line of a judge results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub id: String,
    pub judge_name: String,
    pub scores: JudgeScores,
}

/// Per-criterion Pearson r between two judges over records paired by id.
///
/// Every id must appear exactly once in each file. A criterion whose scores
/// are constant for either judge has no defined correlation and yields `None`.
pub fn agreement(a: &[JudgeRecord], b: &[JudgeRecord]) -> Result<Vec<(&'static str, Option<f64>)>> {
    let index = |recs: &[JudgeRecord], which: &str| -> Result<BTreeMap<String, JudgeScores>> {
        let mut m = BTreeMap::new();
        for r in recs {
            if m.insert(r.id.clone(), r.scores.clone()).is_some() {
                return Err(Error::usage(format!("duplicate id {} in {which} results", r.id)));
            }
        }
        Ok(m)
    };
    let ma = index(a, "first")?;
    let mb = index(b, "second")?;
    if let Some(id) = ma.keys().find(|k| !mb.contains_key(*k)).or_else(|| mb.keys().find(|k| !ma.contains_key(*k))) {
        return Err(Error::usage(format!("id {id} is not present in both judge result files")));
    }
    if ma.len() < 2 {
        return Err(Error::usage("agreement needs at least two paired records"));
    }
    Ok(CRITERIA
        .iter()
        .map(|&c| {
            let xs: Vec<f64> = ma.values().map(|s| s.criterion(c)).collect();
            let ys: Vec<f64> = mb.values().map(|s| s.criterion(c)).collect();
            (c, pearson_correlation(&xs, &ys).ok())
        })
        .collect())
}
