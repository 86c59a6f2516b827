//! Composite reward: correctness credit minus the answer-leak and
//! structural penalties.
//!
//! `r_total = w_b * r_binary - w_a * p_answer - w_s * p_structural`

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceLabel, ChoiceUniverse};
use crate::embedding::{
    Embedder, FallbackEmbedder, HttpEmbedder, LeakPhraseSet, DEFAULT_LEAK_PHRASES, EMBED_URL_ENV,
};
use crate::error::{Error, Result};
use crate::parser::{is_format_compliant, parse_response, ParsedResponse};

/// Which embedding provider a config asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderSpec {
    #[default]
    Fallback,
    Http {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        url: Option<String>,
    },
}

/// Reward hyperparameters, serialized as the JSON config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_b: f64,
    pub w_a: f64,
    pub w_s: f64,
    pub tau_answer: f64,
    pub tau_preamble: usize,
    pub lambda_s: f64,
    pub leak_phrases: Vec<String>,
    pub choices: ChoiceUniverse,
    pub embedder: EmbedderSpec,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_b: 1.0,
            w_a: 0.5,
            w_s: 0.3,
            tau_answer: 0.6,
            tau_preamble: 50,
            lambda_s: 1.0,
            leak_phrases: DEFAULT_LEAK_PHRASES.iter().map(|s| s.to_string()).collect(),
            choices: ChoiceUniverse::default(),
            embedder: EmbedderSpec::Fallback,
        }
    }
}

impl RewardConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RewardConfig =
            serde_json::from_str(text).map_err(|e| Error::usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks invariants; returns warnings for values that are legal but
    /// degenerate (a leak threshold above 1 can never fire).
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, w) in [("w_b", self.w_b), ("w_a", self.w_a), ("w_s", self.w_s), ("lambda_s", self.lambda_s)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::usage(format!("{name} must be a positive finite number, got {w}")));
            }
        }
        if !(self.tau_answer.is_finite() && self.tau_answer > 0.0) {
            return Err(Error::usage(format!(
                "tau_answer must be positive and finite, got {}",
                self.tau_answer
            )));
        }
        if self.leak_phrases.is_empty() {
            return Err(Error::usage("leak_phrases must not be empty"));
        }
        let mut warnings = Vec::new();
        if self.tau_answer > 1.0 {
            warnings.push(format!(
                "tau_answer = {} exceeds 1; cosine similarity cannot exceed 1 so the answer penalty is disabled",
                self.tau_answer
            ));
        }
        Ok(warnings)
    }

    /// Instantiate the configured embedding provider. An http embedder
    /// without a URL falls back to the `REWARD_FORGE_EMBED_URL` variable.
    pub fn build_embedder(&self) -> Result<Arc<dyn Embedder>> {
        match &self.embedder {
            EmbedderSpec::Fallback => Ok(Arc::new(FallbackEmbedder)),
            EmbedderSpec::Http { url } => {
                let url = match url {
                    Some(u) => u.clone(),
                    None => std::env::var(EMBED_URL_ENV).map_err(|_| {
                        Error::usage(format!("http embedder needs a url or {EMBED_URL_ENV}"))
                    })?,
                };
                Ok(Arc::new(HttpEmbedder::connect(&url)?))
            }
        }
    }
}

/// Every intermediate value behind one reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_binary: i8,
    pub s_answer: f64,
    pub p_answer: f64,
    pub p_structural: f64,
    pub r_total: f64,
    pub format_compliant: bool,
    pub preamble_words: usize,
    pub choice: Option<ChoiceLabel>,
    pub tag_syntax_ok: bool,
}

impl RewardBreakdown {
    /// Recombine the recorded parts with the config weights.
    pub fn recombine(&self, config: &RewardConfig) -> f64 {
        config.w_b * f64::from(self.r_binary)
            - config.w_a * self.p_answer
            - config.w_s * self.p_structural
    }

    /// Reward under the given mode: the composite total, or the bare
    /// correctness signal judged on tag syntax alone.
    pub fn reward(&self, mode: RewardMode, gold: ChoiceLabel, config: &RewardConfig) -> f64 {
        match mode {
            RewardMode::Composite => self.r_total,
            RewardMode::BinaryOnly => {
                config.w_b * f64::from(binary_from_parts(self.choice, gold, self.tag_syntax_ok))
            }
        }
    }
}

/// Reward signal used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    Composite,
    /// Correctness only, with "format" meaning well-formed tags; neither
    /// hack detector participates.
    BinaryOnly,
}

fn binary_from_parts(choice: Option<ChoiceLabel>, gold: ChoiceLabel, compliant: bool) -> i8 {
    match (choice == Some(gold), compliant) {
        (true, true) => 1,
        // Correct letter in a hacked format: credit withheld, no -1.
        (true, false) => 0,
        (false, true) => 0,
        (false, false) => -1,
    }
}

/// +1 correct and compliant, 0 wrong but compliant, -1 wrong and
/// non-compliant; a correct letter in a non-compliant response earns 0.
pub fn binary_reward(parsed: &ParsedResponse, gold: ChoiceLabel, format_compliant: bool) -> i8 {
    binary_from_parts(parsed.diagnostics.choice, gold, format_compliant)
}

/// The leak score itself once it strictly exceeds the threshold, else 0.
pub fn answer_penalty(s_answer: f64, tau_answer: f64) -> f64 {
    if s_answer > tau_answer {
        s_answer
    } else {
        0.0
    }
}

/// Fixed `lambda_s` once the preamble strictly exceeds `tau_preamble` words.
pub fn structural_penalty(preamble_words: usize, tau_preamble: usize, lambda_s: f64) -> f64 {
    if preamble_words > tau_preamble {
        lambda_s
    } else {
        0.0
    }
}

/// Assemble a breakdown from an already-parsed response and its leak score.
pub fn breakdown_from_parts(
    parsed: &ParsedResponse,
    s_answer: f64,
    gold: ChoiceLabel,
    config: &RewardConfig,
) -> RewardBreakdown {
    let preamble_words = parsed.preamble_words();
    let format_compliant = is_format_compliant(parsed, config, s_answer);
    let r_binary = binary_reward(parsed, gold, format_compliant);
    let p_answer = answer_penalty(s_answer, config.tau_answer);
    let p_structural = structural_penalty(preamble_words, config.tau_preamble, config.lambda_s);
    let mut b = RewardBreakdown {
        r_binary,
        s_answer,
        p_answer,
        p_structural,
        r_total: 0.0,
        format_compliant,
        preamble_words,
        choice: parsed.diagnostics.choice,
        tag_syntax_ok: parsed.diagnostics.tag_syntax_ok(),
    };
    b.r_total = b.recombine(config);
    b
}

/// Full pipeline: parse, leak score, compliance, then the weighted total.
pub fn composite_reward(
    text: &str,
    gold: ChoiceLabel,
    config: &RewardConfig,
    leaks: &LeakPhraseSet,
    provider: &dyn Embedder,
) -> Result<RewardBreakdown> {
    if !config.choices.contains(gold) {
        return Err(Error::usage(format!("gold answer {gold} is outside the choice universe")));
    }
    let parsed = parse_response(text, &config.choices);
    let s_answer = crate::embedding::max_leak_similarity(&parsed.think, leaks, provider)?;
    Ok(breakdown_from_parts(&parsed, s_answer, gold, config))
}

/// A config bound to its embedding provider and precomputed leak vectors.
#[derive(Clone)]
pub struct RewardModel {
    config: RewardConfig,
    provider: Arc<dyn Embedder>,
    leaks: LeakPhraseSet,
}

impl std::fmt::Debug for RewardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RewardModel")
            .field("config", &self.config)
            .field("provider", &self.provider.id())
            .finish()
    }
}

impl RewardModel {
    pub fn new(config: RewardConfig, provider: Arc<dyn Embedder>) -> Result<Self> {
        for w in config.validate()? {
            log::warn!("{w}");
        }
        let leaks = LeakPhraseSet::build(&config.leak_phrases, provider.as_ref())?;
        Ok(RewardModel { config, provider, leaks })
    }

    /// Resolve the provider named by the config.
    pub fn from_config(config: RewardConfig) -> Result<Self> {
        let provider = config.build_embedder()?;
        Self::new(config, provider)
    }

    /// Default weights and thresholds with the built-in embedder.
    pub fn fallback_default() -> Self {
        Self::new(RewardConfig::default(), Arc::new(FallbackEmbedder)).expect("default config is valid")
    }

    pub fn config(&self) -> &RewardConfig {
        &self.config
    }

    pub fn leaks(&self) -> &LeakPhraseSet {
        &self.leaks
    }

    pub fn provider(&self) -> &dyn Embedder {
        self.provider.as_ref()
    }

    /// Same provider and leak vectors, different thresholds.
    pub fn with_thresholds(&self, tau_answer: f64, tau_preamble: usize) -> Result<Self> {
        let mut config = self.config.clone();
        config.tau_answer = tau_answer;
        config.tau_preamble = tau_preamble;
        config.validate()?;
        Ok(RewardModel {
            config,
            provider: Arc::clone(&self.provider),
            leaks: self.leaks.clone(),
        })
    }

    pub fn score(&self, text: &str, gold: ChoiceLabel) -> Result<RewardBreakdown> {
        composite_reward(text, gold, &self.config, &self.leaks, self.provider.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(c: char) -> ChoiceLabel {
        ChoiceLabel::new(c).unwrap()
    }

    #[test]
    fn binary_truth_table() {
        let u = ChoiceUniverse::default();
        let p = parse_response("<think>r</think><answer>B</answer>", &u);
        assert_eq!(binary_reward(&p, label('B'), true), 1);
        assert_eq!(binary_reward(&p, label('A'), true), 0);
        assert_eq!(binary_reward(&p, label('A'), false), -1);
        assert_eq!(binary_reward(&p, label('B'), false), 0);
        let e = parse_response("<think>r</think><answer>E</answer>", &u);
        assert_eq!(e.diagnostics.choice, None);
        assert_eq!(binary_reward(&e, label('B'), false), -1);
    }

    #[test]
    fn penalties_use_strict_inequalities() {
        assert_eq!(answer_penalty(1.0, 0.6), 1.0);
        assert_eq!(answer_penalty(0.6, 0.6), 0.0);
        assert_eq!(answer_penalty(0.9, 1.5), 0.0);
        assert_eq!(answer_penalty(-0.2, 0.6), 0.0);
        assert_eq!(structural_penalty(0, 40, 1.0), 0.0);
        assert_eq!(structural_penalty(60, 50, 1.0), 1.0);
        assert_eq!(structural_penalty(50, 50, 1.0), 0.0);
        assert_eq!(structural_penalty(51, 50, 2.5), 2.5);
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg = RewardConfig::default();
        let back = RewardConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        let partial = RewardConfig::from_json(r#"{"w_a": 0.7, "embedder": {"kind": "fallback"}}"#).unwrap();
        assert_eq!(partial.w_a, 0.7);
        assert_eq!(partial.w_b, 1.0);
        let http = RewardConfig::from_json(r#"{"embedder": {"kind": "http", "url": "http://x"}}"#).unwrap();
        assert_eq!(http.embedder, EmbedderSpec::Http { url: Some("http://x".into()) });
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::from_json(r#"{"w_b": 0}"#).unwrap_err().is_usage());
        assert!(RewardConfig::from_json(r#"{"w_s": -1}"#).is_err());
        assert!(RewardConfig::from_json(r#"{"tau_answer": 0}"#).is_err());
        assert!(RewardConfig::from_json(r#"{"leak_phrases": []}"#).is_err());
        assert!(RewardConfig::from_json(r#"{"choices": ["A", "Z"]}"#).is_err());
        assert!(RewardConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg = RewardConfig { tau_answer: 1.5, ..RewardConfig::default() };
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }

    #[test]
    fn gold_outside_universe_is_usage_error() {
        let m = RewardModel::fallback_default();
        assert!(m.score("<think>x</think><answer>A</answer>", label('F')).unwrap_err().is_usage());
    }

    #[test]
    fn binary_only_mode_ignores_detectors() {
        let m = RewardModel::fallback_default();
        let b = m
            .score("<think>the correct answer is</think><answer>B</answer>", label('B'))
            .unwrap();
        assert_eq!(b.r_total, -0.5);
        assert_eq!(b.reward(RewardMode::BinaryOnly, label('B'), m.config()), 1.0);
        assert_eq!(b.reward(RewardMode::BinaryOnly, label('C'), m.config()), 0.0);
        let bad = m.score("B", label('B')).unwrap();
        assert_eq!(bad.reward(RewardMode::BinaryOnly, label('C'), m.config()), -1.0);
    }
}
