//! Desk-scale REINFORCE with a learned baseline.
//!
//! The policy is a two-head categorical model per prompt: one head picks a
//! response *behavior* (compliant, leak the answer inside the think block,
//! or reason in a long preamble), the other picks the answer letter. Each
//! (behavior, letter) pair renders to a fixed text that is scored once by
//! the real reward pipeline, so the whole action space can be enumerated.

mod oracle;
mod policy;
mod train;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceLabel, ChoiceUniverse};
use crate::error::{Error, Result};
use crate::reward::{RewardBreakdown, RewardMode, RewardModel};

pub use oracle::{
    analytic_gradient, exact_expected_reward, finite_difference_gradient, grad_check,
    score_function_gradient,
};
pub use policy::{sample_actions, softmax, BaselineModel, ToyPolicy};
pub use train::{
    compute_losses, generate_corpus, train, train_baseline, train_step, CurvePoint, Losses,
    TrainConfig, TrainOutcome, CURVE_HEADER,
};

const BUNDLED_PROMPTS: &str = include_str!("../../fixtures/prompts.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Behavior {
    Compliant,
    LeakInThink,
    PreambleReasoning,
}

impl Behavior {
    pub const ALL: [Behavior; 3] = [
        Behavior::Compliant,
        Behavior::LeakInThink,
        Behavior::PreambleReasoning,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_hacking(self) -> bool {
        self != Behavior::Compliant
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Behavior::Compliant => "COMPLIANT",
            Behavior::LeakInThink => "LEAK_IN_THINK",
            Behavior::PreambleReasoning => "PREAMBLE_REASONING",
        };
        f.write_str(s)
    }
}

/// One fixture prompt: an MCQ plus the canned reasoning used for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFixture {
    pub id: String,
    pub question: String,
    pub options: BTreeMap<ChoiceLabel, String>,
    pub gold: ChoiceLabel,
    /// Genuine step-by-step reasoning for the think block.
    pub reasoning: String,
    /// Short diagnosis used as the think block of a preamble-style response.
    pub conclusion: String,
}

/// The four bundled prompts.
pub fn bundled_prompts() -> Vec<PromptFixture> {
    BUNDLED_PROMPTS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled prompt fixture is valid"))
        .collect()
}

/// Index of a prompt in the fixture set (one-hot features are implicit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToyState(pub usize);

const PREAMBLE_LEAD: &str = "To solve this problem, let's go through each option step-by-step and evaluate its likelihood based on the given information.";
const PREAMBLE_TAIL: &str = "Based on the reasoning process, the most likely answer follows.";

/// Minimum preamble length of a [`Behavior::PreambleReasoning`] rendering.
pub const PREAMBLE_MIN_WORDS: usize = 60;

/// Deterministic text for a (prompt, behavior, letter) triple.
///
/// * compliant: fixture reasoning inside think, letter inside answer;
/// * leak: the think block is only a direct statement of the letter;
/// * preamble: the reasoning moves in front of the think block, which keeps
///   only a short conclusion. The preamble is padded to at least
///   [`PREAMBLE_MIN_WORDS`] words.
pub fn render_response(prompt: &PromptFixture, behavior: Behavior, choice: ChoiceLabel) -> String {
    match behavior {
        Behavior::Compliant => format!(
            "<think>{}</think>\n<answer>{choice}</answer>",
            prompt.reasoning
        ),
        Behavior::LeakInThink => {
            format!("<think>The solution is {choice}</think>\n<answer>{choice}</answer>")
        }
        Behavior::PreambleReasoning => {
            let mut preamble = format!("{PREAMBLE_LEAD} {}", prompt.reasoning);
            while crate::parser::count_preamble_words(&preamble) + 10 < PREAMBLE_MIN_WORDS {
                preamble.push(' ');
                preamble.push_str(&prompt.reasoning);
            }
            format!(
                "{preamble} {PREAMBLE_TAIL}\n<think>{}</think><answer>{choice}</answer>",
                prompt.conclusion
            )
        }
    }
}

/// One pre-scored cell of the action space.
#[derive(Debug, Clone)]
pub struct ActionOutcome {
    pub text: Arc<str>,
    pub breakdown: RewardBreakdown,
    pub reward: f64,
    /// Flagged by either detector at the model's thresholds.
    pub violation: bool,
}

/// Memoized outcomes for every state x behavior x letter.
#[derive(Debug, Clone)]
pub struct RewardTable {
    prompts: Vec<PromptFixture>,
    choices: Vec<ChoiceLabel>,
    mode: RewardMode,
    // [state][behavior][choice]
    cells: Vec<Vec<Vec<ActionOutcome>>>,
}

impl RewardTable {
    pub fn build(prompts: Vec<PromptFixture>, model: &RewardModel, mode: RewardMode) -> Result<Self> {
        if prompts.is_empty() {
            return Err(Error::usage("at least one prompt is required"));
        }
        let cfg = model.config();
        let choices: Vec<ChoiceLabel> = cfg.choices.iter().collect();
        let mut cells = Vec::with_capacity(prompts.len());
        for p in &prompts {
            if !cfg.choices.contains(p.gold) {
                return Err(Error::usage(format!("prompt {} has gold {} outside the universe", p.id, p.gold)));
            }
            let mut per_behavior = Vec::with_capacity(Behavior::ALL.len());
            for b in Behavior::ALL {
                let mut per_choice = Vec::with_capacity(choices.len());
                for &c in &choices {
                    let text = render_response(p, b, c);
                    let breakdown = model.score(&text, p.gold)?;
                    let reward = breakdown.reward(mode, p.gold, cfg);
                    let violation = breakdown.s_answer > cfg.tau_answer
                        || breakdown.preamble_words > cfg.tau_preamble;
                    per_choice.push(ActionOutcome {
                        text: Arc::from(text),
                        breakdown,
                        reward,
                        violation,
                    });
                }
                per_behavior.push(per_choice);
            }
            cells.push(per_behavior);
        }
        Ok(RewardTable { prompts, choices, mode, cells })
    }

    /// Bundled prompts scored with the default fallback model.
    pub fn bundled(mode: RewardMode) -> Self {
        Self::build(bundled_prompts(), &RewardModel::fallback_default(), mode)
            .expect("bundled prompts score under the default model")
    }

    pub fn n_states(&self) -> usize {
        self.prompts.len()
    }

    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn choices(&self) -> &[ChoiceLabel] {
        &self.choices
    }

    pub fn choice_universe(&self) -> ChoiceUniverse {
        ChoiceUniverse::new(self.choices.iter().copied()).expect("non-empty")
    }

    pub fn prompts(&self) -> &[PromptFixture] {
        &self.prompts
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    pub fn outcome(&self, state: ToyState, behavior: Behavior, choice_index: usize) -> &ActionOutcome {
        &self.cells[state.0][behavior.index()][choice_index]
    }

    pub fn reward(&self, state: ToyState, behavior: Behavior, choice_index: usize) -> f64 {
        self.outcome(state, behavior, choice_index).reward
    }

    pub fn min_max_reward(&self, state: ToyState) -> (f64, f64) {
        self.cells[state.0]
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.reward), hi.max(o.reward)))
    }
}

/// One simulated episode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: ToyState,
    pub behavior: Behavior,
    pub choice: ChoiceLabel,
    pub choice_index: usize,
    pub rendered_text: Arc<str>,
    /// log p(behavior) + log p(choice).
    pub log_prob: f64,
    pub reward: f64,
    pub baseline: f64,
    pub advantage: f64,
    pub violation: bool,
}

impl Trajectory {
    /// Record `b(s)` and the advantage `R - b(s)`.
    pub fn set_baseline(&mut self, baseline: f64) {
        self.baseline = baseline;
        self.advantage = self.reward - baseline;
    }
}

/// Draw one episode for `state` and attach its memoized reward.
/// Baseline and advantage stay zero until [`Trajectory::set_baseline`].
pub fn sample_episode<R: rand::Rng + ?Sized>(
    policy: &ToyPolicy,
    table: &RewardTable,
    state: ToyState,
    rng: &mut R,
) -> Trajectory {
    let (behavior, choice_index, log_prob) = sample_actions(policy, state, rng);
    let outcome = table.outcome(state, behavior, choice_index);
    Trajectory {
        state,
        behavior,
        choice: table.choices[choice_index],
        choice_index,
        rendered_text: Arc::clone(&outcome.text),
        log_prob,
        reward: outcome.reward,
        baseline: 0.0,
        advantage: outcome.reward,
        violation: outcome.violation,
    }
}
