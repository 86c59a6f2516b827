use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Behavior, ToyState};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax_at(logits: &[f64], i: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[i] - lse
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    probs.len() - 1
}

/// Per-state logits for the behavior head and the answer head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub behavior_logits: Vec<[f64; 3]>,
    pub answer_logits: Vec<Vec<f64>>,
}

impl ToyPolicy {
    /// All-zero logits, i.e. uniform over behaviors and letters.
    pub fn uniform(n_states: usize, n_choices: usize) -> Self {
        ToyPolicy {
            behavior_logits: vec![[0.0; 3]; n_states],
            answer_logits: vec![vec![0.0; n_choices]; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.behavior_logits.len()
    }

    pub fn n_choices(&self) -> usize {
        self.answer_logits.first().map_or(0, Vec::len)
    }

    /// Parameters of one state, behavior logits first.
    pub fn n_params_per_state(&self) -> usize {
        3 + self.n_choices()
    }

    pub fn behavior_probs(&self, state: ToyState) -> Vec<f64> {
        softmax(&self.behavior_logits[state.0])
    }

    pub fn answer_probs(&self, state: ToyState) -> Vec<f64> {
        softmax(&self.answer_logits[state.0])
    }

    pub fn log_prob(&self, state: ToyState, behavior: Behavior, choice_index: usize) -> f64 {
        log_softmax_at(&self.behavior_logits[state.0], behavior.index())
            + log_softmax_at(&self.answer_logits[state.0], choice_index)
    }

    /// P(leak) + P(preamble) in one state.
    pub fn hacking_mass(&self, state: ToyState) -> f64 {
        let p = self.behavior_probs(state);
        p[Behavior::LeakInThink.index()] + p[Behavior::PreambleReasoning.index()]
    }

    /// Hacking mass averaged over states.
    pub fn mean_hacking_mass(&self) -> f64 {
        (0..self.n_states()).map(|s| self.hacking_mass(ToyState(s))).sum::<f64>() / self.n_states() as f64
    }

    /// Behavior probabilities averaged over states.
    pub fn mean_behavior_probs(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for s in 0..self.n_states() {
            for (o, p) in out.iter_mut().zip(self.behavior_probs(ToyState(s))) {
                *o += p;
            }
        }
        out.map(|o| o / self.n_states() as f64)
    }

    pub fn state_params(&self, state: ToyState) -> Vec<f64> {
        let mut v = self.behavior_logits[state.0].to_vec();
        v.extend_from_slice(&self.answer_logits[state.0]);
        v
    }

    pub fn set_state_params(&mut self, state: ToyState, params: &[f64]) {
        self.behavior_logits[state.0].copy_from_slice(&params[..3]);
        self.answer_logits[state.0].copy_from_slice(&params[3..]);
    }

    pub fn is_finite(&self) -> bool {
        self.behavior_logits.iter().flatten().all(|x| x.is_finite())
            && self.answer_logits.iter().flatten().all(|x| x.is_finite())
    }
}

/// Draw a behavior and a letter from the two heads.
/// Returns `(behavior, choice_index, log_prob)`.
pub fn sample_actions<R: Rng + ?Sized>(policy: &ToyPolicy, state: ToyState, rng: &mut R) -> (Behavior, usize, f64) {
    let b = sample_index(&policy.behavior_probs(state), rng);
    let c = sample_index(&policy.answer_probs(state), rng);
    let behavior = Behavior::ALL[b];
    (behavior, c, policy.log_prob(state, behavior, c))
}

/// Learned per-state scalar baseline `b(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub values: Vec<f64>,
}

impl BaselineModel {
    pub fn zeros(n_states: usize) -> Self {
        BaselineModel { values: vec![0.0; n_states] }
    }

    pub fn value(&self, state: ToyState) -> f64 {
        self.values[state.0]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
