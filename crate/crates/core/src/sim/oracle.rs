//! Enumeration-based oracles over the finite toy action space.

use super::{Behavior, RewardTable, ToyPolicy, ToyState, Trajectory};

/// `J(s) = sum over (behavior, letter) of pi(behavior, letter | s) * R`.
pub fn exact_expected_reward(policy: &ToyPolicy, state: ToyState, table: &RewardTable) -> f64 {
    let pb = policy.behavior_probs(state);
    let pa = policy.answer_probs(state);
    let mut j = 0.0;
    for b in Behavior::ALL {
        for (c, pc) in pa.iter().enumerate() {
            j += pb[b.index()] * pc * table.reward(state, b, c);
        }
    }
    j
}

/// `dJ/dtheta` for one state's parameters (behavior logits, then answer
/// logits), summed over the enumeration as `sum pi * grad(log pi) * R`.
pub fn analytic_gradient(policy: &ToyPolicy, state: ToyState, table: &RewardTable) -> Vec<f64> {
    let pb = policy.behavior_probs(state);
    let pa = policy.answer_probs(state);
    let mut grad = vec![0.0; 3 + pa.len()];
    for b in Behavior::ALL {
        for (c, pc) in pa.iter().enumerate() {
            let weight = pb[b.index()] * pc * table.reward(state, b, c);
            for (k, p) in pb.iter().enumerate() {
                grad[k] += weight * (f64::from(u8::from(k == b.index())) - p);
            }
            for (k, p) in pa.iter().enumerate() {
                grad[3 + k] += weight * (f64::from(u8::from(k == c)) - p);
            }
        }
    }
    grad
}

/// Central differences of [`exact_expected_reward`] per parameter.
pub fn finite_difference_gradient(policy: &ToyPolicy, state: ToyState, table: &RewardTable, epsilon: f64) -> Vec<f64> {
    let base = policy.state_params(state);
    let mut probe = policy.clone();
    (0..base.len())
        .map(|i| {
            let mut params = base.clone();
            params[i] = base[i] + epsilon;
            probe.set_state_params(state, &params);
            let up = exact_expected_reward(&probe, state, table);
            params[i] = base[i] - epsilon;
            probe.set_state_params(state, &params);
            let down = exact_expected_reward(&probe, state, table);
            (up - down) / (2.0 * epsilon)
        })
        .collect()
}

/// Max relative error between the analytic and finite-difference gradients.
///
/// The denominator is `max(|a|, |f|, 1e-8)` so parameters whose gradient is
/// essentially zero are compared absolutely.
pub fn grad_check(policy: &ToyPolicy, state: ToyState, table: &RewardTable, epsilon: f64) -> f64 {
    let a = analytic_gradient(policy, state, table);
    let f = finite_difference_gradient(policy, state, table, epsilon);
    a.iter()
        .zip(&f)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Single-episode estimate `grad(log pi(a|s)) * A` for the episode's state.
/// Its expectation with any state-only baseline is `dJ/dtheta`.
pub fn score_function_gradient(policy: &ToyPolicy, t: &Trajectory) -> Vec<f64> {
    let pb = policy.behavior_probs(t.state);
    let pa = policy.answer_probs(t.state);
    let mut g = Vec::with_capacity(3 + pa.len());
    for (k, p) in pb.iter().enumerate() {
        g.push((f64::from(u8::from(k == t.behavior.index())) - p) * t.advantage);
    }
    for (k, p) in pa.iter().enumerate() {
        g.push((f64::from(u8::from(k == t.choice_index)) - p) * t.advantage);
    }
    g
}
