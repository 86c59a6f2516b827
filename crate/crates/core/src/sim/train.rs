use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{exact_expected_reward, sample_episode, BaselineModel, RewardTable, ToyPolicy, ToyState, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::CorpusRecord;
use crate::reward::RewardMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes_per_batch: usize,
    pub batches: usize,
    pub policy_lr: f64,
    pub baseline_lr: f64,
    pub seed: u64,
    pub mode: RewardMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes_per_batch: 1,
            batches: 2000,
            policy_lr: 0.1,
            baseline_lr: 0.05,
            seed: 42,
            mode: RewardMode::Composite,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::usage(format!("invalid train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_batch == 0 || self.batches == 0 {
            return Err(Error::usage("episodes_per_batch and batches must be positive"));
        }
        for (name, lr) in [("policy_lr", self.policy_lr), ("baseline_lr", self.baseline_lr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::usage(format!("{name} must be positive and finite, got {lr}")));
            }
        }
        Ok(())
    }

    pub fn total_episodes(&self) -> usize {
        self.episodes_per_batch * self.batches
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub policy: f64,
    pub baseline: f64,
    pub total: f64,
}

/// Batch losses with the advantage held constant:
///
/// * policy: mean of `-log_prob * advantage`
/// * baseline: mean of `0.5 * (b(s) - R)^2`
/// * total: their sum
pub fn compute_losses(batch: &[Trajectory]) -> Result<Losses> {
    if batch.is_empty() {
        return Err(Error::usage("cannot compute losses of an empty batch"));
    }
    let n = batch.len() as f64;
    let policy = batch.iter().map(|t| -t.log_prob * t.advantage).sum::<f64>() / n;
    let baseline = batch.iter().map(|t| 0.5 * (t.baseline - t.reward).powi(2)).sum::<f64>() / n;
    Ok(Losses {
        policy,
        baseline,
        total: policy + baseline,
    })
}

/// One gradient-descent step on the total loss.
///
/// The policy gradient is the score-function form: for each episode the
/// softmax log-prob gradient `onehot - p` of each head scaled by `-A`.
/// The baseline moves along the gradient of its squared error.
pub fn train_step(
    policy: &ToyPolicy,
    baseline: &BaselineModel,
    batch: &[Trajectory],
    config: &TrainConfig,
) -> Result<(ToyPolicy, BaselineModel)> {
    if batch.is_empty() {
        return Err(Error::usage("cannot train on an empty batch"));
    }
    let n = batch.len() as f64;
    let mut next = policy.clone();
    let mut next_baseline = baseline.clone();
    let mut g_behavior = vec![[0.0f64; 3]; policy.n_states()];
    let mut g_answer = vec![vec![0.0f64; policy.n_choices()]; policy.n_states()];
    let mut g_base = vec![0.0f64; baseline.values.len()];

    for t in batch {
        let s = t.state.0;
        let pb = policy.behavior_probs(t.state);
        for (k, p) in pb.iter().enumerate() {
            let onehot = if k == t.behavior.index() { 1.0 } else { 0.0 };
            g_behavior[s][k] -= (onehot - p) * t.advantage / n;
        }
        let pa = policy.answer_probs(t.state);
        for (k, p) in pa.iter().enumerate() {
            let onehot = if k == t.choice_index { 1.0 } else { 0.0 };
            g_answer[s][k] -= (onehot - p) * t.advantage / n;
        }
        g_base[s] += (t.baseline - t.reward) / n;
    }

    for s in 0..policy.n_states() {
        for (w, g) in next.behavior_logits[s].iter_mut().zip(&g_behavior[s]) {
            *w -= config.policy_lr * g;
        }
        for (w, g) in next.answer_logits[s].iter_mut().zip(&g_answer[s]) {
            *w -= config.policy_lr * g;
        }
        next_baseline.values[s] -= config.baseline_lr * g_base[s];
    }
    Ok((next, next_baseline))
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean reward of the batch just trained on.
    pub mean_reward: f64,
    pub p_compliant: f64,
    pub p_leak: f64,
    pub p_preamble: f64,
    /// Fraction of the batch flagged by either detector.
    pub hacking_rate: f64,
    pub baseline_value: f64,
}

pub const CURVE_HEADER: &str = "step,mean_reward,p_compliant,p_leak,p_preamble,hacking_rate,baseline_value";

impl CurvePoint {
    pub fn write_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in curve {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub baseline: BaselineModel,
    pub curve: Vec<CurvePoint>,
}

impl TrainOutcome {
    pub fn final_hacking_mass(&self) -> f64 {
        self.policy.mean_hacking_mass()
    }

    /// Exact expected reward of the final policy, averaged over states.
    pub fn final_expected_reward(&self, table: &RewardTable) -> f64 {
        (0..table.n_states())
            .map(|s| exact_expected_reward(&self.policy, ToyState(s), table))
            .sum::<f64>()
            / table.n_states() as f64
    }
}

/// Run REINFORCE from a uniform policy and zero baseline.
///
/// Episode `e` uses prompt `e mod n_states`; all randomness comes from a
/// ChaCha8 stream seeded with `config.seed`. The reward signal is the one
/// baked into `table`, whose mode must match `config.mode`.
pub fn train(table: &RewardTable, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if table.mode() != config.mode {
        return Err(Error::usage("reward table mode does not match the train config"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = ToyPolicy::uniform(table.n_states(), table.n_choices());
    let mut baseline = BaselineModel::zeros(table.n_states());
    let mut curve = Vec::with_capacity(config.batches);
    let mut episode = 0usize;

    for step in 1..=config.batches {
        let mut batch = Vec::with_capacity(config.episodes_per_batch);
        for _ in 0..config.episodes_per_batch {
            let state = ToyState(episode % table.n_states());
            episode += 1;
            let mut t = sample_episode(&policy, table, state, &mut rng);
            t.set_baseline(baseline.value(state));
            batch.push(t);
        }
        let n = batch.len() as f64;
        let mean_reward = batch.iter().map(|t| t.reward).sum::<f64>() / n;
        let hacking_rate = batch.iter().filter(|t| t.violation).count() as f64 / n;

        (policy, baseline) = train_step(&policy, &baseline, &batch, config)?;
        if !policy.is_finite() {
            return Err(Error::usage(format!("policy diverged at step {step}; lower policy_lr")));
        }

        let [p_compliant, p_leak, p_preamble] = policy.mean_behavior_probs();
        curve.push(CurvePoint {
            step,
            mean_reward,
            p_compliant,
            p_leak,
            p_preamble,
            hacking_rate,
            baseline_value: baseline.mean(),
        });
    }
    Ok(TrainOutcome { policy, baseline, curve })
}

/// Fit only the baseline against a frozen policy for `steps` batches.
pub fn train_baseline<R: rand::Rng + ?Sized>(
    policy: &ToyPolicy,
    mut baseline: BaselineModel,
    table: &RewardTable,
    episodes_per_batch: usize,
    steps: usize,
    lr: f64,
    rng: &mut R,
) -> BaselineModel {
    let mut episode = 0usize;
    let n = episodes_per_batch as f64;
    for _ in 0..steps {
        let mut grad = vec![0.0; baseline.values.len()];
        for _ in 0..episodes_per_batch {
            let state = ToyState(episode % table.n_states());
            episode += 1;
            let t = sample_episode(policy, table, state, rng);
            grad[state.0] += (baseline.value(state) - t.reward) / n;
        }
        for (b, g) in baseline.values.iter_mut().zip(grad) {
            *b -= lr * g;
        }
    }
    baseline
}

/// Sample `n` responses from a policy as a scoring corpus (prompt `i mod n_states`).
pub fn generate_corpus<R: rand::Rng + ?Sized>(
    policy: &ToyPolicy,
    table: &RewardTable,
    n: usize,
    rng: &mut R,
) -> Vec<CorpusRecord> {
    (0..n)
        .map(|i| {
            let state = ToyState(i % table.n_states());
            let t = sample_episode(policy, table, state, rng);
            let prompt = &table.prompts()[state.0];
            CorpusRecord {
                id: format!("sim-{i:05}"),
                question: prompt.question.clone(),
                options: prompt.options.clone(),
                gold: prompt.gold,
                response: t.rendered_text.to_string(),
            }
        })
        .collect()
}
