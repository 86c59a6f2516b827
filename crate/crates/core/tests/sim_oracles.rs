use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reward_forge::sim::*;
use reward_forge::RewardMode;

fn table() -> RewardTable {
    RewardTable::bundled(RewardMode::Composite)
}

fn skewed(n_states: usize) -> ToyPolicy {
    let mut p = ToyPolicy::uniform(n_states, 4);
    for s in 0..n_states {
        p.behavior_logits[s] = [0.7, -0.4, 0.2];
        p.answer_logits[s] = vec![0.3, -1.1, 0.8, 0.0];
    }
    p
}

#[test]
fn finite_differences_agree_at_three_settings() {
    let t = table();
    let uniform = ToyPolicy::uniform(t.n_states(), t.n_choices());
    let mut saturated = uniform.clone();
    for s in 0..t.n_states() {
        saturated.behavior_logits[s] = [10.0, 0.0, 0.0];
    }
    for (name, pol, tol) in [("uniform", &uniform, 1e-6), ("skewed", &skewed(t.n_states()), 1e-5), ("saturated", &saturated, 1e-5)] {
        for s in 0..t.n_states() {
            let err = grad_check(pol, ToyState(s), &t, 1e-5);
            assert!(err < tol, "{name} state {s}: {err}");
        }
    }
}

#[test]
fn monte_carlo_gradient_is_unbiased() {
    let t = table();
    let pol = skewed(t.n_states());
    let s = ToyState(0);
    let exact = analytic_gradient(&pol, s, &t);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let k = exact.len();
    let (mut sum, mut sq) = (vec![0.0; k], vec![0.0; k]);
    for _ in 0..n {
        let tr = sample_episode(&pol, &t, s, &mut rng);
        for (i, g) in score_function_gradient(&pol, &tr).into_iter().enumerate() {
            sum[i] += g;
            sq[i] += g * g;
        }
    }
    let nf = n as f64;
    for i in 0..k {
        let mean = sum[i] / nf;
        let se = ((sq[i] / nf - mean * mean) / nf).sqrt();
        assert!((mean - exact[i]).abs() <= 3.0 * se, "param {i}: {mean} vs {} (se {se})", exact[i]);
    }
}

#[test]
fn expected_reward_is_a_convex_combination() {
    let t = table();
    let pol = skewed(t.n_states());
    for s in 0..t.n_states() {
        let (lo, hi) = t.min_max_reward(ToyState(s));
        let j = exact_expected_reward(&pol, ToyState(s), &t);
        assert!(lo <= j && j <= hi);
    }
}

#[test]
fn baseline_converges_to_expected_reward() {
    let t = table();
    let pol = skewed(t.n_states());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = train_baseline(&pol, BaselineModel::zeros(t.n_states()), &t, 1024, 5000, 0.05, &mut rng);
    for s in 0..t.n_states() {
        let j = exact_expected_reward(&pol, ToyState(s), &t);
        assert!((b.value(ToyState(s)) - j).abs() < 0.02, "state {s}: {} vs {j}", b.value(ToyState(s)));
    }
}

#[test]
fn trained_baseline_reduces_gradient_variance() {
    let t = table();
    let pol = skewed(t.n_states());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = train_baseline(&pol, BaselineModel::zeros(t.n_states()), &t, 1024, 2000, 0.05, &mut rng);
    let s = ToyState(1);
    let samples: Vec<Trajectory> = (0..20_000).map(|_| sample_episode(&pol, &t, s, &mut rng)).collect();
    let total_variance = |baseline: f64| {
        let grads: Vec<Vec<f64>> = samples
            .iter()
            .map(|tr| {
                let mut tr = tr.clone();
                tr.set_baseline(baseline);
                score_function_gradient(&pol, &tr)
            })
            .collect();
        let n = grads.len() as f64;
        (0..grads[0].len())
            .map(|i| {
                let m = grads.iter().map(|g| g[i]).sum::<f64>() / n;
                grads.iter().map(|g| (g[i] - m).powi(2)).sum::<f64>() / n
            })
            .sum::<f64>()
    };
    assert!(total_variance(b.value(s)) <= total_variance(0.0));
}

#[test]
fn composite_training_suppresses_hacking() {
    let t = table();
    let cfg = TrainConfig { seed: 42, ..TrainConfig::default() };
    assert_eq!(cfg.total_episodes(), 2000);
    let out = train(&t, &cfg).unwrap();
    assert!(out.final_hacking_mass() < 0.05, "{}", out.final_hacking_mass());

    let bt = RewardTable::bundled(RewardMode::BinaryOnly);
    let bin = train(&bt, &TrainConfig { mode: RewardMode::BinaryOnly, ..cfg }).unwrap();
    assert!(bin.final_hacking_mass() > out.final_hacking_mass());
}

#[test]
fn identical_configs_give_identical_curves() {
    let t = table();
    let cfg = TrainConfig { batches: 100, ..TrainConfig::default() };
    let a = train(&t, &cfg).unwrap();
    let b = train(&t, &cfg).unwrap();
    let bits = |o: &TrainOutcome| {
        let mut v = Vec::new();
        CurvePoint::write_csv(&o.curve, &mut v).unwrap();
        v
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn binary_mode_scores_leak_with_correct_letter_at_least_as_high() {
    let c = RewardTable::bundled(RewardMode::Composite);
    let b = RewardTable::bundled(RewardMode::BinaryOnly);
    for s in 0..c.n_states() {
        let gold = c.prompts()[s].gold.index();
        let st = ToyState(s);
        assert!(b.reward(st, Behavior::LeakInThink, gold) >= c.reward(st, Behavior::LeakInThink, gold));
        assert!(b.outcome(st, Behavior::LeakInThink, gold).breakdown.p_answer > 0.0);
    }
}
