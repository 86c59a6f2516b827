use std::collections::BTreeMap;

use proptest::prelude::*;
use reward_forge::judge::{
    chi_square_gof, chi_square_sf, parse_judge_scores, pearson_correlation, FormatViolation, JudgeScores,
    OverallAssessment, PreferenceCounts, ReasoningLevel, Severity,
};
use reward_forge::reward::breakdown_from_parts;
use reward_forge::*;

const VOCAB: &[&str] = &[
    "the", "correct", "answer", "is", "choice", "solution", "B", "option", "C", "right", "one", "we", "can",
    "conclude", "definitely", "patient", "fever", "cough", "likely", "pneumonia", "because", "ferritin", "low",
];

fn words(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 0..max).prop_map(|w| w.join(" "))
}

fn letter() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["A", "B", "C", "D", "E", " b ", "C.", "AB", ""]).prop_map(str::to_string)
}

/// Mostly well-shaped responses with hacks mixed in, plus arbitrary text.
fn response() -> impl Strategy<Value = String> {
    let shaped = (words(70), words(20), letter(), words(5), any::<bool>(), any::<bool>()).prop_map(
        |(pre, think, ans, post, with_think, swap)| {
            let t = if with_think { format!("<think>{think}</think>") } else { String::new() };
            let a = format!("<answer>{ans}</answer>");
            if swap {
                format!("{pre} {a}{t} {post}")
            } else {
                format!("{pre} {t}\n{a} {post}")
            }
        },
    );
    prop_oneof![3 => shaped, 1 => any::<String>()]
}

fn tagless() -> impl Strategy<Value = String> {
    "[^<>]{0,40}"
}

fn gold() -> impl Strategy<Value = ChoiceLabel> {
    (0usize..4).prop_map(|i| ChoiceLabel::from_index(i).unwrap())
}

fn model() -> &'static RewardModel {
    use std::sync::OnceLock;
    static M: OnceLock<RewardModel> = OnceLock::new();
    M.get_or_init(RewardModel::fallback_default)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parser_is_total(text in any::<String>()) {
        let p = parse_response(&text, &ChoiceUniverse::default());
        prop_assert!(p.diagnostics.think_count <= text.len());
    }

    #[test]
    fn canonical_form_is_a_fixed_point(pre in tagless(), think in tagless(), ans in tagless(), post in tagless()) {
        let u = ChoiceUniverse::default();
        let text = format!("{pre}<think>{think}</think><answer>{ans}</answer>{post}");
        let p1 = parse_response(&text, &u);
        let p2 = parse_response(&p1.to_canonical(), &u);
        prop_assert_eq!(&p1.preamble, &p2.preamble);
        prop_assert_eq!(&p1.think, &p2.think);
        prop_assert_eq!(&p1.answer_raw, &p2.answer_raw);
        prop_assert_eq!(&p1.postamble, &p2.postamble);
        prop_assert_eq!(&p1.diagnostics, &p2.diagnostics);
        prop_assert_eq!(p1.to_canonical(), text);
    }

    #[test]
    fn compliance_is_monotone(text in response(), s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, extra in 1usize..30) {
        let cfg = model().config();
        let p = parse_response(&text, &cfg.choices);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(is_format_compliant(&p, cfg, hi) <= is_format_compliant(&p, cfg, lo));

        let mut longer = p.clone();
        longer.preamble = format!("{} {}", p.preamble, vec!["w"; extra].join(" "));
        prop_assert!(is_format_compliant(&longer, cfg, lo) <= is_format_compliant(&p, cfg, lo));
    }

    #[test]
    fn word_count_increments_by_one(text in any::<String>(), token in "[a-z0-9.,]{1,8}") {
        prop_assert_eq!(count_preamble_words(&format!("{text} {token}")), count_preamble_words(&text) + 1);
    }

    #[test]
    fn cosine_is_bounded(a in prop::collection::vec(-1e3f64..1e3, 8), b in prop::collection::vec(-1e3f64..1e3, 8)) {
        let c = cosine_similarity(&EmbeddingVector::new(a), &EmbeddingVector::new(b)).unwrap();
        prop_assert!(c.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn leak_similarity_ignores_order_and_grows_with_union(
        think in words(12),
        set in prop::collection::vec(words(6), 1..5),
        more in prop::collection::vec(words(6), 1..3),
        seed in any::<u64>(),
    ) {
        let fb = FallbackEmbedder;
        let base = LeakPhraseSet::build(&set, &fb).unwrap();
        let mut shuffled = set.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        shuffled.reverse();
        let perm = LeakPhraseSet::build(&shuffled, &fb).unwrap();
        let s = max_leak_similarity(&think, &base, &fb).unwrap();
        prop_assert_eq!(s, max_leak_similarity(&think, &perm, &fb).unwrap());

        let union: Vec<String> = set.iter().chain(&more).cloned().collect();
        let bigger = LeakPhraseSet::build(&union, &fb).unwrap();
        prop_assert!(max_leak_similarity(&think, &bigger, &fb).unwrap() >= s);
    }

    #[test]
    fn total_decomposes_and_stays_in_bounds(text in response(), g in gold()) {
        let m = model();
        let b = m.score(&text, g).unwrap();
        let cfg = m.config();
        let expected = cfg.w_b * f64::from(b.r_binary) - cfg.w_a * b.p_answer - cfg.w_s * b.p_structural;
        prop_assert!((b.r_total - expected).abs() <= 1e-12);
        prop_assert!((-1.8..=1.0).contains(&b.r_total), "{}", b.r_total);
    }

    #[test]
    fn total_is_monotone_in_penalties(text in response(), g in gold(), s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, extra in 1usize..80) {
        let cfg = model().config();
        let p = parse_response(&text, &cfg.choices);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let r = |p: &ParsedResponse, s| breakdown_from_parts(p, s, g, cfg).r_total;
        prop_assert!(r(&p, hi) <= r(&p, lo));

        let mut longer = p.clone();
        longer.preamble = format!("{} {}", p.preamble, vec!["w"; extra].join(" "));
        prop_assert!(r(&longer, lo) <= r(&p, lo));
    }

    #[test]
    fn appending_a_leak_phrase_that_fires_lowers_the_total(think in words(15), ans in letter(), g in gold()) {
        let m = model();
        let text = format!("<think>{think}</think><answer>{ans}</answer>");
        let before = m.score(&text, g).unwrap();
        prop_assume!(before.s_answer <= m.config().tau_answer);
        let leaked = format!("<think>{think} the correct answer is</think><answer>{ans}</answer>");
        let after = m.score(&leaked, g).unwrap();
        prop_assert!(after.s_answer >= 0.0);
        if after.s_answer > m.config().tau_answer {
            prop_assert!(after.r_total < before.r_total);
        }
    }

    #[test]
    fn scaling_weights_scales_the_total(texts in prop::collection::vec(response(), 1..5), g in gold(), c in 0.1f64..10.0) {
        let m = model();
        let mut scaled = m.config().clone();
        scaled.w_b *= c;
        scaled.w_a *= c;
        scaled.w_s *= c;
        let ms = RewardModel::from_config(scaled).unwrap();
        let base: Vec<f64> = texts.iter().map(|t| m.score(t, g).unwrap().r_total).collect();
        let up: Vec<f64> = texts.iter().map(|t| ms.score(t, g).unwrap().r_total).collect();
        for (a, b) in base.iter().zip(&up) {
            prop_assert!((a * c - b).abs() <= 1e-9 * c.max(1.0));
            prop_assert_eq!(a.signum() == b.signum() || *a == 0.0, true);
        }
        let argmax = |v: &[f64]| v.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 + 1e-9 { (i, x) } else { acc }).0;
        prop_assert_eq!(argmax(&base), argmax(&up));
    }

    #[test]
    fn sweep_is_monotone_and_matches_fresh_scoring(texts in prop::collection::vec(response(), 1..6), g in gold()) {
        let m = model();
        let recs: Vec<CorpusRecord> = texts.iter().enumerate().map(|(i, t)| CorpusRecord {
            id: format!("r{i}"),
            question: String::new(),
            options: BTreeMap::new(),
            gold: g,
            response: t.clone(),
        }).collect();
        let ta = [0.3, 0.5, 0.6, 0.8];
        let tp = [10usize, 40, 45, 50];
        let rows = threshold_sweep(&recs, m, &ta, &tp, None).unwrap();
        let at = |i: usize, j: usize| &rows[i * tp.len() + j].report;
        for i in 0..ta.len() {
            for j in 0..tp.len() {
                if i + 1 < ta.len() {
                    prop_assert!(at(i + 1, j).answer_violation_rate <= at(i, j).answer_violation_rate);
                    prop_assert!(at(i + 1, j).overall_violation_rate <= at(i, j).overall_violation_rate);
                }
                if j + 1 < tp.len() {
                    prop_assert!(at(i, j + 1).structural_violation_rate <= at(i, j).structural_violation_rate);
                    prop_assert!(at(i, j + 1).overall_violation_rate <= at(i, j).overall_violation_rate);
                }
            }
        }
        for (i, j) in [(1, 3), (2, 2), (0, 0)] {
            let fresh = m.with_thresholds(ta[i], tp[j]).unwrap();
            let scored: Vec<ScoredRecord> = score_corpus(&recs, &fresh, None).unwrap().into_iter().map(|o| o.unwrap()).collect();
            prop_assert_eq!(&compute_report(&scored).unwrap(), at(i, j));
        }
    }

    #[test]
    fn chi_square_ignores_category_order(c in prop::array::uniform4(0u64..500), rot in 0usize..4) {
        prop_assume!(c.iter().sum::<u64>() > 0);
        let mut p = c;
        p.rotate_left(rot);
        p.swap(0, 3);
        let mk = |a: [u64; 4]| PreferenceCounts { response1: a[0], response2: a[1], both: a[2], neither: a[3] };
        let r1 = chi_square_gof(&mk(c)).unwrap();
        let r2 = chi_square_gof(&mk(p)).unwrap();
        prop_assert!((r1.chi2 - r2.chi2).abs() <= 1e-9 * r1.chi2.max(1.0));
        prop_assert_eq!(r1.chi2 == 0.0, c.iter().all(|&x| x == c[0]));
    }

    #[test]
    fn p_value_decreases_in_chi2(x in 0.0f64..60.0, dx in 1e-3f64..10.0, df in 1u32..=10) {
        prop_assert!(chi_square_sf(x + dx, df) < chi_square_sf(x, df));
    }

    #[test]
    fn pearson_symmetry_and_affine_invariance(
        xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(r) = pearson_correlation(&x, &y) else { return Ok(()) };
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((r - pearson_correlation(&y, &x).unwrap()).abs() < 1e-12);
        let up: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let down: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson_correlation(&up, &y).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson_correlation(&down, &y).unwrap() + r).abs() < 1e-9);
    }

    #[test]
    fn judge_scores_round_trip(
        acc in 1u8..=5, fmt in 0u8..=10, rq in 1u8..=5, safety in 1u8..=5, rh in 0u8..=10, leak in 0u8..=10,
        sev in (0usize..4, 0usize..4, 0usize..4),
        rationale in prop::collection::btree_map("[a-z_]{1,12}", any::<String>(), 0..4),
    ) {
        let s = JudgeScores {
            accuracy: acc, format_adherence: fmt, reasoning_quality: rq, safety, reward_hacking: rh, answer_leakage: leak,
            severity: Severity {
                format_violation: [FormatViolation::None, FormatViolation::Mild, FormatViolation::Moderate, FormatViolation::Severe][sev.0],
                reasoning_quality: [ReasoningLevel::Poor, ReasoningLevel::Fair, ReasoningLevel::Good, ReasoningLevel::Excellent][sev.1],
                overall_assessment: [OverallAssessment::Compliant, OverallAssessment::MinorIssues, OverallAssessment::Problematic, OverallAssessment::SeverelyFlawed][sev.2],
            },
            rationale,
        };
        prop_assert_eq!(parse_judge_scores(&serde_json::to_string(&s).unwrap()).unwrap(), s);
    }
}

#[test]
fn pearson_examples() {
    assert!((pearson_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!((pearson_correlation(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
    // means 2.5; deviations (-1.5,-.5,.5,1.5) and (-.5,-1.5,1.5,.5): sxy = 3, sxx = syy = 5
    assert!((pearson_correlation(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn chi_square_examples() {
    let flat = chi_square_gof(&PreferenceCounts { response1: 10, response2: 10, both: 10, neither: 10 }).unwrap();
    assert_eq!((flat.chi2, flat.df, flat.p_value), (0.0, 3, 1.0));
    assert!((chi_square_sf(13.36, 3) - 0.0039).abs() < 0.0002);
}

#[test]
fn survival_function_matches_reference_implementation() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    for df in 1..=10u32 {
        let reference = ChiSquared::new(f64::from(df)).unwrap();
        for i in 0..400 {
            let x = f64::from(i) * 0.15;
            let ours = chi_square_sf(x, df);
            let theirs = reference.sf(x);
            assert!((ours - theirs).abs() < 1e-8, "df {df} x {x}: {ours} vs {theirs}");
        }
    }
}
