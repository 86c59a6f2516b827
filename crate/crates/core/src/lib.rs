//! Composite reward scoring for structured multiple-choice answers.
//!
//! A response is expected as `<think>reasoning</think><answer>X</answer>`.
//! [`reward`] scores it with a correctness term minus two hack penalties
//! (a semantic answer-leak check on the think block and a word-count check
//! on text placed before it). [`metrics`] aggregates violation rates over
//! corpora, [`sim`] trains a toy REINFORCE policy against the reward, and
//! [`judge`] covers LLM-as-a-judge prompting and agreement statistics.

pub mod choice;
pub mod embedding;
pub mod error;
pub mod parser;
pub mod reward;
mod transport;

pub use choice::{ChoiceLabel, ChoiceUniverse};
pub use embedding::{
    cosine_similarity, fallback_embed, max_leak_similarity, Embedder, EmbeddingVector,
    FallbackEmbedder, HttpEmbedder, LeakPhraseSet,
};
pub use error::{Error, Result};
pub use parser::{count_preamble_words, is_format_compliant, parse_response, ParsedResponse};
pub use reward::{
    answer_penalty, binary_reward, composite_reward, structural_penalty, RewardBreakdown,
    RewardConfig, RewardMode, RewardModel,
};

pub mod judge;
pub mod metrics;
pub mod sim;

pub use metrics::{
    compute_report, score_corpus, threshold_sweep, CorpusRecord, MetricsReport, ScoredRecord,
};
pub use judge::{
    build_judge_prompt, chi_square_gof, parse_judge_scores, pearson_correlation, JudgeScores,
    PreferenceCounts,
};
