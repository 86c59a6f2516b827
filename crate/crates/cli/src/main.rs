//! `reward-forge` command-line front end.
//!
//! Exit codes: 0 success, 1 partial or data errors, 2 usage or config errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use reward_forge::RewardMode;

#[derive(Parser)]
#[command(name = "reward-forge", version, about = "Composite reward scoring, threshold sweeps and a toy REINFORCE simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct RewardArgs {
    /// Reward config JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the remote embedding service at this base URL.
    #[arg(long, env = "REWARD_FORGE_EMBED_URL")]
    pub embed_url: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score a JSON-lines corpus and print the violation report.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        reward: RewardArgs,
        /// Worker threads for scoring.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Violation rates over a grid of thresholds, as CSV.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        reward: RewardArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.6])]
        tau_answer_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![40, 45, 50])]
        tau_preamble_grid: Vec<usize>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Train the toy policy and write its learning curve as CSV.
    Simulate {
        /// Train config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reward config JSON used to score the rendered responses.
        #[arg(long)]
        reward_config: Option<PathBuf>,
        #[arg(long, env = "REWARD_FORGE_EMBED_URL")]
        embed_url: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Also sample a corpus from the trained policy.
        #[arg(long)]
        corpus_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        corpus_size: usize,
    },
    /// Send every corpus response to a judge model.
    Judge {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Judge config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        judge_url: Option<String>,
        /// Requests in flight; overrides the config.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Per-criterion Pearson r between two judge result files.
    Agree {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chi-square goodness of fit of preference counts against a uniform null.
    Prefstats {
        response1: u64,
        response2: u64,
        both: u64,
        neither: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Composite,
    Binary,
}

impl From<ModeArg> for RewardMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Composite => RewardMode::Composite,
            ModeArg::Binary => RewardMode::BinaryOnly,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score { corpus, out, reward, jobs } => commands::score(&corpus, &out, &reward, jobs),
        Command::Sweep { corpus, out, reward, tau_answer_grid, tau_preamble_grid, jobs } => {
            commands::sweep(&corpus, &out, &reward, &tau_answer_grid, &tau_preamble_grid, jobs)
        }
        Command::Simulate { config, reward_config, embed_url, out, seed, mode, corpus_out, corpus_size } => {
            let reward = RewardArgs { config: reward_config, embed_url };
            commands::simulate(commands::SimulateArgs {
                config: config.as_deref(),
                reward: &reward,
                out: &out,
                seed,
                mode: mode.map(Into::into),
                corpus_out: corpus_out.as_deref(),
                corpus_size,
            })
        }
        Command::Judge { corpus, out, config, judge_url, jobs } => {
            commands::judge(&corpus, &out, config.as_deref(), judge_url.as_deref(), jobs)
        }
        Command::Agree { first, second, out } => commands::agree(&first, &second, &out),
        Command::Prefstats { response1, response2, both, neither } => {
            commands::prefstats(response1, response2, both, neither)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
