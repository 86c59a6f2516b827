use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use reward_forge::judge::{agreement, chi_square_gof, JudgeClient, JudgeConfig, JudgeRecord, PreferenceCounts};
use reward_forge::metrics::{outcome_json, read_corpus, write_sweep_csv, CorpusRecord};
use reward_forge::reward::EmbedderSpec;
use reward_forge::sim::{generate_corpus, train, CurvePoint, RewardTable, TrainConfig};
use reward_forge::{compute_report, score_corpus, threshold_sweep, Error, RewardConfig, RewardMode, RewardModel};

use crate::manifest::RunManifest;
use crate::RewardArgs;

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_usage() { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::usage(format!("cannot open {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, Failure> {
    Ok(read_corpus(open(path)?)?)
}

fn resolve_reward_config(args: &RewardArgs) -> Result<RewardConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => RewardConfig::from_json(&read_text(p)?)?,
        None => RewardConfig::default(),
    };
    if let Some(url) = &args.embed_url {
        cfg.embedder = EmbedderSpec::Http { url: Some(url.clone()) };
    }
    for w in cfg.validate()? {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("summary serializes"));
}

pub fn score(corpus: &Path, out: &Path, reward: &RewardArgs, jobs: Option<usize>) -> CmdResult {
    let cfg = resolve_reward_config(reward)?;
    let records = load_corpus(corpus)?;
    if records.is_empty() {
        return Err(Failure::usage("empty corpus"));
    }
    let digest_src = cfg.to_json();
    let model = RewardModel::from_config(cfg)?;
    let outcomes = score_corpus(&records, &model, jobs)?;

    let mut w = create(out)?;
    for o in &outcomes {
        writeln!(w, "{}", outcome_json(o))?;
    }
    w.flush()?;

    let errors: Vec<_> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    for e in &errors {
        eprintln!("record {}: {}", e.id, e.error);
    }
    let report = compute_report(outcomes.iter().filter_map(|o| o.as_ref().ok()))?;
    let mut summary = serde_json::to_value(&report).expect("report serializes");
    summary["errors"] = json!(errors.len());
    print_json(&summary);

    RunManifest::new("score", &digest_src, None).input(corpus).output(out).write(out)?;
    Ok(u8::from(!errors.is_empty()))
}

pub fn sweep(
    corpus: &Path,
    out: &Path,
    reward: &RewardArgs,
    tau_answer_grid: &[f64],
    tau_preamble_grid: &[usize],
    jobs: Option<usize>,
) -> CmdResult {
    let cfg = resolve_reward_config(reward)?;
    let records = load_corpus(corpus)?;
    if records.is_empty() {
        return Err(Failure::usage("empty corpus"));
    }
    let digest_src = json!({
        "reward": serde_json::from_str::<Value>(&cfg.to_json()).expect("config is JSON"),
        "tau_answer_grid": tau_answer_grid,
        "tau_preamble_grid": tau_preamble_grid,
    })
    .to_string();
    let model = RewardModel::from_config(cfg)?;
    let rows = threshold_sweep(&records, &model, tau_answer_grid, tau_preamble_grid, jobs)?;
    let mut w = create(out)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    print_json(&rows);
    RunManifest::new("sweep", &digest_src, None).input(corpus).output(out).write(out)?;
    Ok(0)
}

pub struct SimulateArgs<'a> {
    pub config: Option<&'a Path>,
    pub reward: &'a RewardArgs,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub mode: Option<RewardMode>,
    pub corpus_out: Option<&'a Path>,
    pub corpus_size: usize,
}

pub fn simulate(a: SimulateArgs<'_>) -> CmdResult {
    let mut tc = match a.config {
        Some(p) => TrainConfig::from_json(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        tc.seed = seed;
    }
    if let Some(mode) = a.mode {
        tc.mode = mode;
    }
    tc.validate()?;
    if a.corpus_out.is_some() && a.corpus_size == 0 {
        return Err(Failure::usage("corpus size must be positive"));
    }
    let rc = resolve_reward_config(a.reward)?;
    let digest_src = json!({
        "train": tc,
        "reward": serde_json::from_str::<Value>(&rc.to_json()).expect("config is JSON"),
        "corpus_size": a.corpus_out.map(|_| a.corpus_size),
    })
    .to_string();

    let model = RewardModel::from_config(rc)?;
    let table = RewardTable::build(reward_forge::sim::bundled_prompts(), &model, tc.mode)?;
    let outcome = train(&table, &tc)?;

    let mut w = create(a.out)?;
    CurvePoint::write_csv(&outcome.curve, &mut w)?;
    w.flush()?;

    let mut manifest = RunManifest::new("simulate", &digest_src, Some(tc.seed)).output(a.out);
    if let Some(path) = a.corpus_out {
        // Separate stream of the same seed, so the corpus never perturbs training.
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        rng.set_stream(1);
        let corpus = generate_corpus(&outcome.policy, &table, a.corpus_size, &mut rng);
        let mut cw = create(path)?;
        for r in &corpus {
            writeln!(cw, "{}", serde_json::to_string(r).expect("record serializes"))?;
        }
        cw.flush()?;
        manifest = manifest.output(path);
    }

    print_json(&json!({
        "final_hacking_rate": outcome.final_hacking_mass(),
        "final_mean_reward": outcome.final_expected_reward(&table),
        "mode": tc.mode,
        "seed": tc.seed,
    }));
    manifest.write(a.out)?;
    Ok(0)
}

pub fn judge(corpus: &Path, out: &Path, config: Option<&Path>, url: Option<&str>, jobs: Option<usize>) -> CmdResult {
    let mut cfg: JudgeConfig = match config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Failure::usage(format!("invalid judge config: {e}")))?,
        None => JudgeConfig::default(),
    };
    if let Some(n) = jobs {
        cfg.max_in_flight = n;
    }
    if let Some(u) = url {
        cfg.url = Some(u.to_string());
    }
    let records = load_corpus(corpus)?;
    if records.is_empty() {
        return Err(Failure::usage("empty corpus"));
    }
    let digest_src = serde_json::to_string(&cfg).expect("judge config serializes");
    let judge_name = cfg.judge_name.clone();
    let client = JudgeClient::new(cfg, None)?;

    let items: Vec<(&str, _)> = records.iter().map(|r| (r.response.as_str(), r.gold)).collect();
    let results = client.evaluate_many(&items);

    let mut w = create(out)?;
    let mut failed = 0usize;
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(scores) => {
                let line = JudgeRecord { id: rec.id.clone(), judge_name: judge_name.clone(), scores };
                writeln!(w, "{}", serde_json::to_string(&line).expect("judge record serializes"))?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("record {}: {e}", rec.id);
            }
        }
    }
    w.flush()?;
    print_json(&json!({ "judged": records.len() - failed, "failed": failed, "judge_name": judge_name }));
    RunManifest::new("judge", &digest_src, None).input(corpus).output(out).write(out)?;
    Ok(u8::from(failed > 0))
}

fn read_judge_results(path: &Path) -> Result<Vec<JudgeRecord>, Failure> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Failure::data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn agree(first: &Path, second: &Path, out: &Path) -> CmdResult {
    let a = read_judge_results(first)?;
    let b = read_judge_results(second)?;
    let rows = agreement(&a, &b)?;
    let mut w = create(out)?;
    writeln!(w, "criterion,pearson_r")?;
    let mut summary = serde_json::Map::new();
    for (criterion, r) in &rows {
        match r {
            Some(r) => writeln!(w, "{criterion},{r}")?,
            None => writeln!(w, "{criterion},NaN")?,
        }
        summary.insert(criterion.to_string(), json!(r));
    }
    w.flush()?;
    print_json(&summary);
    RunManifest::new("agree", "{}", None).input(first).input(second).output(out).write(out)?;
    Ok(0)
}

pub fn prefstats(response1: u64, response2: u64, both: u64, neither: u64) -> CmdResult {
    let r = chi_square_gof(&PreferenceCounts { response1, response2, both, neither })?;
    print_json(&r);
    Ok(0)
}
