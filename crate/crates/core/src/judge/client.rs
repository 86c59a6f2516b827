use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{build_judge_prompt, parse_judge_scores, JudgeScores};
use crate::choice::ChoiceLabel;
use crate::error::{Error, Result};
use crate::transport::JsonClient;

/// Environment variable holding the judge API key.
pub const JUDGE_KEY_ENV: &str = "REWARD_FORGE_JUDGE_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeConfig {
    /// Chat-completions style endpoint.
    pub url: Option<String>,
    pub model: String,
    /// Label written into each result line.
    pub judge_name: String,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            url: None,
            model: "judge".into(),
            judge_name: "judge".into(),
            max_in_flight: 4,
            timeout_secs: 60,
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// Blocking client for a remote judge model.
pub struct JudgeClient {
    url: String,
    key: Option<String>,
    cfg: JudgeConfig,
    http: JsonClient,
}

impl std::fmt::Debug for JudgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JudgeClient")
            .field("url", &self.url)
            .field("has_key", &self.key.is_some())
            .field("cfg", &self.cfg)
            .finish()
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Pull the assistant text out of a chat-completions style reply. Falls back
/// to a bare `content` string, then to the whole body.
fn reply_content(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<Value>(body) else {
        return body.to_string();
    };
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/message/content"),
        v.get("content"),
    ];
    let found = candidates.into_iter().flatten().find_map(Value::as_str);
    found.map_or_else(|| body.to_string(), str::to_string)
}

impl JudgeClient {
    /// `url` overrides the config; the key is read from [`JUDGE_KEY_ENV`].
    pub fn new(cfg: JudgeConfig, url: Option<&str>) -> Result<Self> {
        let url = url
            .map(str::to_string)
            .or_else(|| cfg.url.clone())
            .ok_or_else(|| Error::usage("no judge URL configured"))?;
        if cfg.max_in_flight == 0 || cfg.max_attempts == 0 {
            return Err(Error::usage("max_in_flight and max_attempts must be positive"));
        }
        let key = std::env::var(JUDGE_KEY_ENV).ok().filter(|k| !k.is_empty());
        let http = JsonClient::new(Duration::from_secs(cfg.timeout_secs));
        Ok(JudgeClient { url, key, cfg, http })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    /// Send one prompt and return the raw reply text, retrying 429 and 5xx
    /// responses and connection failures with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let mut last = Error::transport("judge was never called");
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            match self.http.post(&self.url, self.key.as_deref(), &body) {
                Ok((200, text)) => return Ok(reply_content(&text)),
                Ok((status, text)) if retryable(status) => {
                    log::warn!("judge returned {status}, attempt {}", attempt + 1);
                    last = Error::transport(format!("judge returned {status}: {text}"));
                }
                Ok((status, text)) => {
                    return Err(Error::transport(format!("judge returned {status}: {text}")));
                }
                Err(e) => {
                    log::warn!("judge request failed: {e}");
                    last = e;
                }
            }
        }
        Err(last)
    }

    /// Judge one response against its gold letter.
    pub fn evaluate(&self, response_text: &str, gold: ChoiceLabel) -> Result<JudgeScores> {
        parse_judge_scores(&self.complete(&build_judge_prompt(response_text, gold))?)
    }

    /// Judge many responses with at most `max_in_flight` concurrent requests.
    /// Results keep the input order.
    pub fn evaluate_many(&self, items: &[(&str, ChoiceLabel)]) -> Vec<Result<JudgeScores>> {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(self.cfg.max_in_flight).build() {
            Ok(p) => p,
            Err(e) => return items.iter().map(|_| Err(Error::transport(e.to_string()))).collect(),
        };
        use rayon::prelude::*;
        pool.install(|| items.par_iter().map(|(text, gold)| self.evaluate(text, *gold)).collect())
    }
}
