//! Layered configuration: flags over environment over file over defaults.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{
    BudgetPolicy, DEFAULT_ANSWER_MAX_TOKENS, DEFAULT_FORCING_TEXT, DEFAULT_PER_FORCING_CAP,
    DEFAULT_THINKING_BUDGET,
};
use crate::client::{API_KEY_ENV, BASE_URL_ENV, DEFAULT_SEED, DEFAULT_TEMPERATURE, MAX_RETRIES, TRACE_TOKEN_LIMIT};
use crate::curation::DEFAULT_NGRAM;
use crate::eval::DEFAULT_WORKERS;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub timeout_secs: u64,
    /// Never written to artifacts.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000".into(),
            model: "m1-7b-23k".into(),
            temperature: DEFAULT_TEMPERATURE,
            seed: DEFAULT_SEED,
            timeout_secs: 600,
            api_key: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub thinking_budget: usize,
    pub forcing_count: usize,
    pub per_forcing_cap: usize,
    pub aggregate_forcing_cap: Option<usize>,
    pub forcing_text: String,
    pub answer_max_tokens: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            thinking_budget: DEFAULT_THINKING_BUDGET,
            forcing_count: 0,
            per_forcing_cap: DEFAULT_PER_FORCING_CAP,
            aggregate_forcing_cap: None,
            forcing_text: DEFAULT_FORCING_TEXT.into(),
            answer_max_tokens: DEFAULT_ANSWER_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub workers: usize,
    pub max_retries: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            max_retries: MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationSection {
    pub ngram: usize,
    /// Model names of the difficulty graders.
    pub graders: Vec<String>,
    pub grade_max_tokens: usize,
    /// Model name of the trace generator.
    pub teacher: String,
    pub trace_max_tokens: usize,
}

impl Default for CurationSection {
    fn default() -> Self {
        Self {
            ngram: DEFAULT_NGRAM,
            graders: vec![
                "Qwen2.5-7B-Instruct".into(),
                "Qwen2.5-32B-Instruct".into(),
            ],
            grade_max_tokens: 2048,
            teacher: "deepseek-ai/DeepSeek-R1".into(),
            trace_max_tokens: TRACE_TOKEN_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendSection,
    pub policy: PolicySection,
    pub run: RunSection,
    pub curation: CurationSection,
}

/// One flag per config key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Chat endpoint base URL (env M1_BASE_URL)
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    /// Model name sent to the endpoint
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Sampling temperature
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Sampling seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Per-request timeout in seconds
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
    /// Maximum thinking tokens before the answer is cued
    #[arg(long, global = true)]
    pub thinking_budget: Option<usize>,
    /// Number of times to replace the end-of-think marker with the forcing text
    #[arg(long, global = true)]
    pub forcing_count: Option<usize>,
    /// Token cap on each forced continuation
    #[arg(long, global = true)]
    pub per_forcing_cap: Option<usize>,
    /// Token cap on all forced continuations together
    #[arg(long, global = true)]
    pub aggregate_forcing_cap: Option<usize>,
    /// Text injected at each forcing
    #[arg(long, global = true)]
    pub forcing_text: Option<String>,
    /// Token cap on the final answer
    #[arg(long, global = true)]
    pub answer_max_tokens: Option<usize>,
    /// Concurrent requests
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Retries per request on transient failures
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Decontamination window in words
    #[arg(long, global = true)]
    pub ngram: Option<usize>,
    /// Comma-separated grader model names
    #[arg(long, global = true, value_delimiter = ',')]
    pub graders: Option<Vec<String>>,
    /// Token cap on grader responses
    #[arg(long, global = true)]
    pub grade_max_tokens: Option<usize>,
    /// Model that writes reasoning traces
    #[arg(long, global = true)]
    pub teacher: Option<String>,
    /// Token cap on generated traces
    #[arg(long, global = true)]
    pub trace_max_tokens: Option<usize>,
}

fn set<T>(slot: &mut T, v: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = v {
        *slot = v.clone();
    }
}

/// Builds the effective configuration. `env` looks up environment
/// variables.
pub fn load_config(
    path: Option<&Path>,
    env: impl Fn(&str) -> Option<String>,
    flags: &ConfigFlags,
) -> Result<Config, ConfigError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            toml::from_str::<Config>(&text).map_err(|e| ConfigError::Parse {
                path: p.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => Config::default(),
    };

    if let Some(url) = env(BASE_URL_ENV).filter(|s| !s.is_empty()) {
        cfg.backend.base_url = url;
    }
    cfg.backend.api_key = env(API_KEY_ENV).filter(|s| !s.is_empty());

    let b = &mut cfg.backend;
    set(&mut b.base_url, &flags.base_url);
    set(&mut b.model, &flags.model);
    set(&mut b.temperature, &flags.temperature);
    set(&mut b.seed, &flags.seed);
    set(&mut b.timeout_secs, &flags.timeout_secs);
    let p = &mut cfg.policy;
    set(&mut p.thinking_budget, &flags.thinking_budget);
    set(&mut p.forcing_count, &flags.forcing_count);
    set(&mut p.per_forcing_cap, &flags.per_forcing_cap);
    if flags.aggregate_forcing_cap.is_some() {
        p.aggregate_forcing_cap = flags.aggregate_forcing_cap;
    }
    set(&mut p.forcing_text, &flags.forcing_text);
    set(&mut p.answer_max_tokens, &flags.answer_max_tokens);
    set(&mut cfg.run.workers, &flags.workers);
    set(&mut cfg.run.max_retries, &flags.max_retries);
    let c = &mut cfg.curation;
    set(&mut c.ngram, &flags.ngram);
    set(&mut c.graders, &flags.graders);
    set(&mut c.grade_max_tokens, &flags.grade_max_tokens);
    set(&mut c.teacher, &flags.teacher);
    set(&mut c.trace_max_tokens, &flags.trace_max_tokens);

    cfg.check()?;
    Ok(cfg)
}

impl Config {
    fn check(&self) -> Result<(), ConfigError> {
        let bad = |key, message: &str| {
            Err(ConfigError::Value {
                key,
                message: message.to_owned(),
            })
        };
        if self.run.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        if self.curation.ngram == 0 {
            return bad("ngram", "must be at least 1");
        }
        if !(self.backend.temperature >= 0.0) {
            return bad("temperature", "must be >= 0");
        }
        self.policy()
            .validate()
            .or_else(|e| bad("policy", &e.to_string()))
    }

    pub fn policy(&self) -> BudgetPolicy {
        let p = &self.policy;
        BudgetPolicy {
            thinking_budget: p.thinking_budget,
            forcing_count: p.forcing_count,
            forcing_text: p.forcing_text.clone(),
            per_forcing_cap: p.per_forcing_cap,
            aggregate_forcing_cap: p.aggregate_forcing_cap,
            answer_max_tokens: p.answer_max_tokens,
            temperature: self.backend.temperature,
            seed: self.backend.seed,
            ..BudgetPolicy::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::io::Write;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults() {
        let c = load_config(None, no_env, &ConfigFlags::default()).unwrap();
        assert_eq!(c.backend.temperature, 0.0);
        assert_eq!(c.backend.seed, 42);
        assert_eq!(c.policy.thinking_budget, 4096);
        assert_eq!(c.policy.forcing_count, 0);
        assert_eq!(c.policy.per_forcing_cap, 2048);
        assert_eq!(c.policy.forcing_text, "Wait.");
        assert_eq!(c.run.workers, 8);
    }

    #[test]
    fn flag_beats_env_beats_file() {
        let f = file("[backend]\nseed = 42\nbase_url = \"http://file\"\n");
        let env: HashMap<&str, &str> = [("M1_BASE_URL", "http://env")].into();
        let lookup = |k: &str| env.get(k).map(|s| s.to_string());
        let flags = ConfigFlags { seed: Some(7), ..Default::default() };
        let c = load_config(Some(f.path()), lookup, &flags).unwrap();
        assert_eq!(c.backend.seed, 7);
        assert_eq!(c.backend.base_url, "http://env");
        let flags = ConfigFlags { base_url: Some("http://flag".into()), ..Default::default() };
        let c = load_config(Some(f.path()), lookup, &flags).unwrap();
        assert_eq!(c.backend.base_url, "http://flag");
        assert_eq!(c.backend.seed, 42);
    }

    #[test]
    fn unknown_key_named() {
        let f = file("[backend]\ntemprature = 0.5\n");
        let err = load_config(Some(f.path()), no_env, &ConfigFlags::default()).unwrap_err();
        assert!(err.to_string().contains("temprature"), "{err}");
    }

    #[test]
    fn api_key_not_serialized() {
        let lookup = |k: &str| (k == "M1_API_KEY").then(|| "secret".to_string());
        let c = load_config(None, lookup, &ConfigFlags::default()).unwrap();
        assert_eq!(c.backend.api_key.as_deref(), Some("secret"));
        assert!(!serde_json::to_string(&c).unwrap().contains("secret"));
    }

    #[test]
    fn invalid_values_rejected() {
        let flags = ConfigFlags { workers: Some(0), ..Default::default() };
        assert!(load_config(None, no_env, &flags).is_err());
        let flags = ConfigFlags { thinking_budget: Some(0), ..Default::default() };
        assert!(load_config(None, no_env, &flags).is_err());
    }
}
