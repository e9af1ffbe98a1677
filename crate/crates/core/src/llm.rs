//! Chat-model base learner: prompt assembly, response parsing, retries and
//! an offline score cache. Transport lives behind [`ChatClient`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";

/// System instruction sent with every request.
pub const INSTRUCTION: &str = "You are a manual assigner who is responsible for assigning judges to ventures for a venture competition. You are given two blocks of text, D1 being the venture and D2 being the judge. You need to assess whether the judge is a good match to the venture considering whether the judge has technical expertise in the venture's area. Rate the match on a scale of 1-5 (5 is good, 1 is bad). Internalize your reasoning and only output a number between 1 to 5.";

pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotExample {
    pub venture_text: String,
    pub judge_text: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub model: String,
    pub temperature: f64,
    pub examples: Vec<ShotExample>,
}

impl PromptConfig {
    pub fn zero_shot() -> Self {
        PromptConfig { model: DEFAULT_MODEL.to_string(), temperature: 0.0, examples: vec![] }
    }

    pub fn shots(&self) -> usize {
        self.examples.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature != 0.0 {
            return Err(Error::InvalidInput("temperature must be exactly 0".into()));
        }
        if self.shots() > 2 {
            return Err(Error::InvalidInput("at most 2 worked examples are supported".into()));
        }
        if let Some(e) = self.examples.iter().find(|e| !(1..=5).contains(&e.score)) {
            return Err(Error::InvalidInput(format!("example score {} outside 1..=5", e.score)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: String) -> Self {
        ChatMessage { role: role.to_string(), content }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

fn pair_block(venture: &str, judge: &str) -> String {
    format!("D1: {venture}\nD2: {judge}")
}

/// Instruction as system message, each worked example as a user/assistant
/// exchange, then the pair to score.
pub fn build_request(venture_text: &str, judge_text: &str, cfg: &PromptConfig) -> ChatRequest {
    let mut messages = vec![ChatMessage::new("system", INSTRUCTION.to_string())];
    for ex in &cfg.examples {
        messages.push(ChatMessage::new("user", pair_block(&ex.venture_text, &ex.judge_text)));
        messages.push(ChatMessage::new("assistant", ex.score.to_string()));
    }
    messages.push(ChatMessage::new("user", pair_block(venture_text, judge_text)));
    ChatRequest { model: cfg.model.clone(), temperature: cfg.temperature, messages }
}

fn echo_patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        let mut pats: Vec<String> = vec![regex::escape(INSTRUCTION)];
        pats.extend(
            INSTRUCTION
                .split_inclusive('.')
                .map(str::trim)
                .filter(|s| s.chars().any(|c| c.is_ascii_digit()))
                .map(regex::escape),
        );
        pats.extend([
            r"between\s+1\s+to\s+5".to_string(),
            r"scale\s+of\s+1\s*-\s*5".to_string(),
            r"\(\s*5\s+is\s+good,\s*1\s+is\s+bad\s*\)".to_string(),
            r"\bD[12]\b".to_string(),
        ]);
        pats.iter()
            .map(|p| Regex::new(&format!("(?i){p}")).unwrap())
            .collect()
    })
}

fn integer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?\d+").unwrap())
}

/// First integer in the response after removing echoes of the instruction;
/// must be in `1..=5`.
pub fn parse_score(raw: &str) -> Result<u8> {
    let mut text = raw.to_string();
    for re in echo_patterns() {
        text = re.replace_all(&text, " ").into_owned();
    }
    let err = || Error::UnparseableScore { raw: raw.to_string() };
    let m = integer().find(&text).ok_or_else(err)?;
    let n: i64 = m.as_str().parse().map_err(|_| err())?;
    if (1..=5).contains(&n) {
        Ok(n as u8)
    } else {
        Err(err())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChatError {
    /// Network failures and timeouts; retried.
    Transient(String),
    Fatal(String),
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, ChatError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub score: u8,
    pub attempts: usize,
    pub request: ChatRequest,
    pub raw_response: String,
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: MAX_ATTEMPTS, base_delay: Duration::from_millis(500) }
    }
}

/// Score one venture–judge pair. Transient failures are retried with
/// exponential backoff; an unparseable reply is returned as an error
/// carrying the raw text.
pub fn score_pair(
    client: &dyn ChatClient,
    venture_text: &str,
    judge_text: &str,
    cfg: &PromptConfig,
    retry: RetryPolicy,
) -> Result<ScoredPair> {
    cfg.validate()?;
    if venture_text.trim().is_empty() || judge_text.trim().is_empty() {
        return Err(Error::InvalidInput("cannot score an empty document".into()));
    }
    let request = build_request(venture_text, judge_text, cfg);
    let mut last = String::new();
    for attempt in 1..=retry.attempts.max(1) {
        match client.complete(&request) {
            Ok(raw) => {
                let score = parse_score(&raw)?;
                return Ok(ScoredPair { score, attempts: attempt, request, raw_response: raw });
            }
            Err(ChatError::Fatal(m)) => return Err(Error::Service { attempts: attempt, message: m }),
            Err(ChatError::Transient(m)) => {
                last = m;
                if attempt < retry.attempts {
                    std::thread::sleep(retry.base_delay * (1u32 << (attempt - 1)));
                }
            }
        }
    }
    Err(Error::Service { attempts: retry.attempts.max(1), message: last })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedScore {
    pub judge_id: String,
    pub venture_id: String,
    pub shots: usize,
    pub score: u8,
}

/// Replayable scores keyed by (judge, venture, shots).
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    entries: BTreeMap<(String, String, usize), u8>,
}

impl ScoreCache {
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut cache = ScoreCache::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CachedScore = serde_json::from_str(&line)?;
            cache.insert(rec);
        }
        Ok(cache)
    }

    pub fn get(&self, judge_id: &str, venture_id: &str, shots: usize) -> Option<u8> {
        self.entries
            .get(&(judge_id.to_string(), venture_id.to_string(), shots))
            .copied()
    }

    pub fn insert(&mut self, rec: CachedScore) {
        self.entries.insert((rec.judge_id, rec.venture_id, rec.shots), rec.score);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for ((j, v, shots), score) in &self.entries {
            let rec = CachedScore { judge_id: j.clone(), venture_id: v.clone(), shots: *shots, score: *score };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
