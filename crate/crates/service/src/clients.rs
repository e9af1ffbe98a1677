//! Blocking HTTP clients for the chat-completion service and the embedding
//! provider.

use std::time::Duration;

use judgematch::embedding::{parse_embeddings, EmbeddingSet};
use judgematch::llm::{ChatClient, ChatError, ChatRequest};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    pub fn new(base_url: &str, api_key: Option<String>) -> ServiceResult<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ServiceError::Http(e.to_string()))?;
        Ok(HttpChatClient { http, url: format!("{}/chat/completions", base_url.trim_end_matches('/')), api_key })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let mut req = self.http.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ChatError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ChatError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ChatError::Fatal(format!("HTTP {status}: {body}")));
        }
        let body: ChatResponse = resp.json().map_err(|e| ChatError::Fatal(format!("bad response body: {e}")))?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ChatError::Fatal("response has no message content".into()))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

/// Fetch token embeddings for `(doc_id, text)` pairs from `POST <url>/embed`.
/// The provider answers with one embedding record per text, in order; the
/// records are re-keyed with our doc ids.
pub fn fetch_embeddings(
    url: &str,
    docs: &[(String, String)],
    batch_size: usize,
    special_tokens: &[String],
) -> ServiceResult<EmbeddingSet> {
    let http = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(300))
        .build()
        .map_err(|e| ServiceError::Http(e.to_string()))?;
    let endpoint = format!("{}/embed", url.trim_end_matches('/'));
    let mut lines = String::new();
    for chunk in docs.chunks(batch_size.max(1)) {
        let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
        let resp = http
            .post(&endpoint)
            .json(&EmbedRequest { texts: &texts })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| ServiceError::Http(format!("{endpoint}: {e}")))?;
        let records: Vec<serde_json::Value> =
            resp.json().map_err(|e| ServiceError::Http(format!("{endpoint}: bad body: {e}")))?;
        if records.len() != chunk.len() {
            return Err(ServiceError::Http(format!(
                "{endpoint}: sent {} texts, got {} records",
                chunk.len(),
                records.len()
            )));
        }
        for (mut rec, (doc_id, _)) in records.into_iter().zip(chunk) {
            rec["doc_id"] = serde_json::Value::String(doc_id.clone());
            lines.push_str(&serde_json::to_string(&rec)?);
            lines.push('\n');
        }
    }
    Ok(parse_embeddings(lines.as_bytes(), special_tokens)?)
}
