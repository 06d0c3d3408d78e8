use std::sync::OnceLock;
use std::time::Duration;

use serde_json::{json, Value};

use super::{ExtractionMethod, LocationCandidate, LocationError, LocationExtractor};

pub const SYSTEM_PROMPT: &str = "You extract locations from user questions about floods. \
Reply with only the single most likely place name mentioned in the message, as plain text \
with no punctuation or explanation. If the message names no place, reply NONE.";

/// One chat-completion round trip: system prompt plus user text in, reply
/// text out.
pub trait ChatClient: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String, String>;
}

/// LLM-backed extractor. The reply is taken verbatim as the place name after
/// trimming whitespace, quotes and periods from both ends.
pub struct LlmExtractor<C> {
    client: C,
}

impl<C: ChatClient> LlmExtractor<C> {
    pub fn new(client: C) -> Self {
        LlmExtractor { client }
    }
}

fn clean_reply(reply: &str) -> &str {
    reply.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '.'))
}

impl<C: ChatClient> LocationExtractor for LlmExtractor<C> {
    fn extract(&self, text: &str) -> Result<LocationCandidate, LocationError> {
        let reply = self
            .client
            .complete(SYSTEM_PROMPT, text)
            .map_err(LocationError::BackendUnavailable)?;
        let name = clean_reply(&reply);
        if name.is_empty() || name.eq_ignore_ascii_case("none") {
            return Err(LocationError::NoLocationFound);
        }
        LocationCandidate::new(name, 1.0, ExtractionMethod::Llm)
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct OpenAiChatClient {
    endpoint: String,
    api_key: String,
    model: String,
    http: OnceLock<reqwest::blocking::Client>,
}

impl OpenAiChatClient {
    pub fn new(endpoint: &str, api_key: &str, model: &str) -> Self {
        OpenAiChatClient {
            endpoint: endpoint.to_owned(),
            api_key: api_key.to_owned(),
            model: model.to_owned(),
            http: OnceLock::new(),
        }
    }

    // built on first use so construction is safe inside an async runtime
    fn http(&self) -> &reqwest::blocking::Client {
        self.http.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("http client")
        })
    }
}

impl ChatClient for OpenAiChatClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let resp = self
            .http()
            .post(format!("{}/chat/completions", self.endpoint.trim_end_matches('/')))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("chat endpoint returned {}", resp.status()));
        }
        let v: Value = resp.json().map_err(|e| e.to_string())?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| "reply has no message content".to_owned())
    }
}
