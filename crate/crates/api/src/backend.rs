//! Generation backend that talks to a chat-completion style model server
//! (`POST {url}/v1/chat/completions`).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use vocab_core::refinement::{GenerationBackend, GenerationRequest, GenerationResult, Unavailable};

#[derive(Debug, Clone)]
pub struct ChatCompletionBackend {
    id: String,
    endpoint: String,
    model: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    max_tokens: u32,
    temperature: f32,
    stream: bool,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

impl ChatCompletionBackend {
    pub fn new(base_url: &str, model: &str, timeout: Duration) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build()?;
        Ok(Self {
            id: format!("chat:{model}"),
            endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_owned(),
            client,
        })
    }
}

impl GenerationBackend for ChatCompletionBackend {
    fn id(&self) -> &str {
        &self.id
    }

    /// Connection errors, timeouts and 5xx answers are transport failures
    /// (retried by the caller); a 4xx answer or an empty completion is a
    /// recorded generation failure.
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, Unavailable> {
        let started = Instant::now();
        let body = ChatRequest {
            model: &self.model,
            messages: [Message {
                role: "user",
                content: &request.prompt,
            }],
            max_tokens: request.params.max_tokens,
            temperature: request.params.temperature,
            stream: false,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .map_err(|e| Unavailable(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(Unavailable(format!("model server answered {status}")));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Ok(GenerationResult::failure(
                &self.id,
                started.elapsed(),
                format!("model server answered {status}: {}", text.trim()),
            ));
        }
        let parsed: ChatResponse = match response.json() {
            Ok(parsed) => parsed,
            Err(e) => {
                return Ok(GenerationResult::failure(
                    &self.id,
                    started.elapsed(),
                    format!("unreadable completion: {e}"),
                ))
            }
        };
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|c| c.trim().to_owned())
            .unwrap_or_default();
        let latency = started.elapsed();
        Ok(if content.is_empty() {
            GenerationResult::failure(&self.id, latency, "model returned no text")
        } else {
            GenerationResult::success(&self.id, latency, content)
        })
    }
}
