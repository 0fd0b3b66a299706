use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{check_status, transport_error, ChatRequest, ChatTransport};
use crate::error::{Error, Result};

/// `POST {base_url}/v1/chat/completions`, non-streaming.
#[derive(Debug, Clone)]
pub struct OpenAiChat {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CompletionResponse {
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

impl OpenAiChat {
    pub fn new(base_url: &str, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiChat {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            agent,
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url)
    }

    pub fn request_body(&self, request: &ChatRequest, temperature: f64) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        })
    }
}

impl ChatTransport for OpenAiChat {
    fn identity(&self) -> String {
        format!("openai:{}:{}", self.base_url, self.model)
    }

    fn chat(&self, request: &ChatRequest, temperature: f64) -> Result<String> {
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.request_body(request, temperature))
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        check_status(status, &text)?;
        let parsed: CompletionResponse = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedResponse(format!("chat completion: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::MalformedResponse("no choices[0].message.content".into()))
    }
}
