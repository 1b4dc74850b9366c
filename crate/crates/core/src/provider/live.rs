use serde_json::{json, Value};

use super::{CompletionRequest, Provider, ProviderConfig, ProviderError};

/// OpenAI-compatible chat-completions client.
pub struct LiveProvider {
    agent: ureq::Agent,
    url: String,
    key_env: String,
    id: String,
}

impl LiveProvider {
    pub fn new(config: &ProviderConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout()).build();
        LiveProvider {
            agent,
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            key_env: config.api_key_env.clone(),
            id: format!("live:{}", config.model_name),
        }
    }
}

impl Provider for LiveProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest, _iteration: u32) -> Result<String, ProviderError> {
        let key = std::env::var(&self.key_env).map_err(|_| ProviderError::MissingKey(self.key_env.clone()))?;
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let response = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {key}"))
            .send_json(body);
        let value: Value = match response {
            Ok(r) => r.into_json().map_err(|e| ProviderError::BadResponse(e.to_string()))?,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(ProviderError::Http { status, body: body.chars().take(500).collect() });
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                return Err(if msg.contains("timed out") || msg.contains("Timeout") {
                    ProviderError::Timeout
                } else {
                    ProviderError::Transport(msg)
                });
            }
        };
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::BadResponse("no choices[0].message.content".into()))
    }
}
