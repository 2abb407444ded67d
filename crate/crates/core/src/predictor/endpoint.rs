//! Chat-completions client used as a point predictor.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{prediction_from_completion, Prediction, Predictor, TaskQuery};
use crate::error::{Error, Result};
use crate::prompt::{render_prompt, DEFAULT_DECIMALS};

fn default_max_tokens() -> u32 {
    32
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_parallelism() -> usize {
    1
}
fn default_decimals() -> usize {
    DEFAULT_DECIMALS
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Everything before `/chat/completions`, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token. No header when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Decimals used when rendering numbers into prompts.
    #[serde(default = "default_decimals")]
    pub decimals: usize,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            parallelism: default_parallelism(),
            decimals: default_decimals(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Usage("endpoint parallelism must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Usage("endpoint timeout_ms must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Usage(format!("invalid temperature {}", self.temperature)));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Usage(format!("base_url must be http(s), got {:?}", self.base_url)));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

pub struct EndpointPredictor {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

enum Attempt {
    Done(String),
    Retry { status: Option<u16>, message: String },
    Fatal { status: Option<u16>, message: String },
}

impl EndpointPredictor {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        config.validate()?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| Error::Usage(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::Transport {
                status: None,
                message: format!("building HTTP client: {e}"),
            })?;
        Ok(Self {
            config,
            client,
            api_key,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, body: &[u8]) -> Attempt {
        let mut req = self
            .client
            .post(self.config.completions_url())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    status: None,
                    message: e.to_string(),
                }
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    status: Some(status),
                    message: format!("reading body: {e}"),
                }
            }
        };
        if !(200..300).contains(&status) {
            let message = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return if status == 408 || status == 429 || status >= 500 {
                Attempt::Retry {
                    status: Some(status),
                    message,
                }
            } else {
                Attempt::Fatal {
                    status: Some(status),
                    message,
                }
            };
        }
        match completion_content(&text) {
            Some(c) => Attempt::Done(c),
            None => Attempt::Fatal {
                status: Some(status),
                message: "response has no choices[0].message.content".into(),
            },
        }
    }

    /// Sends one prompt and returns the completion text.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let body = serde_json::to_vec(&body)?;
        let mut delay = self.config.backoff_ms;
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal { status, message } => return Err(Error::Transport { status, message }),
                Attempt::Retry { status, message } => {
                    if attempt >= self.config.max_retries {
                        return Err(Error::Transport {
                            status,
                            message: format!("gave up after {} attempts: {message}", attempt + 1),
                        });
                    }
                }
            }
            attempt += 1;
            std::thread::sleep(Duration::from_millis(delay));
            delay = delay.saturating_mul(2);
        }
    }
}

fn completion_content(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

impl Predictor for EndpointPredictor {
    fn id(&self) -> &str {
        &self.config.model_name
    }

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction> {
        let prompt = render_prompt(task.demos, task.query, task.query.len(), self.config.decimals)?;
        Ok(prediction_from_completion(self.complete(&prompt.text)?))
    }
}
