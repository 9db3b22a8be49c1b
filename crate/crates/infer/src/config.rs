use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    /// `POST {base}/v1/chat/completions`, prompt as a single user message.
    #[default]
    Chat,
    /// `POST {base}/v1/completions`, prompt sent verbatim.
    Completion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 512,
            stop: None,
        }
    }
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_retry_base_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key; no auth header when unset.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First backoff delay; doubles per retry, plus up to the same amount of jitter.
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default)]
    pub api_style: ApiStyle,
    #[serde(default)]
    pub decode: DecodeParams,
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            retry_base_ms: default_retry_base_ms(),
            api_style: ApiStyle::Chat,
            decode: DecodeParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!(
                "base_url {:?} must be an http(s) URL",
                self.base_url
            ));
        }
        if self.model.is_empty() {
            return bad("model must not be empty".into());
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad(format!(
                "timeout_secs must be > 0, got {}",
                self.timeout_secs
            ));
        }
        let d = &self.decode;
        if !(d.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", d.temperature));
        }
        if !(d.top_p > 0.0 && d.top_p <= 1.0) {
            return bad(format!("top_p must lie in (0, 1], got {}", d.top_p));
        }
        if d.max_tokens == 0 {
            return bad("max_tokens must be >= 1".into());
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        match self.api_style {
            ApiStyle::Chat => format!("{base}/v1/chat/completions"),
            ApiStyle::Completion => format!("{base}/v1/completions"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_minimal_toml() {
        let cfg: EndpointConfig =
            toml::from_str("base_url = \"http://h:1/\"\nmodel = \"m\"").unwrap();
        assert_eq!(cfg.decode, DecodeParams::default());
        assert_eq!(cfg.decode.max_tokens, 512);
        assert_eq!(cfg.url(), "http://h:1/v1/chat/completions");
        cfg.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut cfg = EndpointConfig::new("ftp://x", "m");
        assert!(cfg.validate().is_err());
        cfg.base_url = "http://x".into();
        cfg.decode.top_p = 0.0;
        assert!(cfg.validate().is_err());
        cfg.decode.top_p = 1.0;
        cfg.timeout_secs = 0.0;
        assert!(cfg.validate().is_err());
        cfg.timeout_secs = 1.0;
        cfg.api_style = ApiStyle::Completion;
        assert_eq!(cfg.url(), "http://x/v1/completions");
    }
}
