use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub messages: Vec<Message>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

pub const DEFAULT_MAX_TOKENS: u32 = 512;

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

impl LlmRequest {
    /// Compact JSON with object keys in sorted order. Independent of field
    /// order and whitespace in whatever text the request was parsed from.
    pub fn canonical_json(&self) -> String {
        // serde_json's Map is a BTreeMap (no preserve_order), so keys come out sorted.
        let value = serde_json::to_value(self).expect("request serializes");
        value.to_string()
    }

    pub fn last_user_prompt(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

pub fn cache_key(request: &LlmRequest, trial: u32) -> String {
    sha256_hex(format!("{}\ntrial={trial}", request.canonical_json()))
}

/// Per-endpoint request parameters; turns prompts into requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTemplate {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
}

impl RequestTemplate {
    pub fn new(model: impl Into<String>) -> Self {
        RequestTemplate {
            model: model.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            system: None,
        }
    }

    pub fn request(&self, prompt: &str) -> LlmRequest {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            messages.push(Message {
                role: Role::System,
                content: system.clone(),
            });
        }
        messages.push(Message {
            role: Role::User,
            content: prompt.to_string(),
        });
        LlmRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}
