use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, ChatClient, LlmError, LlmRequest};

/// Answers by looking up the SHA-256 of the last user prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    answers: HashMap<String, String>,
}

/// One line of a script file. Either `prompt` or `prompt_sha256` identifies
/// the prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub response: String,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, answer: impl Into<String>) {
        self.answers.insert(sha256_hex(prompt), answer.into());
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Reads a JSON Lines script.
    pub fn from_file(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        let mut client = Self::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| crate::Error::Parse {
                path: path.to_path_buf(),
                line: index + 1,
                message,
            };
            let entry: ScriptLine = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            let key = match (entry.prompt, entry.prompt_sha256) {
                (Some(prompt), _) => sha256_hex(prompt),
                (None, Some(hash)) => hash,
                (None, None) => return Err(parse_err("needs prompt or prompt_sha256".into())),
            };
            client.answers.insert(key, entry.response);
        }
        Ok(client)
    }

    pub fn to_lines(&self) -> Vec<ScriptLine> {
        let mut lines: Vec<ScriptLine> = self
            .answers
            .iter()
            .map(|(hash, response)| ScriptLine {
                prompt: None,
                prompt_sha256: Some(hash.clone()),
                response: response.clone(),
            })
            .collect();
        lines.sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
        lines
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, request: &LlmRequest, _trial: u32) -> Result<String, LlmError> {
        let prompt = request.last_user_prompt().unwrap_or_default();
        let prompt_sha256 = sha256_hex(prompt);
        self.answers
            .get(&prompt_sha256)
            .cloned()
            .ok_or(LlmError::ScriptMiss { prompt_sha256 })
    }
}

/// Closure-backed client for tests.
pub struct FnClient<F> {
    f: F,
}

impl<F> FnClient<F>
where
    F: Fn(&LlmRequest, u32) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnClient { f }
    }
}

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&LlmRequest, u32) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest, trial: u32) -> Result<String, LlmError> {
        (self.f)(request, trial)
    }
}
