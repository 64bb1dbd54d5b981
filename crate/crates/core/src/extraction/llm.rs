use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("language model provider unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Chat-completion style model: messages in, text out.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

/// One scripted rule: when the last user message contains `when_contains`,
/// answer with the next entry of `responses`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub when_contains: String,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LlmScript {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    /// Used when no rule matches.
    #[serde(default)]
    pub default: Vec<String>,
}

/// Offline provider replaying scripted responses. Each rule keeps its own
/// cursor; once exhausted the last response repeats.
#[derive(Debug)]
pub struct ScriptedLlm {
    script: LlmScript,
    cursors: Mutex<Vec<usize>>,
    calls: AtomicUsize,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing script: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScriptedLlm {
    pub fn new(script: LlmScript) -> ScriptedLlm {
        let slots = script.rules.len() + 1;
        ScriptedLlm {
            script,
            cursors: Mutex::new(vec![0; slots]),
            calls: AtomicUsize::new(0),
        }
    }

    /// Answers every prompt with `responses` in order.
    pub fn sequence<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> ScriptedLlm {
        ScriptedLlm::new(LlmScript {
            rules: Vec::new(),
            default: responses.into_iter().map(Into::into).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<ScriptedLlm, ScriptError> {
        let script: LlmScript = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(ScriptedLlm::new(script))
    }

    /// Total calls to [`LlmProvider::complete`].
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmProvider for ScriptedLlm {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str());
        let (slot, responses) = self
            .script
            .rules
            .iter()
            .enumerate()
            .find(|(_, r)| prompt.contains(&r.when_contains))
            .map(|(i, r)| (i, &r.responses))
            .unwrap_or((self.script.rules.len(), &self.script.default));
        if responses.is_empty() {
            return Err(LlmError::Unavailable("no scripted response".into()));
        }
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let idx = cursors[slot].min(responses.len() - 1);
        cursors[slot] += 1;
        Ok(responses[idx].clone())
    }
}
