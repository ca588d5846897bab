use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Speaker, Turn};
use crate::generate::VerificationPolicy;
use crate::llm::{AdapterError, ChatMessage, LlmEndpoint, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub context_prompt: String,
    pub instruction: Option<String>,
    pub user_message: String,
    pub history: Vec<Turn>,
    /// Set on retries after the verifier rejected a candidate.
    pub retry_instruction: Option<String>,
}

impl GenerationRequest {
    /// Single system prompt combining directives, instruction and retry note.
    pub fn system_prompt(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(instruction) = &self.instruction {
            parts.push(instruction);
        }
        if !self.context_prompt.is_empty() {
            parts.push(&self.context_prompt);
        }
        if let Some(retry) = &self.retry_instruction {
            parts.push(retry);
        }
        parts.join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Approved,
    Rejected(String),
}

pub trait GenerationAdapter: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, AdapterError>;

    fn verify(&self, policy: &VerificationPolicy, candidate: &str)
        -> Result<Verdict, AdapterError>;
}

/// Rejects candidates that mention any forbidden tag (case-insensitive).
pub fn tag_verdict(policy: &VerificationPolicy, candidate: &str) -> Verdict {
    let lower = candidate.to_lowercase();
    match policy
        .forbidden_tags
        .iter()
        .find(|tag| lower.contains(&tag.to_lowercase()))
    {
        Some(tag) => Verdict::Rejected(format!("the reply mentions forbidden content '{tag}'")),
        None => Verdict::Approved,
    }
}

/// Deterministic offline generator.
#[derive(Debug, Default)]
pub struct MockGenerator {
    generate_calls: AtomicUsize,
    verify_calls: AtomicUsize,
}

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn generate_calls(&self) -> usize {
        self.generate_calls.load(Ordering::SeqCst)
    }

    pub fn verify_calls(&self) -> usize {
        self.verify_calls.load(Ordering::SeqCst)
    }
}

impl GenerationAdapter for MockGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, AdapterError> {
        self.generate_calls.fetch_add(1, Ordering::SeqCst);
        let directives = request.context_prompt.lines().count();
        let mut reply = format!("[mock reply] You said: {}", request.user_message);
        if directives > 0 {
            reply.push_str(&format!(" ({directives} directives applied)"));
        }
        Ok(reply)
    }

    fn verify(
        &self,
        policy: &VerificationPolicy,
        candidate: &str,
    ) -> Result<Verdict, AdapterError> {
        self.verify_calls.fetch_add(1, Ordering::SeqCst);
        Ok(tag_verdict(policy, candidate))
    }
}

/// Returns canned replies in order (the last one repeats) and records
/// every request. Verification uses the policy's forbidden tags.
#[derive(Debug)]
pub struct ScriptedGenerator {
    replies: Vec<String>,
    requests: Mutex<Vec<GenerationRequest>>,
    verify_calls: AtomicUsize,
}

impl ScriptedGenerator {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        assert!(
            !replies.is_empty(),
            "scripted generator needs at least one reply"
        );
        Self {
            replies,
            requests: Mutex::new(Vec::new()),
            verify_calls: AtomicUsize::new(0),
        }
    }

    /// `k` replies containing `tag`, then a clean one.
    pub fn tagged_then_clean(k: usize, tag: &str) -> Self {
        let mut replies: Vec<String> = (1..=k)
            .map(|i| format!("Candidate {i}: try this {tag} routine."))
            .collect();
        replies.push("A seated upper-body routine suits you well.".to_string());
        Self::new(replies)
    }

    pub fn generate_calls(&self) -> usize {
        self.requests.lock().expect("requests lock").len()
    }

    pub fn verify_calls(&self) -> usize {
        self.verify_calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<GenerationRequest> {
        self.requests.lock().expect("requests lock").clone()
    }
}

impl GenerationAdapter for ScriptedGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, AdapterError> {
        let mut requests = self.requests.lock().expect("requests lock");
        let index = requests.len().min(self.replies.len() - 1);
        requests.push(request.clone());
        Ok(self.replies[index].clone())
    }

    fn verify(
        &self,
        policy: &VerificationPolicy,
        candidate: &str,
    ) -> Result<Verdict, AdapterError> {
        self.verify_calls.fetch_add(1, Ordering::SeqCst);
        Ok(tag_verdict(policy, candidate))
    }
}

/// Generator and verifier backed by a chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct LlmGenerator {
    endpoint: LlmEndpoint,
}

impl LlmGenerator {
    pub fn new(endpoint: LlmEndpoint) -> Self {
        Self { endpoint }
    }

    pub fn from_env() -> Result<Self, AdapterError> {
        LlmEndpoint::from_env().map(Self::new)
    }
}

/// Interprets a verifier answer: `APPROVED` or `REJECTED: reason`.
pub fn parse_verdict(answer: &str) -> Verdict {
    let trimmed = answer.trim();
    if trimmed.to_ascii_uppercase().starts_with("APPROVED") {
        Verdict::Approved
    } else {
        let reason = trimmed
            .strip_prefix("REJECTED")
            .map(|r| r.trim_start_matches([':', ' ']))
            .unwrap_or(trimmed);
        Verdict::Rejected(reason.to_string())
    }
}

impl GenerationAdapter for LlmGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, AdapterError> {
        let mut messages = vec![ChatMessage::new(Role::System, request.system_prompt())];
        for turn in &request.history {
            let role = match turn.speaker {
                Speaker::User => Role::User,
                Speaker::Agent => Role::Assistant,
            };
            messages.push(ChatMessage::new(role, &turn.text));
        }
        messages.push(ChatMessage::new(Role::User, &request.user_message));
        self.endpoint.chat(&messages)
    }

    fn verify(
        &self,
        policy: &VerificationPolicy,
        candidate: &str,
    ) -> Result<Verdict, AdapterError> {
        let answer = self.endpoint.chat(&[
            ChatMessage::new(Role::System, &policy.check_prompt),
            ChatMessage::new(Role::User, candidate),
        ])?;
        Ok(parse_verdict(&answer))
    }
}
