//! LLM agent roles: prompt assembly, one completion per call, and parsing
//! of the reply into code, verdict and notes.

mod parse;
mod prompts;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use parse::{first_code_block, parse_review, Verdict, MALFORMED_REVIEW, MISSING_CODE};
pub use prompts::{assemble_prompt, PromptContext, PROMPT_VERSION};

use crate::chat::{ChatClient, ChatConfig, ChatMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentRole {
    RagSelectorReranker,
    GraphDesigner,
    GraphReviewer,
    SensorDesigner,
    PropertyDesignator,
}

impl AgentRole {
    pub const ALL: [AgentRole; 5] = [
        AgentRole::RagSelectorReranker,
        AgentRole::GraphDesigner,
        AgentRole::GraphReviewer,
        AgentRole::SensorDesigner,
        AgentRole::PropertyDesignator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::RagSelectorReranker => "rag-selector-reranker",
            AgentRole::GraphDesigner => "graph-designer",
            AgentRole::GraphReviewer => "graph-reviewer",
            AgentRole::SensorDesigner => "sensor-designer",
            AgentRole::PropertyDesignator => "property-designator",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    fn writes_code(self) -> bool {
        matches!(self, AgentRole::GraphDesigner | AgentRole::SensorDesigner | AgentRole::PropertyDesignator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("script for {0} is exhausted")]
    Exhausted(&'static str),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("prompt needs a {0}")]
    MissingContext(&'static str),
}

/// Source of completions. Implementations must answer each call with at
/// most one upstream request.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, role: AgentRole, prompt: &str) -> Result<String, AgentError>;
}

/// Plays back fixed replies per role, in order. Every prompt it receives is
/// recorded.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queues: Mutex<BTreeMap<AgentRole, VecDeque<String>>>,
    calls: Mutex<Vec<(AgentRole, String)>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, role: AgentRole, reply: impl Into<String>) -> &Self {
        self.queues.lock().expect("script lock").entry(role).or_default().push_back(reply.into());
        self
    }

    pub fn extend(&self, role: AgentRole, replies: impl IntoIterator<Item = String>) -> &Self {
        self.queues.lock().expect("script lock").entry(role).or_default().extend(replies);
        self
    }

    /// Drops the first `n` replies of `role`, e.g. when resuming a session
    /// that already consumed them.
    pub fn skip(&self, role: AgentRole, n: usize) {
        let mut queues = self.queues.lock().expect("script lock");
        if let Some(q) = queues.get_mut(&role) {
            for _ in 0..n.min(q.len()) {
                q.pop_front();
            }
        }
    }

    pub fn remaining(&self, role: AgentRole) -> usize {
        self.queues.lock().expect("script lock").get(&role).map_or(0, VecDeque::len)
    }

    pub fn calls(&self) -> Vec<(AgentRole, String)> {
        self.calls.lock().expect("calls lock").clone()
    }

    pub fn prompts_for(&self, role: AgentRole) -> Vec<String> {
        self.calls().into_iter().filter(|(r, _)| *r == role).map(|(_, p)| p).collect()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, role: AgentRole, prompt: &str) -> Result<String, AgentError> {
        self.calls.lock().expect("calls lock").push((role, prompt.to_string()));
        self.queues
            .lock()
            .expect("script lock")
            .get_mut(&role)
            .and_then(VecDeque::pop_front)
            .ok_or(AgentError::Exhausted(role.name()))
    }
}

/// Chat-completions backend; one client config for all roles unless a role
/// has its own.
pub struct RemoteBackend {
    default: ChatClient,
    per_role: BTreeMap<AgentRole, ChatClient>,
}

impl RemoteBackend {
    pub fn new(config: ChatConfig) -> Self {
        RemoteBackend { default: ChatClient::new(config), per_role: BTreeMap::new() }
    }

    pub fn with_role(mut self, role: AgentRole, config: ChatConfig) -> Self {
        self.per_role.insert(role, ChatClient::new(config));
        self
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, role: AgentRole, prompt: &str) -> Result<String, AgentError> {
        let client = self.per_role.get(&role).unwrap_or(&self.default);
        let messages = [ChatMessage::system(format!("You are the {} agent.", role.name())), ChatMessage::user(prompt)];
        client.complete(&messages).map_err(|e| AgentError::Backend(e.to_string()))
    }
}

/// Parses a reply the way every role expects it.
pub fn parse_output(role: AgentRole, raw: String) -> AgentOutput {
    let mut out = AgentOutput { raw, code: None, verdict: None, notes: String::new() };
    if role == AgentRole::GraphReviewer {
        match parse_review(&out.raw) {
            Some((verdict, notes)) => {
                out.verdict = Some(verdict);
                out.notes = notes;
            }
            None => {
                out.verdict = Some(Verdict::Revise);
                out.notes = MALFORMED_REVIEW.to_string();
            }
        }
    } else if role.writes_code() {
        match first_code_block(&out.raw) {
            Some(code) => out.code = Some(code),
            None => {
                // An empty draft still flows through the checks and fails there.
                out.code = Some(String::new());
                out.notes = MISSING_CODE.to_string();
            }
        }
    } else {
        out.notes = out.raw.trim().to_string();
    }
    out
}

/// One completion request, then parsing.
pub fn run_agent(role: AgentRole, backend: &dyn CompletionBackend, prompt: &str) -> Result<AgentOutput, AgentError> {
    let raw = backend.complete(role, prompt)?;
    Ok(parse_output(role, raw))
}
