use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::WorkflowError;
use crate::agents::{AgentOutput, AgentRole, Verdict};
use crate::export::ProgramBundle;
use crate::graph::Diagnostic;
use crate::rag::{ExampleEntry, DEFAULT_K};

pub const STATE_VERSION: u32 = 1;
pub const DEFAULT_ATTEMPT_LIMIT: u32 = 3;
/// A failed sensor check gets one automatic refinement.
pub const DEFAULT_SENSOR_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    RagSelect,
    GraphDesign,
    GraphCheck,
    GraphHumanGate,
    SensorDesign,
    SensorHumanGate,
    PropertyInput,
    PropertyDesignate,
    Export,
    Done,
    Failed,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::RagSelect => "rag-select",
            Phase::GraphDesign => "graph-design",
            Phase::GraphCheck => "graph-check",
            Phase::GraphHumanGate => "graph-human-gate",
            Phase::SensorDesign => "sensor-design",
            Phase::SensorHumanGate => "sensor-human-gate",
            Phase::PropertyInput => "property-input",
            Phase::PropertyDesignate => "property-designate",
            Phase::Export => "export",
            Phase::Done => "done",
            Phase::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    /// The human input this phase waits for, if any.
    pub fn gate(self) -> Option<Gate> {
        match self {
            Phase::GraphHumanGate => Some(Gate::Graph),
            Phase::SensorHumanGate => Some(Gate::Sensor),
            Phase::PropertyInput => Some(Gate::Mapping),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    Graph,
    Sensor,
    /// Free-text description of the dataset fields.
    Mapping,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::Graph => "graph",
            Gate::Sensor => "sensor",
            Gate::Mapping => "mapping",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanAction {
    Approve,
    Revise,
    Edit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanDecision {
    pub gate: Gate,
    pub action: HumanAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    /// Replacement binding JSON for an edit at the sensor gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

impl HumanDecision {
    pub fn approve(gate: Gate) -> Self {
        HumanDecision { gate, action: HumanAction::Approve, feedback: None, code: None }
    }

    pub fn revise(gate: Gate, feedback: impl Into<String>) -> Self {
        HumanDecision { gate, action: HumanAction::Revise, feedback: Some(feedback.into()), code: None }
    }

    pub fn edit(gate: Gate, code: impl Into<String>) -> Self {
        HumanDecision { gate, action: HumanAction::Edit, feedback: None, code: Some(code.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    pub graph_attempt_limit: u32,
    pub sensor_attempt_limit: u32,
    pub rag_k: usize,
    /// Corpus ids the session must never see, e.g. the task itself.
    pub exclusions: BTreeSet<String>,
    /// Ask the reranker agent to reorder retrieved examples.
    pub rerank: bool,
    /// Approve every gate without asking; the headless evaluation mode.
    pub auto_approve: bool,
    pub auto_mapping: Option<String>,
    pub dataset: Option<String>,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        WorkflowConfig {
            graph_attempt_limit: DEFAULT_ATTEMPT_LIMIT,
            sensor_attempt_limit: DEFAULT_SENSOR_ATTEMPTS,
            rag_k: DEFAULT_K,
            exclusions: BTreeSet::new(),
            rerank: false,
            auto_approve: false,
            auto_mapping: None,
            dataset: None,
        }
    }
}

/// Result of the execution agent's check of one graph draft.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub ok: bool,
    pub messages: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

/// Per-run counts: designer attempts, reviewer revise verdicts, drafts the
/// execution check rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub attempts: u32,
    pub revises: u32,
    pub syntax_errors: u32,
}

impl AttemptStats {
    pub fn tuple(&self) -> (u32, u32, u32) {
        (self.attempts, self.revises, self.syntax_errors)
    }
}

impl fmt::Display for AttemptStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.attempts, self.revises, self.syntax_errors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagPick {
    pub id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphAttempt {
    pub attempt: u32,
    pub prompt: String,
    pub draft: AgentOutput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<AgentOutput>,
}

impl GraphAttempt {
    pub fn source(&self) -> &str {
        self.draft.code.as_deref().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorAttempt {
    pub attempt: u32,
    pub prompt: String,
    pub draft: AgentOutput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<String>>,
}

impl SensorAttempt {
    pub fn source(&self) -> &str {
        self.draft.code.as_deref().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    SessionStarted { session_id: String, task: String, config: WorkflowConfig },
    RagSelected { picks: Vec<RagPick>, examples: Vec<ExampleEntry> },
    GraphDrafted { prompt: String, output: AgentOutput },
    GraphChecked { execution: ExecutionReport, review: AgentOutput },
    HumanDecided { decision: HumanDecision },
    SensorDrafted { prompt: String, output: AgentOutput },
    SensorChecked { errors: Vec<String> },
    MappingProvided { mapping: String },
    PropertiesDesignated { prompt: String, output: AgentOutput, bundle: Box<ProgramBundle> },
    Exported { files: Vec<String> },
    /// Backend failure; the phase is retried on the next step.
    AgentFailed { role: AgentRole, message: String },
    Failed { reason: String },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionStarted { .. } => "session-started",
            Event::RagSelected { .. } => "rag-selected",
            Event::GraphDrafted { .. } => "graph-drafted",
            Event::GraphChecked { .. } => "graph-checked",
            Event::HumanDecided { .. } => "human-decided",
            Event::SensorDrafted { .. } => "sensor-drafted",
            Event::SensorChecked { .. } => "sensor-checked",
            Event::MappingProvided { .. } => "mapping-provided",
            Event::PropertiesDesignated { .. } => "properties-designated",
            Event::Exported { .. } => "exported",
            Event::AgentFailed { .. } => "agent-failed",
            Event::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub event: Event,
}

/// Everything a session has done so far. The state is a fold over its
/// event log, so replaying `events` rebuilds it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub version: u32,
    pub session_id: String,
    pub task: String,
    pub config: WorkflowConfig,
    pub phase: Phase,
    pub picks: Vec<RagPick>,
    pub examples: Vec<ExampleEntry>,
    pub graph_attempts: Vec<GraphAttempt>,
    /// Designer attempts since the last human revise.
    pub attempt_counter: u32,
    pub execution_notes: Vec<String>,
    pub reviewer_notes: Vec<String>,
    pub human_feedback: Option<String>,
    pub decisions: Vec<HumanDecision>,
    pub approved_graph: Option<String>,
    pub sensor_attempts: Vec<SensorAttempt>,
    pub sensor_counter: u32,
    pub approved_sensors: Option<String>,
    pub mapping: Option<String>,
    pub bundle: Option<ProgramBundle>,
    pub exported: Vec<String>,
    pub stats: AttemptStats,
    pub last_error: Option<String>,
    pub failure: Option<String>,
    pub events: Vec<EventRecord>,
}

impl SessionState {
    pub fn new(session_id: &str, task: &str, config: WorkflowConfig) -> Self {
        let mut state = SessionState {
            version: STATE_VERSION,
            session_id: String::new(),
            task: String::new(),
            config: WorkflowConfig::default(),
            phase: Phase::RagSelect,
            picks: Vec::new(),
            examples: Vec::new(),
            graph_attempts: Vec::new(),
            attempt_counter: 0,
            execution_notes: Vec::new(),
            reviewer_notes: Vec::new(),
            human_feedback: None,
            decisions: Vec::new(),
            approved_graph: None,
            sensor_attempts: Vec::new(),
            sensor_counter: 0,
            approved_sensors: None,
            mapping: None,
            bundle: None,
            exported: Vec::new(),
            stats: AttemptStats::default(),
            last_error: None,
            failure: None,
            events: Vec::new(),
        };
        state
            .apply(Event::SessionStarted { session_id: session_id.into(), task: task.into(), config })
            .expect("a fresh state accepts session-started");
        state
    }

    /// Rebuilds a state from its log. The first event must start the session.
    pub fn replay(events: impl IntoIterator<Item = Event>) -> Result<Self, WorkflowError> {
        let mut events = events.into_iter();
        let Some(Event::SessionStarted { session_id, task, config }) = events.next() else {
            return Err(WorkflowError::Replay("log does not begin with session-started".into()));
        };
        let mut state = SessionState::new(&session_id, &task, config);
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    pub fn latest_graph(&self) -> Option<&GraphAttempt> {
        self.graph_attempts.last()
    }

    pub fn latest_sensor(&self) -> Option<&SensorAttempt> {
        self.sensor_attempts.last()
    }

    fn reject(&self, event: &Event) -> WorkflowError {
        WorkflowError::InvalidEvent { phase: self.phase, event: event.kind() }
    }

    /// Folds one event into the state and appends it to the log. Events that
    /// make no sense in the current phase are refused and leave the state
    /// untouched.
    pub fn apply(&mut self, event: Event) -> Result<(), WorkflowError> {
        match (&event, self.phase) {
            (Event::SessionStarted { session_id, task, config }, Phase::RagSelect) if self.events.is_empty() => {
                self.session_id = session_id.clone();
                self.task = task.clone();
                self.config = config.clone();
            }
            (Event::RagSelected { picks, examples }, Phase::RagSelect) => {
                self.picks = picks.clone();
                self.examples = examples.clone();
                self.phase = Phase::GraphDesign;
            }
            (Event::GraphDrafted { prompt, output }, Phase::GraphDesign) => {
                self.attempt_counter += 1;
                self.stats.attempts += 1;
                self.graph_attempts.push(GraphAttempt {
                    attempt: self.attempt_counter,
                    prompt: prompt.clone(),
                    draft: output.clone(),
                    execution: None,
                    review: None,
                });
                self.phase = Phase::GraphCheck;
            }
            (Event::GraphChecked { execution, review }, Phase::GraphCheck) if !self.graph_attempts.is_empty() => {
                let attempt = self.attempt_counter;
                let revise = review.verdict != Some(Verdict::Approve);
                if !execution.ok {
                    self.stats.syntax_errors += 1;
                    self.execution_notes.extend(execution.messages.iter().map(|m| format!("attempt {attempt}: {m}")));
                }
                if revise {
                    self.stats.revises += 1;
                    let notes = if review.notes.trim().is_empty() { "revise" } else { review.notes.trim() };
                    self.reviewer_notes.push(format!("attempt {attempt}: {notes}"));
                }
                let last = self.graph_attempts.last_mut().expect("guarded above");
                last.execution = Some(execution.clone());
                last.review = Some(review.clone());
                let passed = execution.ok && !revise;
                self.phase = if passed || attempt >= self.config.graph_attempt_limit {
                    Phase::GraphHumanGate
                } else {
                    Phase::GraphDesign
                };
            }
            (Event::HumanDecided { decision }, Phase::GraphHumanGate) if decision.gate == Gate::Graph => {
                match decision.action {
                    HumanAction::Approve => {
                        self.approved_graph = self.latest_graph().map(|a| a.source().to_string());
                        self.human_feedback = None;
                        self.phase = Phase::SensorDesign;
                    }
                    HumanAction::Revise => {
                        self.attempt_counter = 0;
                        self.execution_notes.clear();
                        self.reviewer_notes.clear();
                        self.human_feedback = decision.feedback.clone();
                        self.phase = Phase::GraphDesign;
                    }
                    HumanAction::Edit => return Err(self.reject(&event)),
                }
                self.decisions.push(decision.clone());
            }
            (Event::HumanDecided { decision }, Phase::SensorHumanGate) if decision.gate == Gate::Sensor => {
                match decision.action {
                    HumanAction::Approve => {
                        self.approved_sensors = self.latest_sensor().map(|a| a.source().to_string());
                        self.human_feedback = None;
                        self.phase = Phase::PropertyInput;
                    }
                    HumanAction::Edit => {
                        self.approved_sensors = decision.code.clone();
                        self.human_feedback = None;
                        self.phase = Phase::PropertyInput;
                    }
                    HumanAction::Revise => {
                        self.sensor_counter = 0;
                        self.human_feedback = decision.feedback.clone();
                        self.phase = Phase::SensorDesign;
                    }
                }
                self.decisions.push(decision.clone());
            }
            (Event::SensorDrafted { prompt, output }, Phase::SensorDesign)
                if self.sensor_attempts.last().is_none_or(|a| a.errors.is_some()) =>
            {
                self.sensor_counter += 1;
                self.sensor_attempts.push(SensorAttempt {
                    attempt: self.sensor_counter,
                    prompt: prompt.clone(),
                    draft: output.clone(),
                    errors: None,
                });
            }
            (Event::SensorChecked { errors }, Phase::SensorDesign)
                if self.sensor_attempts.last().is_some_and(|a| a.errors.is_none()) =>
            {
                let last = self.sensor_attempts.last_mut().expect("guarded above");
                last.errors = Some(errors.clone());
                if errors.is_empty() || self.sensor_counter >= self.config.sensor_attempt_limit {
                    self.phase = Phase::SensorHumanGate;
                }
            }
            (Event::MappingProvided { mapping }, Phase::PropertyInput) => {
                self.mapping = Some(mapping.clone());
                self.phase = Phase::PropertyDesignate;
            }
            (Event::PropertiesDesignated { bundle, .. }, Phase::PropertyDesignate) => {
                self.bundle = Some((**bundle).clone());
                self.phase = Phase::Export;
            }
            (Event::Exported { files }, Phase::Export) => {
                self.exported = files.clone();
                self.phase = Phase::Done;
            }
            (Event::AgentFailed { message, .. }, phase) if !phase.is_terminal() => {
                self.last_error = Some(message.clone());
            }
            (Event::Failed { reason }, phase) if !phase.is_terminal() => {
                self.failure = Some(reason.clone());
                self.phase = Phase::Failed;
            }
            _ => return Err(self.reject(&event)),
        }
        if !matches!(event, Event::AgentFailed { .. } | Event::SessionStarted { .. }) {
            self.last_error = None;
        }
        let seq = self.events.len() as u64;
        self.events.push(EventRecord { seq, event });
        Ok(())
    }
}
