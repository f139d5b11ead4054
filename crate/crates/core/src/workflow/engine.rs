use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::check::{assemble_bundle, check_graph, check_sensors};
use super::state::*;
use super::WorkflowError;
use crate::agents::{assemble_prompt, run_agent, AgentError, AgentOutput, AgentRole, CompletionBackend, PromptContext, Verdict};
use crate::binding::BindingSpec;
use crate::export::{self, ProgramBundle, NOTEBOOK_FILE};
use crate::rag::Corpus;

/// What a human sees at a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateView {
    pub gate: Gate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<String>,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<AgentOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum StepOutcome {
    Advanced { phase: Phase },
    AwaitingHuman { gate: Gate, view: Box<GateView> },
    Completed { bundle: Box<ProgramBundle> },
    Failed { reason: String },
}

pub fn gate_view(state: &SessionState) -> Option<GateView> {
    let gate = state.phase.gate()?;
    let mut view = GateView { gate, draft: None, attempts: 0, execution: None, review: None, errors: Vec::new() };
    match gate {
        Gate::Graph => {
            let last = state.latest_graph();
            view.draft = last.map(|a| a.source().to_string());
            view.attempts = state.attempt_counter;
            view.execution = last.and_then(|a| a.execution.clone());
            view.review = last.and_then(|a| a.review.clone());
        }
        Gate::Sensor => {
            let last = state.latest_sensor();
            view.draft = last.map(|a| a.source().to_string());
            view.attempts = state.sensor_counter;
            view.errors = last.and_then(|a| a.errors.clone()).unwrap_or_default();
        }
        Gate::Mapping => view.draft = state.approved_sensors.clone(),
    }
    Some(view)
}

fn awaiting(state: &SessionState) -> StepOutcome {
    let view = gate_view(state).expect("called at a gate");
    StepOutcome::AwaitingHuman { gate: view.gate, view: Box::new(view) }
}

fn outcome(state: &SessionState) -> StepOutcome {
    match state.phase {
        Phase::Done => StepOutcome::Completed {
            bundle: Box::new(state.bundle.clone().expect("a finished session has a bundle")),
        },
        Phase::Failed => StepOutcome::Failed { reason: state.failure.clone().unwrap_or_default() },
        p if p.gate().is_some() && !answers_itself(state) => awaiting(state),
        p => StepOutcome::Advanced { phase: p },
    }
}

/// Headless sessions pass their own gates.
fn answers_itself(state: &SessionState) -> bool {
    state.config.auto_approve && (state.phase != Phase::PropertyInput || state.config.auto_mapping.is_some())
}

/// Records a backend failure and hands it back; the phase is unchanged so
/// the next step retries.
fn agent_failed(state: &mut SessionState, role: AgentRole, err: AgentError) -> WorkflowError {
    let _ = state.apply(Event::AgentFailed { role, message: err.to_string() });
    WorkflowError::Agent(err)
}

fn context(state: &SessionState) -> PromptContext<'_> {
    PromptContext {
        task: &state.task,
        examples: &state.examples,
        exclusions: &state.config.exclusions,
        human_feedback: state.human_feedback.as_deref(),
        ..PromptContext::default()
    }
}

/// Ids named in the reranker's reply, in order, restricted to `known`.
fn reranked(reply: &str, known: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in reply.lines() {
        let id = line.trim().trim_start_matches(['-', '*', ' ']).split([':', ' ']).next().unwrap_or_default();
        if known.iter().any(|k| k == id) && !out.iter().any(|o| o == id) {
            out.push(id.to_string());
        }
    }
    for k in known {
        if !out.contains(k) {
            out.push(k.clone());
        }
    }
    out
}

/// Advances the session by one transition. At a gate with nobody to ask,
/// the same awaiting outcome is returned until a decision arrives.
pub fn step(
    state: &mut SessionState,
    backend: &dyn CompletionBackend,
    corpus: &Corpus,
) -> Result<StepOutcome, WorkflowError> {
    match state.phase {
        Phase::Done | Phase::Failed => {}
        Phase::RagSelect => {
            let exclude: &BTreeSet<String> = &state.config.exclusions;
            let hits = corpus.retrieve(&state.task, state.config.rag_k, exclude)?;
            let mut picks: Vec<RagPick> =
                hits.iter().map(|(e, s)| RagPick { id: e.id.clone(), similarity: *s }).collect();
            if state.config.rerank && picks.len() > 1 {
                let examples: Vec<_> = hits.iter().map(|(e, _)| (*e).clone()).collect();
                let ctx = PromptContext { examples: &examples, ..context(state) };
                let prompt = assemble_prompt(AgentRole::RagSelectorReranker, &ctx)?;
                let reply = match run_agent(AgentRole::RagSelectorReranker, backend, &prompt) {
                    Ok(r) => r,
                    Err(e) => return Err(agent_failed(state, AgentRole::RagSelectorReranker, e)),
                };
                let ids: Vec<String> = picks.iter().map(|p| p.id.clone()).collect();
                let order = reranked(&reply.raw, &ids);
                picks.sort_by_key(|p| order.iter().position(|o| *o == p.id));
            }
            let examples = picks.iter().filter_map(|p| corpus.get(&p.id).cloned()).collect();
            state.apply(Event::RagSelected { picks, examples })?;
        }
        Phase::GraphDesign => {
            let ctx = PromptContext {
                previous_draft: state.latest_graph().map(GraphAttempt::source),
                execution_notes: &state.execution_notes,
                reviewer_notes: &state.reviewer_notes,
                ..context(state)
            };
            let prompt = assemble_prompt(AgentRole::GraphDesigner, &ctx)?;
            let output = match run_agent(AgentRole::GraphDesigner, backend, &prompt) {
                Ok(o) => o,
                Err(e) => return Err(agent_failed(state, AgentRole::GraphDesigner, e)),
            };
            state.apply(Event::GraphDrafted { prompt, output })?;
        }
        Phase::GraphCheck => {
            let source = state.latest_graph().map(|a| a.source().to_string()).unwrap_or_default();
            let (execution, review) = if source.trim().is_empty() {
                let review = AgentOutput {
                    raw: String::new(),
                    code: None,
                    verdict: Some(Verdict::Revise),
                    notes: "no draft to review".into(),
                };
                (check_graph(&source), Ok(review))
            } else {
                let ctx = PromptContext { graph: Some(&source), ..context(state) };
                let prompt = assemble_prompt(AgentRole::GraphReviewer, &ctx)?;
                // The execution check and the review are independent.
                std::thread::scope(|s| {
                    let review = s.spawn(|| run_agent(AgentRole::GraphReviewer, backend, &prompt));
                    let execution = check_graph(&source);
                    (execution, review.join().unwrap_or_else(|_| Err(AgentError::Backend("reviewer panicked".into()))))
                })
            };
            let review = match review {
                Ok(r) => r,
                Err(e) => return Err(agent_failed(state, AgentRole::GraphReviewer, e)),
            };
            state.apply(Event::GraphChecked { execution, review })?;
        }
        Phase::SensorDesign => {
            let graph = state.approved_graph.clone().unwrap_or_default();
            let last = state.latest_sensor().filter(|_| state.sensor_counter > 0);
            let ctx = PromptContext {
                graph: Some(&graph),
                sensor_draft: last.map(SensorAttempt::source),
                sensor_errors: last.and_then(|a| a.errors.as_deref()).unwrap_or_default(),
                ..context(state)
            };
            let prompt = assemble_prompt(AgentRole::SensorDesigner, &ctx)?;
            let output = match run_agent(AgentRole::SensorDesigner, backend, &prompt) {
                Ok(o) => o,
                Err(e) => return Err(agent_failed(state, AgentRole::SensorDesigner, e)),
            };
            let errors = check_sensors(&graph, output.code.as_deref().unwrap_or_default());
            state.apply(Event::SensorDrafted { prompt, output })?;
            state.apply(Event::SensorChecked { errors })?;
        }
        Phase::GraphHumanGate | Phase::SensorHumanGate => {
            if !answers_itself(state) {
                return Ok(awaiting(state));
            }
            let gate = state.phase.gate().expect("gate phase");
            state.apply(Event::HumanDecided { decision: HumanDecision::approve(gate) })?;
        }
        Phase::PropertyInput => match state.config.auto_mapping.clone() {
            Some(mapping) if answers_itself(state) => provide_mapping(state, &mapping)?,
            _ => return Ok(awaiting(state)),
        },
        Phase::PropertyDesignate => {
            let graph = state.approved_graph.clone().unwrap_or_default();
            let sensors = state.approved_sensors.clone().unwrap_or_default();
            let ctx = PromptContext {
                graph: Some(&graph),
                sensor_draft: Some(&sensors),
                mapping: state.mapping.as_deref(),
                ..context(state)
            };
            let prompt = assemble_prompt(AgentRole::PropertyDesignator, &ctx)?;
            let output = match run_agent(AgentRole::PropertyDesignator, backend, &prompt) {
                Ok(o) => o,
                Err(e) => return Err(agent_failed(state, AgentRole::PropertyDesignator, e)),
            };
            let reply = output.code.clone().unwrap_or_default();
            match assemble_bundle(&graph, &sensors, &reply, &state.task, state.config.dataset.as_deref()) {
                Ok(bundle) => state.apply(Event::PropertiesDesignated { prompt, output, bundle: Box::new(bundle) })?,
                Err(reason) => state.apply(Event::Failed { reason })?,
            }
        }
        Phase::Export => {
            let bundle = state.bundle.as_ref().expect("export phase has a bundle");
            let files = match export::notebook(bundle) {
                Ok(_) => {
                    let mut files: Vec<String> = bundle.files().into_iter().map(|(n, _)| n.to_string()).collect();
                    files.push(NOTEBOOK_FILE.to_string());
                    files
                }
                Err(e) => {
                    state.apply(Event::Failed { reason: e.to_string() })?;
                    return Ok(outcome(state));
                }
            };
            state.apply(Event::Exported { files })?;
        }
    }
    Ok(outcome(state))
}

/// Steps until the session finishes, fails or waits for a human.
pub fn run_to_pause(
    state: &mut SessionState,
    backend: &dyn CompletionBackend,
    corpus: &Corpus,
) -> Result<StepOutcome, WorkflowError> {
    loop {
        match step(state, backend, corpus)? {
            StepOutcome::Advanced { .. } => continue,
            done => return Ok(done),
        }
    }
}

pub fn submit_human(state: &mut SessionState, decision: HumanDecision) -> Result<(), WorkflowError> {
    let expected = match state.phase {
        Phase::GraphHumanGate => Gate::Graph,
        Phase::SensorHumanGate => Gate::Sensor,
        phase => return Err(WorkflowError::NotAtGate { phase }),
    };
    if decision.gate != expected {
        return Err(WorkflowError::WrongGate { expected, found: decision.gate });
    }
    match decision.action {
        HumanAction::Edit if expected == Gate::Graph => {
            return Err(WorkflowError::InvalidDecision("edit is only accepted at the sensor gate".into()))
        }
        HumanAction::Edit => {
            let code = decision.code.as_deref().unwrap_or_default();
            BindingSpec::from_json(code)
                .map_err(|e| WorkflowError::InvalidDecision(format!("edited binding does not parse: {e}")))?;
        }
        HumanAction::Revise if decision.feedback.as_deref().is_none_or(|f| f.trim().is_empty()) => {
            return Err(WorkflowError::InvalidDecision("revise needs feedback".into()))
        }
        _ => {}
    }
    state.apply(Event::HumanDecided { decision })
}

pub fn provide_mapping(state: &mut SessionState, mapping: &str) -> Result<(), WorkflowError> {
    if state.phase != Phase::PropertyInput {
        return Err(WorkflowError::NotAtGate { phase: state.phase });
    }
    if mapping.trim().is_empty() {
        return Err(WorkflowError::InvalidDecision("the dataset mapping is empty".into()));
    }
    state.apply(Event::MappingProvided { mapping: mapping.to_string() })
}

/// Writes the bundle files and the notebook of a finished session.
pub fn export_session(state: &SessionState, dir: &Path) -> Result<Vec<String>, WorkflowError> {
    let bundle = state.bundle.as_ref().filter(|_| state.phase == Phase::Done).ok_or(WorkflowError::NotFinished)?;
    let mut files = export::write_bundle(bundle, dir)?;
    let path = dir.join(NOTEBOOK_FILE);
    fs::write(&path, export::notebook(bundle)?)
        .map_err(|e| export::ExportError::Io { path: path.display().to_string(), message: e.to_string() })?;
    files.push(NOTEBOOK_FILE.to_string());
    Ok(files)
}
