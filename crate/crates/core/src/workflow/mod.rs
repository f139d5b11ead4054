//! The design session: retrieval, graph drafting with execution checks and
//! review, human gates, sensors, properties, export.
//!
//! [`SessionState`] is an event-sourced record. [`step`] performs one
//! transition, calling at most one agent role (the check phase runs the
//! reviewer alongside the execution check).

mod check;
mod engine;
mod state;

pub use check::{assemble_bundle, check_graph, check_sensors, smoke_instances};
pub use engine::{export_session, gate_view, provide_mapping, run_to_pause, step, submit_human, GateView, StepOutcome};
pub use state::*;

use crate::agents::AgentError;
use crate::export::ExportError;
use crate::rag::RagError;

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("session is in phase {phase}, not at a human gate")]
    NotAtGate { phase: Phase },
    #[error("decision is for the {found} gate but the session waits at the {expected} gate")]
    WrongGate { expected: Gate, found: Gate },
    #[error("{0}")]
    InvalidDecision(String),
    #[error("event {event} is not allowed in phase {phase}")]
    InvalidEvent { phase: Phase, event: &'static str },
    #[error("cannot replay log: {0}")]
    Replay(String),
    #[error("session has not finished")]
    NotFinished,
}

impl WorkflowError {
    /// Backend failures may succeed when the step is repeated.
    pub fn is_retryable(&self) -> bool {
        matches!(self, WorkflowError::Agent(AgentError::Backend(_)))
    }
}
