//! Concept-graph language, constraint compilation and the agent workflow
//! that designs graphs from task descriptions.

pub mod fixtures;
pub mod graph;
pub mod ilp;
pub mod binding;
pub mod chat;
pub mod rag;
pub mod agents;
pub mod export;
pub mod workflow;
pub mod eval;
pub mod report;
