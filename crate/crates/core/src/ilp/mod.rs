//! Compilation of grounded constraints into a 0/1 integer program and an
//! exact solver for it.
//!
//! ```
//! use nesy_core::fixtures::{wiqa_instances, WIQA_GRAPH};
//! use nesy_core::ilp::{infer, ScoreTable, SolveOptions};
//!
//! let graph = nesy_core::graph::parse(WIQA_GRAPH).unwrap();
//! let mut scores = ScoreTable::new();
//! for (q, more) in [("q1", 0.9), ("q2", 0.8), ("q3", 0.4)] {
//!     scores.set(q, "is_more", more);
//!     scores.set(q, "is_less", (1.0 - more) / 2.0);
//!     scores.set(q, "no_effect", (1.0 - more) / 2.0);
//! }
//! let result = infer(&graph, &wiqa_instances(), &scores, SolveOptions::default()).unwrap();
//! assert_eq!(result.label("q3", "answer"), Some("is_more"));
//! ```

mod compile;
mod scores;
mod solve;

pub use compile::{compile, IlpProgram, Row, RowOrigin, Sense, SlotVars, VarId, VarKind, Variable};
pub use scores::{floored_log, ScoreTable, NORMALIZATION_TOLERANCE, PROB_FLOOR};
pub use solve::{solve, Assignment, SolveOptions, Status, DEFAULT_NODE_LIMIT};

use crate::graph::{self, ConceptGraph, Diagnostic, GroundAtom, GroundError, InstanceSet};

#[derive(Debug, thiserror::Error)]
pub enum IlpError {
    #[error("graph has errors: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Diagnostic>),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no score for {instance} {label_set}.{label}")]
    MissingScore { instance: String, label_set: String, label: String },
    #[error("score key `{label}` on {instance} matches several label sets; qualify it as set.label")]
    AmbiguousScore { instance: String, label: String },
    #[error("score for {instance} {label} is not a probability: {value}")]
    InvalidScore { instance: String, label: String, value: f64 },
    #[error("scores for {instance} {label_set} sum to {sum}, not 1")]
    NotNormalized { instance: String, label_set: String, sum: f64 },
    #[error("formula mentions {0:?}, which is not a decision slot")]
    UnknownAtom(GroundAtom),
    #[error("search exceeded {nodes} nodes")]
    BudgetExceeded { nodes: u64 },
}

/// Validates, grounds, compiles and solves in one call. Scores must be
/// normalized per slot.
pub fn infer(
    graph: &ConceptGraph,
    instances: &InstanceSet,
    scores: &ScoreTable,
    options: SolveOptions,
) -> Result<Assignment, IlpError> {
    let diags = graph::validate(graph);
    if graph::has_errors(&diags) {
        return Err(IlpError::InvalidGraph(diags.into_iter().filter(Diagnostic::is_error).collect()));
    }
    let ground = graph::ground(graph, instances)?;
    scores.check_normalized(&ground)?;
    let program = compile(&ground, scores)?;
    solve(&program, options)
}
