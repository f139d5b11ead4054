//! Model declaration: sensors that populate a graph from dataset records,
//! and the prompt-driven learner that scores label sets.

mod answer;
mod bind;
mod model;
mod spec;

pub use answer::{alias_table, match_answer, AnswerMatch};
pub use bind::{bind, load_jsonl, Record};
pub use model::{
    one_hot, placeholders, predict, predict_scores, prediction_from_answer, prompt_messages, render_prompt, smoothed,
    ModelConfig, ModelMode, Prediction, MODE_ENV,
};
pub use spec::{BindingSpec, EdgeBinding, ModelBinding, PropertyBinding, ReaderKind, RelationBinding};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindingError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("`{0}` is not a declared concept or label set")]
    UnknownConcept(String),
    #[error("`{0}` is not a declared relation")]
    UnknownRelation(String),
    #[error("{0}")]
    Invalid(String),
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: String, field: String },
    #[error("record {record}: field `{field}` should be a {expected}")]
    TypeMismatch { record: String, field: String, expected: &'static str },
    #[error("record {record}: `{relation}` expects {expected} indices, found {found}")]
    ArityMismatch { record: String, relation: String, expected: usize, found: usize },
    #[error("record {record}: `{relation}` index {index} out of range (0..{len})")]
    IndexOutOfRange { record: String, relation: String, index: String, len: usize },
    #[error("record {record}: field `{field}` value {value} is not a label")]
    BadLabel { record: String, field: String, value: String },
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
    #[error("{label_set}: placeholder `{{{placeholder}}}` is not a bound property")]
    UnresolvedPlaceholder { label_set: String, placeholder: String },
    #[error("remote model: {0}")]
    Remote(String),
}
