use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::answer::{match_answer, AnswerMatch};
use super::spec::BindingSpec;
use super::BindingError;
use crate::chat::{ChatClient, ChatConfig, ChatMessage, KEY_ENV, URL_ENV};
use crate::graph::{ConceptGraph, Instance, InstanceSet};
use crate::ilp::{ScoreTable, PROB_FLOOR};

/// Overrides every model's mode when set to `mock` or `remote`.
pub const MODE_ENV: &str = "NESY_MODEL_MODE";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    #[default]
    Mock,
    Remote,
}

impl ModelMode {
    pub fn from_env() -> Option<Self> {
        match std::env::var(MODE_ENV).ok()?.as_str() {
            "mock" => Some(ModelMode::Mock),
            "remote" => Some(ModelMode::Remote),
            _ => None,
        }
    }
}

/// Prompt-driven zero-shot classifier for one label set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub mode: ModelMode,
    /// Prompt text; `{property}` placeholders are filled from the instance.
    #[serde(default)]
    pub template: String,
    #[serde(default)]
    pub labels: Vec<String>,
    /// Fixed distribution returned in mock mode (uniform when empty).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub row: BTreeMap<String, f64>,
    pub warning: Option<String>,
}

/// `{name}` placeholders in template order, duplicates kept once.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let Some(end) = after.find('}') else { break };
        let name = &after[..end];
        if !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
            rest = &after[end + 1..];
        } else {
            rest = after;
        }
    }
    out
}

fn property_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render_prompt(template: &str, instance: &Instance) -> Result<String, BindingError> {
    let mut out = template.to_string();
    for name in placeholders(template) {
        let value = instance.properties.get(&name).ok_or_else(|| BindingError::UnresolvedPlaceholder {
            label_set: instance.id.clone(),
            placeholder: name.clone(),
        })?;
        out = out.replace(&format!("{{{name}}}"), &property_text(value));
    }
    Ok(out)
}

/// `ε + (1 - nε)·w/Σw` so every entry is at least ε and the row sums to 1.
/// Zero total weight gives the uniform row.
pub fn smoothed(labels: &[String], weights: &[f64]) -> BTreeMap<String, f64> {
    let n = labels.len() as f64;
    let total: f64 = weights.iter().sum();
    labels
        .iter()
        .zip(weights)
        .map(|(l, w)| {
            let p = if total > 0.0 { PROB_FLOOR + (1.0 - n * PROB_FLOOR) * w / total } else { 1.0 / n };
            (l.clone(), p)
        })
        .collect()
}

pub fn one_hot(labels: &[String], hot: usize) -> BTreeMap<String, f64> {
    let weights: Vec<f64> = (0..labels.len()).map(|i| if i == hot { 1.0 } else { 0.0 }).collect();
    smoothed(labels, &weights)
}

fn remote_client(config: &ModelConfig) -> Result<ChatClient, BindingError> {
    let endpoint = match &config.endpoint {
        Some(e) => e.clone(),
        None => std::env::var(URL_ENV).map_err(|_| BindingError::Remote(format!("{URL_ENV} is not set")))?,
    };
    Ok(ChatClient::new(ChatConfig {
        endpoint,
        model: config.model.clone().unwrap_or_else(|| "default".into()),
        api_key: std::env::var(KEY_ENV).ok(),
        temperature: 0.0,
        reasoning_effort: None,
        timeout_secs: config.timeout_secs.unwrap_or(30),
    }))
}

/// Messages sent for one instance in remote mode.
pub fn prompt_messages(config: &ModelConfig, instance: &Instance) -> Result<Vec<ChatMessage>, BindingError> {
    let system = format!("Answer with exactly one of: {}.", config.labels.join(", "));
    Ok(vec![ChatMessage::system(system), ChatMessage::user(render_prompt(&config.template, instance)?)])
}

/// One label-set distribution for one instance.
pub fn predict(config: &ModelConfig, instance: &Instance) -> Result<Prediction, BindingError> {
    if config.labels.is_empty() {
        return Err(BindingError::Invalid("model has no output labels".into()));
    }
    match config.mode {
        ModelMode::Mock => {
            let weights: Vec<f64> = config.labels.iter().map(|l| config.scores.get(l).copied().unwrap_or(0.0)).collect();
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(BindingError::Invalid("mock scores must be non-negative".into()));
            }
            Ok(Prediction { row: smoothed(&config.labels, &weights), warning: None })
        }
        ModelMode::Remote => {
            let messages = prompt_messages(config, instance)?;
            let client = remote_client(config)?;
            let answer = client.complete(&messages).map_err(|e| BindingError::Remote(e.to_string()))?;
            Ok(prediction_from_answer(&config.labels, &answer, &instance.id))
        }
    }
}

pub fn prediction_from_answer(labels: &[String], answer: &str, instance: &str) -> Prediction {
    match match_answer(answer, labels) {
        AnswerMatch::Unparsed => Prediction {
            row: smoothed(labels, &vec![0.0; labels.len()]),
            warning: Some(format!("{instance}: could not map answer {answer:?} to a label; using uniform scores")),
        },
        m => Prediction { row: one_hot(labels, m.label().expect("parsed answer has a label")), warning: None },
    }
}

/// Scores every instance of every modelled label set. Only instance
/// properties are visible to models; gold labels are never read.
pub fn predict_scores(
    spec: &BindingSpec,
    graph: &ConceptGraph,
    instances: &InstanceSet,
    mode_override: Option<ModelMode>,
) -> Result<(ScoreTable, Vec<String>), BindingError> {
    let mut scores = ScoreTable::new();
    let mut warnings = Vec::new();
    for m in &spec.models {
        let decl = graph.label_set(&m.label_set).ok_or_else(|| BindingError::UnknownConcept(m.label_set.clone()))?;
        let mut config = m.model.clone();
        if config.labels.is_empty() {
            config.labels = decl.labels().to_vec();
        }
        if let Some(mode) = mode_override {
            config.mode = mode;
        }
        let parent = decl.parent().unwrap_or_default();
        for inst in instances.of_concept(parent) {
            let p = predict(&config, inst)?;
            warnings.extend(p.warning);
            scores.set_row(&inst.id, &m.label_set, &p.row);
        }
    }
    Ok((scores, warnings))
}
