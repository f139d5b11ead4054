use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::BindingError;
use crate::graph::{ConceptGraph, RelationKind};

/// How dataset records populate a graph and which model scores each
/// label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingSpec {
    /// Concept that receives one instance per record.
    pub root: String,
    #[serde(default = "default_id_field")]
    pub id_field: String,
    #[serde(default)]
    pub properties: Vec<PropertyBinding>,
    #[serde(default)]
    pub edges: Vec<EdgeBinding>,
    #[serde(default)]
    pub relations: Vec<RelationBinding>,
    #[serde(default)]
    pub models: Vec<ModelBinding>,
}

fn default_id_field() -> String {
    "id".to_string()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReaderKind {
    /// Copies a field into an instance property.
    #[default]
    Reader,
    /// Reads an annotation into the gold channel.
    LabelReader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyBinding {
    pub concept: String,
    pub property: String,
    pub field: String,
    #[serde(default)]
    pub reader: ReaderKind,
    /// Target label set for label readers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_set: Option<String>,
}

/// Child-list field feeding a `contains` relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeBinding {
    pub relation: String,
    pub field: String,
    /// Parallel parent fields whose elements are merged into each child
    /// record (e.g. per-token labels next to the token list).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zip: Vec<String>,
}

/// Index-tuple field feeding a `has_a` relation. Indices refer to the
/// owner's children of each slot concept, in binding order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationBinding {
    pub relation: String,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBinding {
    pub label_set: String,
    pub model: super::ModelConfig,
}

impl BindingSpec {
    pub fn from_json(text: &str) -> Result<Self, BindingError> {
        serde_json::from_str(text).map_err(|e| BindingError::Malformed(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("binding spec serializes")
    }

    pub fn model_for(&self, label_set: &str) -> Option<&super::ModelConfig> {
        self.models.iter().find(|m| m.label_set == label_set).map(|m| &m.model)
    }

    /// Reader properties bound on `concept`.
    pub fn reader_properties<'a>(&'a self, concept: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.properties
            .iter()
            .filter(move |p| p.concept == concept && p.reader == ReaderKind::Reader)
            .map(|p| p.property.as_str())
    }

    /// Checks every reference against the graph.
    pub fn validate(&self, graph: &ConceptGraph) -> Result<(), BindingError> {
        if !graph.is_entity(&self.root) {
            return Err(BindingError::UnknownConcept(self.root.clone()));
        }
        for p in &self.properties {
            if !graph.is_entity(&p.concept) {
                return Err(BindingError::UnknownConcept(p.concept.clone()));
            }
            match (p.reader, &p.label_set) {
                (ReaderKind::LabelReader, None) => {
                    return Err(BindingError::Invalid(format!("label reader `{}` names no label set", p.property)))
                }
                (ReaderKind::LabelReader, Some(set)) => {
                    let decl = graph.label_set(set).ok_or_else(|| BindingError::UnknownConcept(set.clone()))?;
                    if decl.parent() != Some(p.concept.as_str()) {
                        return Err(BindingError::Invalid(format!("label set `{set}` does not belong to `{}`", p.concept)));
                    }
                }
                (ReaderKind::Reader, _) => {}
            }
        }
        for e in &self.edges {
            let rel = graph.relation(&e.relation).ok_or_else(|| BindingError::UnknownRelation(e.relation.clone()))?;
            if rel.kind != RelationKind::Contains {
                return Err(BindingError::Invalid(format!("`{}` is not a contains relation", e.relation)));
            }
        }
        for r in &self.relations {
            let rel = graph.relation(&r.relation).ok_or_else(|| BindingError::UnknownRelation(r.relation.clone()))?;
            if rel.kind != RelationKind::HasA {
                return Err(BindingError::Invalid(format!("`{}` is not a has_a relation", r.relation)));
            }
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            let decl = graph.label_set(&m.label_set).ok_or_else(|| BindingError::UnknownConcept(m.label_set.clone()))?;
            if !seen.insert(&m.label_set) {
                return Err(BindingError::Invalid(format!("label set `{}` has two models", m.label_set)));
            }
            if !m.model.labels.is_empty() && m.model.labels != decl.labels() {
                return Err(BindingError::Invalid(format!(
                    "model labels {:?} differ from label set `{}` {:?}",
                    m.model.labels,
                    m.label_set,
                    decl.labels()
                )));
            }
            let parent = decl.parent().unwrap_or_default();
            let props: HashSet<&str> = self.reader_properties(parent).collect();
            for ph in super::placeholders(&m.model.template) {
                if !props.contains(ph.as_str()) {
                    return Err(BindingError::UnresolvedPlaceholder { label_set: m.label_set.clone(), placeholder: ph });
                }
            }
        }
        Ok(())
    }

    /// Fills empty model label lists from the graph.
    pub fn with_graph_labels(mut self, graph: &ConceptGraph) -> Self {
        for m in &mut self.models {
            if m.model.labels.is_empty() {
                if let Some(set) = graph.label_set(&m.label_set) {
                    m.model.labels = set.labels().to_vec();
                }
            }
        }
        self
    }

    /// Prompt template per label set.
    pub fn prompts(&self) -> BTreeMap<String, String> {
        self.models.iter().map(|m| (m.label_set.clone(), m.model.template.clone())).collect()
    }
}
