use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Populated graph: instances with properties, containment edges and
/// `has_a` tuples. Gold labels live in their own channel and are never
/// consulted by inference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    #[serde(default)]
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub tuples: Vec<RelationTuple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold: Vec<GoldLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub concept: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub relation: String,
    pub parent: String,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTuple {
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub instance: String,
    pub label_set: String,
    pub label: String,
}

impl InstanceSet {
    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn of_concept<'a>(&'a self, concept: &'a str) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances.iter().filter(move |i| i.concept == concept)
    }

    pub fn push(&mut self, id: impl Into<String>, concept: impl Into<String>) -> &mut Instance {
        self.instances.push(Instance { id: id.into(), concept: concept.into(), properties: BTreeMap::new() });
        self.instances.last_mut().expect("just pushed")
    }

    pub fn add_edge(&mut self, relation: &str, parent: &str, child: &str) {
        self.edges.push(Edge { relation: relation.into(), parent: parent.into(), child: child.into() });
    }

    pub fn add_tuple(&mut self, relation: &str, owner: Option<&str>, members: &[&str]) {
        self.tuples.push(RelationTuple {
            relation: relation.into(),
            owner: owner.map(Into::into),
            members: members.iter().map(|m| m.to_string()).collect(),
        });
    }
}
