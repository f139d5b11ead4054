use std::collections::{HashMap, HashSet};

use serde_json::{Map, Value};

use super::spec::{BindingSpec, ReaderKind};
use super::BindingError;
use crate::graph::{ConceptGraph, GoldLabel, InstanceSet};

/// One dataset record: a JSON object.
pub type Record = Map<String, Value>;

/// Parses JSON Lines. Blank lines are skipped.
pub fn load_jsonl(text: &str) -> Result<Vec<Record>, BindingError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(map)) => out.push(map),
            Ok(_) => return Err(BindingError::Malformed(format!("line {}: record is not an object", n + 1))),
            Err(e) => return Err(BindingError::Malformed(format!("line {}: {e}", n + 1))),
        }
    }
    Ok(out)
}

fn id_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

struct Binder<'a> {
    spec: &'a BindingSpec,
    graph: &'a ConceptGraph,
    out: InstanceSet,
    ids: HashSet<String>,
    /// (owner id, child concept) -> child ids in binding order.
    children: HashMap<(String, String), Vec<String>>,
}

impl Binder<'_> {
    fn field<'r>(&self, record: &'r Record, id: &str, field: &str) -> Result<&'r Value, BindingError> {
        record.get(field).ok_or_else(|| BindingError::MissingField { record: id.to_string(), field: field.to_string() })
    }

    fn list<'r>(&self, record: &'r Record, id: &str, field: &str) -> Result<&'r Vec<Value>, BindingError> {
        self.field(record, id, field)?.as_array().ok_or_else(|| BindingError::TypeMismatch {
            record: id.to_string(),
            field: field.to_string(),
            expected: "list",
        })
    }

    fn gold(&self, id: &str, label_set: &str, field: &str, value: &Value) -> Result<GoldLabel, BindingError> {
        let labels = self.graph.label_set(label_set).map(|d| d.labels()).unwrap_or_default();
        let label = match value {
            Value::String(s) if labels.contains(s) => Some(s.clone()),
            Value::Number(n) => n.as_u64().and_then(|i| labels.get(i as usize)).cloned(),
            _ => None,
        };
        let label = label.ok_or_else(|| BindingError::BadLabel {
            record: id.to_string(),
            field: field.to_string(),
            value: value.to_string(),
        })?;
        Ok(GoldLabel { instance: id.to_string(), label_set: label_set.to_string(), label })
    }

    fn visit(&mut self, concept: &str, id: String, record: &Record) -> Result<(), BindingError> {
        if !self.ids.insert(id.clone()) {
            return Err(BindingError::DuplicateId(id));
        }
        let spec = self.spec;
        let idx = self.out.instances.len();
        self.out.push(id.clone(), concept);
        for p in spec.properties.iter().filter(|p| p.concept == concept) {
            let value = self.field(record, &id, &p.field)?;
            match p.reader {
                ReaderKind::Reader => {
                    self.out.instances[idx].properties.insert(p.property.clone(), value.clone());
                }
                ReaderKind::LabelReader => {
                    let set = p.label_set.as_deref().unwrap_or_default();
                    let gold = self.gold(&id, set, &p.field, value)?;
                    self.out.gold.push(gold);
                }
            }
        }
        let graph = self.graph;
        for e in &spec.edges {
            let rel = graph.relation(&e.relation).ok_or_else(|| BindingError::UnknownRelation(e.relation.clone()))?;
            if rel.parent != concept {
                continue;
            }
            let child_concept = &rel.slots[0].concept;
            let items = self.list(record, &id, &e.field)?;
            let mut zipped = Vec::with_capacity(e.zip.len());
            for z in &e.zip {
                let column = self.list(record, &id, z)?;
                if column.len() != items.len() {
                    return Err(BindingError::TypeMismatch {
                        record: id.clone(),
                        field: z.clone(),
                        expected: "list as long as the child list",
                    });
                }
                zipped.push((z, column));
            }
            for (i, item) in items.iter().enumerate() {
                let mut child = match item {
                    Value::Object(map) => map.clone(),
                    scalar => Map::from_iter([(e.field.clone(), scalar.clone())]),
                };
                for (z, column) in &zipped {
                    child.insert((*z).clone(), column[i].clone());
                }
                let child_id = child
                    .get(&spec.id_field)
                    .and_then(id_text)
                    .unwrap_or_else(|| format!("{id}/{}/{i}", e.field));
                self.out.add_edge(&e.relation, &id, &child_id);
                self.children.entry((id.clone(), child_concept.clone())).or_default().push(child_id.clone());
                self.visit(child_concept, child_id, &child)?;
            }
        }
        for r in &spec.relations {
            let rel = graph.relation(&r.relation).ok_or_else(|| BindingError::UnknownRelation(r.relation.clone()))?;
            if rel.parent != concept {
                continue;
            }
            for tuple in self.list(record, &id, &r.field)? {
                let indices = tuple.as_array().ok_or_else(|| BindingError::TypeMismatch {
                    record: id.clone(),
                    field: r.field.clone(),
                    expected: "list of index tuples",
                })?;
                if indices.len() != rel.slots.len() {
                    return Err(BindingError::ArityMismatch {
                        record: id.clone(),
                        relation: r.relation.clone(),
                        expected: rel.slots.len(),
                        found: indices.len(),
                    });
                }
                let mut members = Vec::with_capacity(indices.len());
                for (slot, index) in rel.slots.iter().zip(indices) {
                    let pool = self.children.get(&(id.clone(), slot.concept.clone())).map(Vec::as_slice).unwrap_or(&[]);
                    let member = index.as_u64().and_then(|i| pool.get(i as usize)).ok_or_else(|| {
                        BindingError::IndexOutOfRange {
                            record: id.clone(),
                            relation: r.relation.clone(),
                            index: index.to_string(),
                            len: pool.len(),
                        }
                    })?;
                    members.push(member.clone());
                }
                let refs: Vec<&str> = members.iter().map(String::as_str).collect();
                self.out.add_tuple(&r.relation, Some(&id), &refs);
            }
        }
        Ok(())
    }
}

/// Runs every sensor of `spec` over `records`: reader and label-reader
/// properties, containment edges from child lists, and `has_a` tuples from
/// index lists. Output order follows record order.
pub fn bind(records: &[Record], spec: &BindingSpec, graph: &ConceptGraph) -> Result<InstanceSet, BindingError> {
    spec.validate(graph)?;
    let mut binder = Binder { spec, graph, out: InstanceSet::default(), ids: HashSet::new(), children: HashMap::new() };
    for (n, record) in records.iter().enumerate() {
        let id = record
            .get(&spec.id_field)
            .and_then(id_text)
            .ok_or_else(|| BindingError::MissingField { record: format!("#{}", n + 1), field: spec.id_field.clone() })?;
        binder.visit(&spec.root, id, record)?;
    }
    Ok(binder.out)
}
