use std::collections::BTreeMap;

use super::state::ExecutionReport;
use crate::binding::{BindingSpec, ModelBinding, ModelConfig, ModelMode, PropertyBinding};
use crate::export::{ProgramBundle, RunConfig};
use crate::graph::{self, ConceptGraph, InstanceSet, RelationKind};
use crate::ilp::{self, ScoreTable};

/// Two instances per entity concept, every containment edge from the first
/// parent, and one tuple per `has_a` relation.
pub fn smoke_instances(graph: &ConceptGraph) -> InstanceSet {
    let id = |concept: &str, i: usize| format!("{concept}#{i}");
    let mut set = InstanceSet::default();
    for c in graph.concepts.iter().filter(|c| graph.is_entity(&c.name)) {
        for i in 0..2 {
            set.push(id(&c.name, i), c.name.clone());
        }
    }
    for rel in &graph.relations {
        match rel.kind {
            RelationKind::Contains => {
                for i in 0..2 {
                    set.add_edge(&rel.name, &id(&rel.parent, 0), &id(&rel.slots[0].concept, i));
                }
            }
            RelationKind::HasA => {
                let members: Vec<String> = rel.slots.iter().enumerate().map(|(i, s)| id(&s.concept, i % 2)).collect();
                let members: Vec<&str> = members.iter().map(String::as_str).collect();
                set.add_tuple(&rel.name, Some(&id(&rel.parent, 0)), &members);
            }
        }
    }
    set
}

/// What the execution agent does with a draft: parse, validate, then ground
/// and compile against synthetic instances with uniform scores.
pub fn check_graph(source: &str) -> ExecutionReport {
    let fail = |messages: Vec<String>, diagnostics| ExecutionReport { ok: false, messages, diagnostics };
    if source.trim().is_empty() {
        return fail(vec!["the reply holds no graph".into()], Vec::new());
    }
    let g = match graph::parse(source) {
        Ok(g) => g,
        Err(diags) => return fail(diags.iter().map(|d| d.to_string()).collect(), diags),
    };
    let diags = graph::validate(&g);
    if graph::has_errors(&diags) {
        return fail(diags.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect(), diags);
    }
    let instances = smoke_instances(&g);
    let ground = match graph::ground(&g, &instances) {
        Ok(ground) => ground,
        Err(e) => return fail(vec![format!("grounding failed: {e}")], diags),
    };
    let mut scores = ScoreTable::new();
    for slot in &ground.slots {
        let p = 1.0 / slot.labels.len() as f64;
        scores.set_row(&slot.instance, &slot.label_set, &slot.labels.iter().map(|l| (l.clone(), p)).collect());
    }
    if let Err(e) = ilp::compile(&ground, &scores) {
        return fail(vec![format!("compilation failed: {e}")], diags);
    }
    let messages = diags.iter().map(|d| d.to_string()).collect();
    ExecutionReport { ok: true, messages, diagnostics: diags }
}

/// Errors in a sensor draft; empty when it parses and fits the graph.
pub fn check_sensors(graph_source: &str, sensors: &str) -> Vec<String> {
    let g = match graph::parse(graph_source) {
        Ok(g) => g,
        Err(diags) => return diags.iter().map(|d| format!("graph: {d}")).collect(),
    };
    if sensors.trim().is_empty() {
        return vec!["the reply holds no binding".into()];
    }
    match BindingSpec::from_json(sensors).and_then(|spec| spec.validate(&g)) {
        Ok(()) => Vec::new(),
        Err(e) => vec![e.to_string()],
    }
}

#[derive(Debug, serde::Deserialize)]
struct PropertyReply {
    #[serde(default)]
    properties: Vec<PropertyBinding>,
    #[serde(default)]
    prompts: BTreeMap<String, String>,
}

/// Merges the property designator's reply into the approved sensors and
/// gives every label set a mock model with its prompt.
pub fn assemble_bundle(
    graph_source: &str,
    sensors: &str,
    reply: &str,
    task: &str,
    dataset: Option<&str>,
) -> Result<ProgramBundle, String> {
    let g = graph::parse(graph_source).map_err(|d| format!("approved graph does not parse: {}", d[0]))?;
    let mut spec = BindingSpec::from_json(sensors).map_err(|e| format!("approved sensors: {e}"))?;
    let reply: PropertyReply = serde_json::from_str(reply).map_err(|e| format!("property designator reply: {e}"))?;
    for p in reply.properties {
        spec.properties.retain(|q| !(q.concept == p.concept && q.property == p.property));
        spec.properties.push(p);
    }
    let mut prompts = BTreeMap::new();
    for set in g.label_sets() {
        let template = reply.prompts.get(&set.name).cloned();
        match spec.models.iter_mut().find(|m| m.label_set == set.name) {
            Some(m) => {
                if let Some(t) = template {
                    m.model.template = t;
                }
            }
            None => spec.models.push(ModelBinding {
                label_set: set.name.clone(),
                model: ModelConfig {
                    mode: ModelMode::Mock,
                    template: template.unwrap_or_default(),
                    labels: set.labels().to_vec(),
                    ..ModelConfig::default()
                },
            }),
        }
    }
    let spec = spec.with_graph_labels(&g);
    for m in &spec.models {
        prompts.insert(m.label_set.clone(), m.model.template.clone());
    }
    let mut run = RunConfig::new(&g.name, task);
    run.dataset = dataset.map(str::to_string);
    let bundle = ProgramBundle { graph: graph_source.to_string(), bindings: spec, prompts, run };
    bundle.validate().map_err(|e| e.to_string())?;
    Ok(bundle)
}
