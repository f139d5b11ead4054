use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::instance::InstanceSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub instance: String,
    pub label_set: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundExpr {
    Const(bool),
    Atom(GroundAtom),
    Not(Box<GroundExpr>),
    And(Vec<GroundExpr>),
    Or(Vec<GroundExpr>),
    If(Box<GroundExpr>, Box<GroundExpr>),
    Iff(Box<GroundExpr>, Box<GroundExpr>),
    Count { kind: CountKindRepr, k: u32, args: Vec<GroundExpr> },
}

/// Serializable mirror of [`CountKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKindRepr {
    Exactly,
    AtMost,
    AtLeast,
}

impl From<CountKind> for CountKindRepr {
    fn from(k: CountKind) -> Self {
        match k {
            CountKind::Exactly => CountKindRepr::Exactly,
            CountKind::AtMost => CountKindRepr::AtMost,
            CountKind::AtLeast => CountKindRepr::AtLeast,
        }
    }
}

impl GroundExpr {
    /// Direct boolean evaluation under a truth assignment for atoms.
    pub fn eval(&self, truth: &impl Fn(&GroundAtom) -> bool) -> bool {
        match self {
            GroundExpr::Const(b) => *b,
            GroundExpr::Atom(a) => truth(a),
            GroundExpr::Not(x) => !x.eval(truth),
            GroundExpr::And(xs) => xs.iter().all(|x| x.eval(truth)),
            GroundExpr::Or(xs) => xs.iter().any(|x| x.eval(truth)),
            GroundExpr::If(a, b) => !a.eval(truth) || b.eval(truth),
            GroundExpr::Iff(a, b) => a.eval(truth) == b.eval(truth),
            GroundExpr::Count { kind, k, args } => {
                let n = args.iter().filter(|x| x.eval(truth)).count() as u32;
                match kind {
                    CountKindRepr::Exactly => n == *k,
                    CountKindRepr::AtMost => n <= *k,
                    CountKindRepr::AtLeast => n >= *k,
                }
            }
        }
    }

    pub fn atoms(&self) -> Vec<&GroundAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a GroundAtom>) {
        match self {
            GroundExpr::Const(_) => {}
            GroundExpr::Atom(a) => out.push(a),
            GroundExpr::Not(x) => x.collect_atoms(out),
            GroundExpr::If(a, b) | GroundExpr::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            GroundExpr::And(xs) | GroundExpr::Or(xs) | GroundExpr::Count { args: xs, .. } => {
                for x in xs {
                    x.collect_atoms(out);
                }
            }
        }
    }
}

/// One categorical decision: exactly one label of `label_set` for `instance`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub instance: String,
    pub label_set: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundFormula {
    pub constraint: String,
    /// Scope variable -> instance id for this grounding.
    pub bindings: Vec<(String, String)>,
    pub expr: GroundExpr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedConstraintSet {
    pub slots: Vec<Slot>,
    pub formulas: Vec<GroundFormula>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error("instance `{id}` has undeclared or non-entity concept `{concept}`")]
    UnknownConcept { id: String, concept: String },
    #[error("instance id `{0}` is used more than once")]
    DuplicateInstance(String),
    #[error("`{relation}` refers to missing instance `{id}`")]
    MissingInstance { relation: String, id: String },
    #[error("`{0}` is not a declared relation of the right kind")]
    UnknownRelation(String),
    #[error("tuple of `{relation}` has {found} member(s), expected {expected}")]
    ArityMismatch { relation: String, expected: usize, found: usize },
    #[error("`{relation}` expects a `{expected}` but `{id}` is a `{found}`")]
    ConceptMismatch { relation: String, id: String, expected: String, found: String },
    #[error("constraint `{constraint}` binds an owner but a `{relation}` tuple has none")]
    MissingOwner { constraint: String, relation: String },
    #[error("constraint `{0}` has a scope that does not match its relation")]
    BadScope(String),
}

/// Instantiates every constraint template once per instance, edge or tuple
/// in its scope. Atoms become `(instance, label)` pairs; relation atoms are
/// decided by the instance set and fold to constants.
pub fn ground(graph: &ConceptGraph, instances: &InstanceSet) -> Result<GroundedConstraintSet, GroundError> {
    let mut concept_of: HashMap<&str, &str> = HashMap::new();
    for inst in &instances.instances {
        if !graph.is_entity(&inst.concept) {
            return Err(GroundError::UnknownConcept { id: inst.id.clone(), concept: inst.concept.clone() });
        }
        if concept_of.insert(&inst.id, &inst.concept).is_some() {
            return Err(GroundError::DuplicateInstance(inst.id.clone()));
        }
    }
    let check_member = |relation: &str, id: &str, expected: &str| -> Result<(), GroundError> {
        match concept_of.get(id) {
            None => Err(GroundError::MissingInstance { relation: relation.into(), id: id.into() }),
            Some(found) if *found != expected => Err(GroundError::ConceptMismatch {
                relation: relation.into(),
                id: id.into(),
                expected: expected.into(),
                found: found.to_string(),
            }),
            Some(_) => Ok(()),
        }
    };

    let mut facts: HashSet<(&str, Vec<&str>)> = HashSet::new();
    for edge in &instances.edges {
        let rel = graph
            .relation(&edge.relation)
            .filter(|r| r.kind == RelationKind::Contains)
            .ok_or_else(|| GroundError::UnknownRelation(edge.relation.clone()))?;
        check_member(&rel.name, &edge.parent, &rel.parent)?;
        check_member(&rel.name, &edge.child, &rel.slots[0].concept)?;
        facts.insert((&edge.relation, vec![&edge.parent, &edge.child]));
    }
    for tuple in &instances.tuples {
        let rel = graph
            .relation(&tuple.relation)
            .filter(|r| r.kind == RelationKind::HasA)
            .ok_or_else(|| GroundError::UnknownRelation(tuple.relation.clone()))?;
        if tuple.members.len() != rel.slots.len() {
            return Err(GroundError::ArityMismatch {
                relation: rel.name.clone(),
                expected: rel.slots.len(),
                found: tuple.members.len(),
            });
        }
        for (member, slot) in tuple.members.iter().zip(&rel.slots) {
            check_member(&rel.name, member, &slot.concept)?;
        }
        if let Some(owner) = &tuple.owner {
            check_member(&rel.name, owner, &rel.parent)?;
        }
        facts.insert((&tuple.relation, tuple.members.iter().map(String::as_str).collect()));
    }

    let mut slots = Vec::new();
    for set in graph.label_sets() {
        let parent = set.parent().unwrap_or_default();
        for inst in instances.of_concept(parent) {
            slots.push(Slot { instance: inst.id.clone(), label_set: set.name.clone(), labels: set.labels().to_vec() });
        }
    }

    let mut formulas = Vec::new();
    for c in &graph.constraints {
        let bindings = scope_bindings(graph, c, instances)?;
        for binding in bindings {
            let env: HashMap<&str, &str> = binding.iter().map(|(v, i)| (v.as_str(), i.as_str())).collect();
            let expr = ground_expr(&c.body, &env, &facts);
            formulas.push(GroundFormula { constraint: c.name.clone(), bindings: binding, expr });
        }
    }
    Ok(GroundedConstraintSet { slots, formulas })
}

fn scope_bindings(
    graph: &ConceptGraph,
    c: &ConstraintDecl,
    instances: &InstanceSet,
) -> Result<Vec<Vec<(String, String)>>, GroundError> {
    let scope = &c.scope;
    let bad_scope = || GroundError::BadScope(c.name.clone());
    let zip = |ids: &[&String]| -> Vec<(String, String)> {
        scope.vars.iter().cloned().zip(ids.iter().map(|s| s.to_string())).collect()
    };
    let Some(rel) = graph.relation(&scope.target) else {
        if !graph.is_entity(&scope.target) || scope.vars.len() != 1 {
            return Err(bad_scope());
        }
        return Ok(instances.of_concept(&scope.target).map(|i| zip(&[&i.id])).collect());
    };
    if scope.vars.len() != rel.arity() {
        return Err(bad_scope());
    }
    match rel.kind {
        RelationKind::Contains => {
            if scope.owner.is_some() {
                return Err(bad_scope());
            }
            Ok(instances
                .edges
                .iter()
                .filter(|e| e.relation == rel.name)
                .map(|e| zip(&[&e.parent, &e.child]))
                .collect())
        }
        RelationKind::HasA => {
            let mut out = Vec::new();
            for t in instances.tuples.iter().filter(|t| t.relation == rel.name) {
                let mut binding = zip(&t.members.iter().collect::<Vec<_>>());
                if let Some(owner_var) = &scope.owner {
                    let owner = t.owner.as_ref().ok_or_else(|| GroundError::MissingOwner {
                        constraint: c.name.clone(),
                        relation: rel.name.clone(),
                    })?;
                    binding.push((owner_var.clone(), owner.clone()));
                }
                out.push(binding);
            }
            Ok(out)
        }
    }
}

fn ground_expr(expr: &ConstraintExpr, env: &HashMap<&str, &str>, facts: &HashSet<(&str, Vec<&str>)>) -> GroundExpr {
    let list = |xs: &[ConstraintExpr]| xs.iter().map(|x| ground_expr(x, env, facts)).collect();
    let boxed = |x: &ConstraintExpr| Box::new(ground_expr(x, env, facts));
    match expr {
        ConstraintExpr::If(a, b) => GroundExpr::If(boxed(a), boxed(b)),
        ConstraintExpr::Iff(a, b) => GroundExpr::Iff(boxed(a), boxed(b)),
        ConstraintExpr::And(xs) => GroundExpr::And(list(xs)),
        ConstraintExpr::Or(xs) => GroundExpr::Or(list(xs)),
        ConstraintExpr::Not(x) => GroundExpr::Not(boxed(x)),
        ConstraintExpr::Count { kind, k, args } => GroundExpr::Count { kind: (*kind).into(), k: *k, args: list(args) },
        ConstraintExpr::Label(a) => GroundExpr::Atom(GroundAtom {
            instance: env.get(a.var.as_str()).copied().unwrap_or_default().to_string(),
            label_set: a.label_set.clone(),
            label: a.label.clone(),
        }),
        ConstraintExpr::Relation(a) => {
            let members: Vec<&str> = a.vars.iter().map(|v| env.get(v.as_str()).copied().unwrap_or_default()).collect();
            GroundExpr::Const(facts.contains(&(a.relation.as_str(), members)))
        }
    }
}
