use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{codes, Diagnostic};
use super::printer::print_expr;

/// Mechanical review of a parsed graph. Findings are data: errors mean the
/// graph cannot be executed, warnings flag harmless redundancy.
pub fn validate(graph: &ConceptGraph) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    check_label_sets(graph, &mut diags);
    check_relations(graph, &mut diags);
    check_containment_cycles(graph, &mut diags);
    for c in &graph.constraints {
        check_constraint(graph, c, &mut diags);
    }
    check_unused(graph, &mut diags);
    check_duplicates(graph, &mut diags);
    diags
}

fn check_label_sets(graph: &ConceptGraph, diags: &mut Vec<Diagnostic>) {
    for set in graph.label_sets() {
        let parent = set.parent().unwrap_or_default();
        match graph.concept(parent) {
            None => diags.push(Diagnostic::error(
                codes::UNDEFINED,
                format!("label set `{}` is attached to undeclared concept `{parent}`", set.name),
                set.span,
            )),
            Some(p) if p.is_label_set() => diags.push(Diagnostic::error(
                codes::LABEL_SET_PARENT,
                format!("label set `{}` is attached to label set `{parent}`; attach it to an entity concept", set.name),
                set.span,
            )),
            Some(_) => {}
        }
        if set.labels().len() < 2 {
            diags.push(Diagnostic::error(
                codes::ARITY_MISMATCH,
                format!("label set `{}` needs at least two labels", set.name),
                set.span,
            ));
        }
    }
}

fn check_relations(graph: &ConceptGraph, diags: &mut Vec<Diagnostic>) {
    for rel in &graph.relations {
        let expected_ok = match rel.kind {
            RelationKind::Contains => rel.slots.len() == 1,
            RelationKind::HasA => rel.slots.len() >= 2,
        };
        if !expected_ok {
            diags.push(Diagnostic::error(
                codes::ARITY_MISMATCH,
                format!("relation `{}` has {} slot(s)", rel.name, rel.slots.len()),
                rel.span,
            ));
        }
        for concept in std::iter::once(rel.parent.as_str()).chain(rel.slots.iter().map(|s| s.concept.as_str())) {
            if !graph.is_entity(concept) {
                let code = if graph.concept(concept).is_some() { codes::TYPE_MISMATCH } else { codes::UNDEFINED };
                diags.push(Diagnostic::error(
                    code,
                    format!("relation `{}` refers to `{concept}`, which is not an entity concept", rel.name),
                    rel.span,
                ));
            }
        }
    }
}

fn check_containment_cycles(graph: &ConceptGraph, diags: &mut Vec<Diagnostic>) {
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for rel in graph.relations.iter().filter(|r| r.kind == RelationKind::Contains) {
        for slot in &rel.slots {
            edges.entry(rel.parent.as_str()).or_default().push(slot.concept.as_str());
        }
    }
    // Reported once per relation that closes a cycle.
    for rel in graph.relations.iter().filter(|r| r.kind == RelationKind::Contains) {
        let Some(child) = rel.slots.first() else { continue };
        let mut stack = vec![child.concept.as_str()];
        let mut seen = HashSet::new();
        let mut cyclic = false;
        while let Some(node) = stack.pop() {
            if node == rel.parent {
                cyclic = true;
                break;
            }
            if seen.insert(node) {
                stack.extend(edges.get(node).into_iter().flatten().copied());
            }
        }
        if cyclic {
            diags.push(Diagnostic::error(
                codes::CYCLIC_CONTAINMENT,
                format!("containment `{}` makes `{}` contain itself", rel.name, rel.parent),
                rel.span,
            ));
        }
    }
}

fn check_constraint(graph: &ConceptGraph, c: &ConstraintDecl, diags: &mut Vec<Diagnostic>) {
    let scope = &c.scope;
    let types = match graph.relation(&scope.target) {
        Some(rel) => {
            if scope.vars.len() != rel.arity() {
                diags.push(Diagnostic::error(
                    codes::ARITY_MISMATCH,
                    format!(
                        "constraint `{}` binds {} variable(s) over `{}`, which has arity {}",
                        c.name,
                        scope.vars.len(),
                        rel.name,
                        rel.arity()
                    ),
                    scope.span,
                ));
                return;
            }
            if scope.owner.is_some() && rel.kind == RelationKind::Contains {
                diags.push(Diagnostic::error(
                    codes::ARITY_MISMATCH,
                    format!("constraint `{}` binds an owner over containment `{}`", c.name, rel.name),
                    scope.span,
                ));
                return;
            }
            graph.scope_types(scope)
        }
        None => match graph.concept(&scope.target) {
            Some(concept) if concept.is_label_set() => {
                diags.push(Diagnostic::error(
                    codes::TYPE_MISMATCH,
                    format!("constraint `{}` is scoped over label set `{}`", c.name, concept.name),
                    scope.span,
                ));
                return;
            }
            Some(_) => {
                if scope.vars.len() != 1 || scope.owner.is_some() {
                    diags.push(Diagnostic::error(
                        codes::ARITY_MISMATCH,
                        format!("constraint `{}` over concept `{}` must bind exactly one variable", c.name, scope.target),
                        scope.span,
                    ));
                    return;
                }
                graph.scope_types(scope)
            }
            None => {
                diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("constraint `{}` is scoped over undeclared `{}`", c.name, scope.target),
                    scope.span,
                ));
                return;
            }
        },
    };
    let types: HashMap<String, String> = types.unwrap_or_default().into_iter().collect();

    c.body.walk(&mut |node| match node {
        ConstraintExpr::Label(atom) => {
            let Some(set) = graph.label_set(&atom.label_set) else {
                diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("`{}` is not a declared label set", atom.label_set),
                    atom.span,
                ));
                return;
            };
            if !set.labels().contains(&atom.label) {
                diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("label set `{}` has no label `{}`", set.name, atom.label),
                    atom.span,
                ));
            }
            match types.get(&atom.var) {
                None => diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("variable `{}` is not bound by the scope", atom.var),
                    atom.span,
                )),
                Some(t) if Some(t.as_str()) != set.parent() => diags.push(Diagnostic::error(
                    codes::TYPE_MISMATCH,
                    format!(
                        "`{}.{}` applies to `{}`, but `{}` is a `{}`",
                        set.name,
                        atom.label,
                        set.parent().unwrap_or_default(),
                        atom.var,
                        t
                    ),
                    atom.span,
                )),
                Some(_) => {}
            }
        }
        ConstraintExpr::Relation(atom) => {
            let Some(rel) = graph.relation(&atom.relation) else {
                diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("`{}` is not a declared relation", atom.relation),
                    atom.span,
                ));
                return;
            };
            if atom.vars.len() != rel.arity() {
                diags.push(Diagnostic::error(
                    codes::ARITY_MISMATCH,
                    format!("`{}` takes {} argument(s), found {}", rel.name, rel.arity(), atom.vars.len()),
                    atom.span,
                ));
                return;
            }
            for (var, concept) in atom.vars.iter().zip(rel.var_concepts()) {
                match types.get(var) {
                    None => diags.push(Diagnostic::error(
                        codes::UNDEFINED,
                        format!("variable `{var}` is not bound by the scope"),
                        atom.span,
                    )),
                    Some(t) if t != concept => diags.push(Diagnostic::error(
                        codes::TYPE_MISMATCH,
                        format!("`{}` expects a `{concept}` where `{var}` is a `{t}`", rel.name),
                        atom.span,
                    )),
                    Some(_) => {}
                }
            }
        }
        ConstraintExpr::Count { kind, k, args } if *k as usize > args.len() => {
            diags.push(Diagnostic::error(
                codes::INVALID_COUNT,
                format!("`{}({k}, ...)` has only {} argument(s)", kind.keyword(), args.len()),
                c.span,
            ));
        }
        _ => {}
    });
}

fn check_unused(graph: &ConceptGraph, diags: &mut Vec<Diagnostic>) {
    let mut used: HashSet<&str> = HashSet::new();
    for set in graph.label_sets() {
        used.extend(set.parent());
    }
    for rel in &graph.relations {
        used.insert(&rel.parent);
        used.extend(rel.slots.iter().map(|s| s.concept.as_str()));
    }
    for c in &graph.constraints {
        used.insert(&c.scope.target);
    }
    for concept in graph.concepts.iter().filter(|c| !c.is_label_set()) {
        if !used.contains(concept.name.as_str()) {
            diags.push(Diagnostic::warning(
                codes::UNUSED_CONCEPT,
                format!("concept `{}` is not used by any relation, label set or constraint", concept.name),
                concept.span,
            ));
        }
    }
}

/// Canonical text of a constraint with variables renamed by scope position.
pub(crate) fn canonical_constraint(c: &ConstraintDecl) -> String {
    let mut rename: HashMap<&str, String> = HashMap::new();
    for (i, v) in c.scope.vars.iter().enumerate() {
        rename.insert(v, format!("${i}"));
    }
    if let Some(owner) = &c.scope.owner {
        rename.insert(owner, "$owner".to_string());
    }
    let body = rename_vars(&c.body, &rename);
    format!(
        "{}/{}/{}:{}",
        c.scope.target,
        c.scope.vars.len(),
        c.scope.owner.is_some(),
        print_expr(&body)
    )
}

fn rename_vars(expr: &ConstraintExpr, rename: &HashMap<&str, String>) -> ConstraintExpr {
    let get = |v: &String| rename.get(v.as_str()).cloned().unwrap_or_else(|| v.clone());
    let list = |xs: &[ConstraintExpr]| xs.iter().map(|x| rename_vars(x, rename)).collect();
    match expr {
        ConstraintExpr::If(a, b) => ConstraintExpr::If(Box::new(rename_vars(a, rename)), Box::new(rename_vars(b, rename))),
        ConstraintExpr::Iff(a, b) => ConstraintExpr::Iff(Box::new(rename_vars(a, rename)), Box::new(rename_vars(b, rename))),
        ConstraintExpr::And(xs) => ConstraintExpr::And(list(xs)),
        ConstraintExpr::Or(xs) => ConstraintExpr::Or(list(xs)),
        ConstraintExpr::Not(x) => ConstraintExpr::Not(Box::new(rename_vars(x, rename))),
        ConstraintExpr::Count { kind, k, args } => ConstraintExpr::Count { kind: *kind, k: *k, args: list(args) },
        ConstraintExpr::Label(a) => ConstraintExpr::Label(LabelAtom { var: get(&a.var), ..a.clone() }),
        ConstraintExpr::Relation(a) => {
            ConstraintExpr::Relation(RelationAtom { vars: a.vars.iter().map(get).collect(), ..a.clone() })
        }
    }
}

fn check_duplicates(graph: &ConceptGraph, diags: &mut Vec<Diagnostic>) {
    let mut seen: HashMap<String, &str> = HashMap::new();
    for c in &graph.constraints {
        let key = canonical_constraint(c);
        if let Some(first) = seen.get(&key) {
            diags.push(Diagnostic::warning(
                codes::DUPLICATE_CONSTRAINT,
                format!("constraint `{}` repeats constraint `{first}`", c.name),
                c.span,
            ));
        } else {
            seen.insert(key, &c.name);
        }
    }
}
