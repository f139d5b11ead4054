use std::fmt::Write;

use super::ast::*;

/// Renders a graph back to `.nsg` source. `parse(&print(g))` yields `g`.
pub fn print(graph: &ConceptGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph {} {{", graph.name);
    for c in &graph.concepts {
        match &c.kind {
            ConceptKind::Entity => {
                let _ = writeln!(out, "  concept {};", c.name);
            }
            ConceptKind::LabelSet { parent, labels } => {
                let _ = writeln!(out, "  labels {} of {} {{ {} }}", c.name, parent, labels.join(", "));
            }
        }
    }
    for r in &graph.relations {
        match r.kind {
            RelationKind::Contains => {
                let child = r.slots.first().map_or("", |s| s.concept.as_str());
                let _ = writeln!(out, "  contains {}: {} -> {};", r.name, r.parent, child);
            }
            RelationKind::HasA => {
                let slots: Vec<String> = r.slots.iter().map(|s| format!("{}: {}", s.role, s.concept)).collect();
                let _ = writeln!(out, "  has_a {} in {} ({});", r.name, r.parent, slots.join(", "));
            }
        }
    }
    for c in &graph.constraints {
        let _ = write!(out, "  constraint {} over {}({})", c.name, c.scope.target, c.scope.vars.join(", "));
        if let Some(owner) = &c.scope.owner {
            let _ = write!(out, " in {owner}");
        }
        let _ = writeln!(out, " {{\n    {}\n  }}", print_expr(&c.body));
    }
    out.push_str("}\n");
    out
}

pub fn print_expr(expr: &ConstraintExpr) -> String {
    let list = |xs: &[ConstraintExpr]| xs.iter().map(print_expr).collect::<Vec<_>>().join(", ");
    match expr {
        ConstraintExpr::If(a, b) => format!("if({}, {})", print_expr(a), print_expr(b)),
        ConstraintExpr::Iff(a, b) => format!("iff({}, {})", print_expr(a), print_expr(b)),
        ConstraintExpr::And(xs) => format!("and({})", list(xs)),
        ConstraintExpr::Or(xs) => format!("or({})", list(xs)),
        ConstraintExpr::Not(x) => format!("not({})", print_expr(x)),
        ConstraintExpr::Count { kind, k, args } => format!("{}({}, {})", kind.keyword(), k, list(args)),
        ConstraintExpr::Label(a) => format!("{}.{}({})", a.label_set, a.label, a.var),
        ConstraintExpr::Relation(a) => format!("{}({})", a.relation, a.vars.join(", ")),
    }
}
