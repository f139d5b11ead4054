//! The conceptual-graph language: concepts, label sets, relations and
//! first-order constraint templates, plus grounding against instance data.
//!
//! ```text
//! graph wiqa {
//!   concept paragraph;
//!   concept question;
//!   labels answer of question { is_more, is_less, no_effect }
//!   contains paragraph_question: paragraph -> question;
//!   has_a transitivity in paragraph (t1: question, t2: question, t3: question);
//!   constraint transitive_more over transitivity(a, b, c) {
//!     if(and(answer.is_more(a), answer.is_more(b)), answer.is_more(c))
//!   }
//! }
//! ```

mod ast;
mod diagnostic;
mod ground;
mod instance;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::*;
pub use diagnostic::{codes, has_errors, Diagnostic, Severity, Span};
pub use ground::{
    ground, CountKindRepr, GroundAtom, GroundError, GroundExpr, GroundFormula, GroundedConstraintSet, Slot,
};
pub use instance::{Edge, GoldLabel, Instance, InstanceSet, RelationTuple};
pub use parser::parse;
pub use printer::{print, print_expr};
pub use validate::validate;


#[cfg(test)]
mod properties {
    use proptest::prelude::*;

    use super::*;
    use crate::fixtures;

    fn random_body() -> impl Strategy<Value = ConstraintExpr> {
        let var = prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(String::from);
        let label = (prop_oneof![Just("is_more"), Just("is_less"), Just("no_effect")], var.clone()).prop_map(|(l, v)| {
            ConstraintExpr::Label(LabelAtom { label_set: "answer".into(), label: l.into(), var: v, span: Span::default() })
        });
        let rel = proptest::collection::vec(var, 3).prop_map(|vars| {
            ConstraintExpr::Relation(RelationAtom { relation: "transitivity".into(), vars, span: Span::default() })
        });
        prop_oneof![4 => label, 1 => rel].prop_recursive(3, 20, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| ConstraintExpr::Not(Box::new(e))),
                proptest::collection::vec(inner.clone(), 1..4).prop_map(ConstraintExpr::And),
                proptest::collection::vec(inner.clone(), 1..4).prop_map(ConstraintExpr::Or),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ConstraintExpr::If(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ConstraintExpr::Iff(Box::new(a), Box::new(b))),
                (
                    prop_oneof![Just(CountKind::Exactly), Just(CountKind::AtMost), Just(CountKind::AtLeast)],
                    proptest::collection::vec(inner, 1..4),
                    0u32..4
                )
                    .prop_map(|(kind, args, k)| {
                        let k = k.min(args.len() as u32);
                        ConstraintExpr::Count { kind, k, args }
                    }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(bodies in proptest::collection::vec(random_body(), 1..4)) {
            let mut g = parse(fixtures::WIQA_GRAPH).unwrap();
            let template = g.constraints[0].clone();
            g.constraints.clear();
            for (i, body) in bodies.into_iter().enumerate() {
                let mut c = template.clone();
                c.name = format!("c{i}");
                c.body = body;
                g.constraints.push(c);
            }
            let printed = print(&g);
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &g);
            prop_assert_eq!(print(&reparsed), printed);
            prop_assert_eq!(validate(&reparsed), validate(&reparsed));
        }

        #[test]
        fn grounding_is_monotone_and_well_typed(extra in proptest::collection::vec((0usize..4, 0usize..4, 0usize..4), 0..6)) {
            let g = parse(fixtures::WIQA_GRAPH).unwrap();
            let mut inst = fixtures::wiqa_instances();
            inst.push("q4", "question");
            let before = ground(&g, &inst).unwrap();
            let ids = ["q1", "q2", "q3", "q4"];
            for (a, b, c) in &extra {
                inst.add_tuple("transitivity", Some("p1"), &[ids[*a], ids[*b], ids[*c]]);
            }
            let after = ground(&g, &inst).unwrap();
            prop_assert_eq!(&after.formulas[..before.formulas.len()], &before.formulas[..]);
            prop_assert_eq!(after.formulas.len(), before.formulas.len() + extra.len());
            for f in &after.formulas {
                for atom in f.expr.atoms() {
                    let concept = &inst.get(&atom.instance).unwrap().concept;
                    let set = g.label_set(&atom.label_set).unwrap();
                    prop_assert_eq!(set.parent(), Some(concept.as_str()));
                    prop_assert!(set.labels().contains(&atom.label));
                }
            }
        }
    }
}
