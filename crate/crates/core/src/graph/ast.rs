use super::diagnostic::Span;

/// Knowledge declaration: concepts, label sets, relations and constraint
/// templates. Produced by [`super::parse`] with every name resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptGraph {
    pub name: String,
    pub concepts: Vec<ConceptDecl>,
    pub relations: Vec<RelationDecl>,
    pub constraints: Vec<ConstraintDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptDecl {
    pub name: String,
    pub kind: ConceptKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConceptKind {
    Entity,
    /// Mutually exclusive labels predicted for every instance of `parent`.
    LabelSet { parent: String, labels: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    Contains,
    HasA,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub kind: RelationKind,
    /// Container concept for `contains`; owning concept for `has_a`.
    pub parent: String,
    pub slots: Vec<RoleSlot>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSlot {
    pub role: String,
    pub concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintDecl {
    pub name: String,
    pub scope: Scope,
    pub body: ConstraintExpr,
    pub span: Span,
}

/// What a constraint is quantified over. The template is grounded once per
/// instance (concept target), edge (`contains`) or tuple (`has_a`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    pub target: String,
    pub vars: Vec<String>,
    pub owner: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CountKind {
    Exactly,
    AtMost,
    AtLeast,
}

impl CountKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CountKind::Exactly => "exactly",
            CountKind::AtMost => "atMost",
            CountKind::AtLeast => "atLeast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintExpr {
    If(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Iff(Box<ConstraintExpr>, Box<ConstraintExpr>),
    And(Vec<ConstraintExpr>),
    Or(Vec<ConstraintExpr>),
    Not(Box<ConstraintExpr>),
    Count { kind: CountKind, k: u32, args: Vec<ConstraintExpr> },
    Label(LabelAtom),
    Relation(RelationAtom),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAtom {
    pub label_set: String,
    pub label: String,
    pub var: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationAtom {
    pub relation: String,
    pub vars: Vec<String>,
    pub span: Span,
}

impl ConstraintExpr {
    pub fn children(&self) -> Vec<&ConstraintExpr> {
        match self {
            ConstraintExpr::If(a, b) | ConstraintExpr::Iff(a, b) => vec![a, b],
            ConstraintExpr::And(xs) | ConstraintExpr::Or(xs) => xs.iter().collect(),
            ConstraintExpr::Count { args, .. } => args.iter().collect(),
            ConstraintExpr::Not(x) => vec![x],
            ConstraintExpr::Label(_) | ConstraintExpr::Relation(_) => Vec::new(),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ConstraintExpr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }
}

impl ConceptDecl {
    pub fn is_label_set(&self) -> bool {
        matches!(self.kind, ConceptKind::LabelSet { .. })
    }

    pub fn labels(&self) -> &[String] {
        match &self.kind {
            ConceptKind::LabelSet { labels, .. } => labels,
            ConceptKind::Entity => &[],
        }
    }

    pub fn parent(&self) -> Option<&str> {
        match &self.kind {
            ConceptKind::LabelSet { parent, .. } => Some(parent),
            ConceptKind::Entity => None,
        }
    }
}

impl RelationDecl {
    /// Number of variables a scope or atom over this relation binds.
    pub fn arity(&self) -> usize {
        match self.kind {
            RelationKind::Contains => 2,
            RelationKind::HasA => self.slots.len(),
        }
    }

    /// Concept of each bound variable, in binding order.
    pub fn var_concepts(&self) -> Vec<&str> {
        match self.kind {
            RelationKind::Contains => {
                let mut out = vec![self.parent.as_str()];
                out.extend(self.slots.iter().map(|s| s.concept.as_str()));
                out
            }
            RelationKind::HasA => self.slots.iter().map(|s| s.concept.as_str()).collect(),
        }
    }
}

impl ConceptGraph {
    pub fn concept(&self, name: &str) -> Option<&ConceptDecl> {
        self.concepts.iter().find(|c| c.name == name)
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn label_set(&self, name: &str) -> Option<&ConceptDecl> {
        self.concept(name).filter(|c| c.is_label_set())
    }

    pub fn label_sets(&self) -> impl Iterator<Item = &ConceptDecl> {
        self.concepts.iter().filter(|c| c.is_label_set())
    }

    /// Label sets attached to `concept`, in declaration order.
    pub fn label_sets_of<'a>(&'a self, concept: &'a str) -> impl Iterator<Item = &'a ConceptDecl> + 'a {
        self.label_sets().filter(move |c| c.parent() == Some(concept))
    }

    pub fn is_entity(&self, name: &str) -> bool {
        self.concept(name).is_some_and(|c| !c.is_label_set())
    }

    /// The `contains` relation linking `parent` to `child`, if unique.
    pub fn containment(&self, parent: &str, child: &str) -> Option<&RelationDecl> {
        let mut found = self.relations.iter().filter(|r| {
            r.kind == RelationKind::Contains
                && r.parent == parent
                && r.slots.first().is_some_and(|s| s.concept == child)
        });
        let first = found.next();
        if found.next().is_some() {
            None
        } else {
            first
        }
    }

    /// Concepts bound by a scope's variables (and owner variable), or `None`
    /// when the target is undeclared or the arity does not line up.
    pub fn scope_types(&self, scope: &Scope) -> Option<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(rel) = self.relation(&scope.target) {
            let concepts = rel.var_concepts();
            if concepts.len() != scope.vars.len() {
                return None;
            }
            for (v, c) in scope.vars.iter().zip(concepts) {
                out.push((v.clone(), c.to_string()));
            }
            match (&scope.owner, rel.kind) {
                (Some(owner), RelationKind::HasA) => out.push((owner.clone(), rel.parent.clone())),
                (Some(_), RelationKind::Contains) => return None,
                (None, _) => {}
            }
        } else if self.is_entity(&scope.target) {
            if scope.vars.len() != 1 || scope.owner.is_some() {
                return None;
            }
            out.push((scope.vars[0].clone(), scope.target.clone()));
        } else {
            return None;
        }
        Some(out)
    }
}
