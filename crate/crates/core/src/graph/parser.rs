use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{codes, Diagnostic, Span};
use super::lexer::{tokenize, Token, TokenKind};

const KEYWORDS: &[&str] = &[
    "graph", "concept", "labels", "of", "contains", "has_a", "in", "constraint", "over", "if",
    "iff", "and", "or", "not", "exactly", "atMost", "atLeast",
];

/// Parses `.nsg` source into a resolved [`ConceptGraph`]. Any error
/// diagnostic fails the parse; the returned list then holds every error
/// found, in source order.
pub fn parse(source: &str) -> Result<ConceptGraph, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(source);
    let mut parser = Parser { tokens, pos: 0, diags: Vec::new() };
    let raw = parser.graph();
    diags.extend(parser.diags);
    let Some(raw) = raw else {
        return Err(sorted(diags));
    };
    let (graph, resolve_diags) = resolve(raw);
    diags.extend(resolve_diags);
    if diags.iter().any(Diagnostic::is_error) {
        Err(sorted(diags))
    } else {
        Ok(graph)
    }
}

fn sorted(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    diags.sort_by_key(|d| (d.line, d.col));
    diags
}

#[derive(Debug, Clone)]
struct Name {
    text: String,
    span: Span,
}

#[derive(Debug)]
struct RawGraph {
    name: Name,
    decls: Vec<RawDecl>,
}

#[derive(Debug)]
enum RawDecl {
    Concept(Name),
    Labels { name: Name, parent: Name, labels: Vec<Name> },
    Contains { name: Name, parent: Name, child: Name },
    HasA { name: Name, owner: Name, slots: Vec<(Name, Name)> },
    Constraint { name: Name, target: Name, vars: Vec<Name>, owner: Option<Name>, body: RawExpr },
}

#[derive(Debug)]
enum RawExpr {
    Op { op: String, k: Option<u64>, args: Vec<RawExpr> },
    Call { qualifier: Option<Name>, name: Name, args: Vec<Name> },
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        Diagnostic::error(
            codes::SYNTAX,
            format!("expected {expected}, found {}", tok.kind.describe()),
            tok.span,
        )
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.at(&kind) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match &self.peek().kind {
            TokenKind::Ident(s) if KEYWORDS.contains(&s.as_str()) => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("`{s}` is a reserved word and cannot be used as a name"),
                self.peek().span,
            )),
            TokenKind::Ident(s) => {
                let text = s.clone();
                let span = self.advance().span;
                Ok(Name { text, span })
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn graph(&mut self) -> Option<RawGraph> {
        let header = (|| {
            self.keyword("graph")?;
            let name = self.ident()?;
            self.expect(TokenKind::LBrace)?;
            Ok(name)
        })();
        let name = match header {
            Ok(name) => name,
            Err(d) => {
                self.diags.push(d);
                return None;
            }
        };
        let mut decls = Vec::new();
        loop {
            if self.at(&TokenKind::RBrace) {
                self.advance();
                break;
            }
            if self.at(&TokenKind::Eof) {
                self.diags.push(self.unexpected("`}` closing the graph"));
                return Some(RawGraph { name, decls });
            }
            match self.decl() {
                Ok(d) => decls.push(d),
                Err(d) => {
                    self.diags.push(d);
                    self.recover();
                }
            }
        }
        if !self.at(&TokenKind::Eof) {
            self.diags.push(self.unexpected("end of input after the graph block"));
        }
        Some(RawGraph { name, decls })
    }

    /// Skips to the start of the next declaration or the graph's closing brace.
    fn recover(&mut self) {
        let mut depth = 0i32;
        loop {
            match &self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::LBrace | TokenKind::LParen => depth += 1,
                TokenKind::RParen => depth -= 1,
                TokenKind::RBrace => {
                    if depth <= 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.advance();
                        if !self.at(&TokenKind::RParen) {
                            return;
                        }
                        continue;
                    }
                }
                TokenKind::Semi if depth <= 0 => {
                    self.advance();
                    return;
                }
                TokenKind::Ident(s)
                    if depth <= 0
                        && matches!(s.as_str(), "concept" | "labels" | "contains" | "has_a" | "constraint") =>
                {
                    return;
                }
                _ => {}
            }
            self.advance();
        }
    }

    fn decl(&mut self) -> PResult<RawDecl> {
        let TokenKind::Ident(kw) = self.peek().kind.clone() else {
            return Err(self.unexpected("a declaration"));
        };
        match kw.as_str() {
            "concept" => {
                self.advance();
                let name = self.ident()?;
                self.expect(TokenKind::Semi)?;
                Ok(RawDecl::Concept(name))
            }
            "labels" => {
                self.advance();
                let name = self.ident()?;
                self.keyword("of")?;
                let parent = self.ident()?;
                self.expect(TokenKind::LBrace)?;
                let mut labels = vec![self.ident()?];
                while self.at(&TokenKind::Comma) {
                    self.advance();
                    if self.at(&TokenKind::RBrace) {
                        break;
                    }
                    labels.push(self.ident()?);
                }
                self.expect(TokenKind::RBrace)?;
                if labels.len() < 2 {
                    return Err(Diagnostic::error(
                        codes::SYNTAX,
                        format!("label set `{}` needs at least two labels", name.text),
                        name.span,
                    ));
                }
                Ok(RawDecl::Labels { name, parent, labels })
            }
            "contains" => {
                self.advance();
                let name = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let parent = self.ident()?;
                self.expect(TokenKind::Arrow)?;
                let child = self.ident()?;
                self.expect(TokenKind::Semi)?;
                Ok(RawDecl::Contains { name, parent, child })
            }
            "has_a" => {
                self.advance();
                let name = self.ident()?;
                self.keyword("in")?;
                let owner = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let mut slots = Vec::new();
                loop {
                    let role = self.ident()?;
                    self.expect(TokenKind::Colon)?;
                    let concept = self.ident()?;
                    slots.push((role, concept));
                    if self.at(&TokenKind::Comma) {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect(TokenKind::RParen)?;
                self.expect(TokenKind::Semi)?;
                Ok(RawDecl::HasA { name, owner, slots })
            }
            "constraint" => {
                self.advance();
                let name = self.ident()?;
                self.keyword("over")?;
                let target = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let vars = self.name_list()?;
                self.expect(TokenKind::RParen)?;
                let owner = if self.at_keyword("in") {
                    self.advance();
                    Some(self.ident()?)
                } else {
                    None
                };
                self.expect(TokenKind::LBrace)?;
                let body = self.expr()?;
                self.expect(TokenKind::RBrace)?;
                Ok(RawDecl::Constraint { name, target, vars, owner, body })
            }
            _ => Err(self.unexpected("a declaration (`concept`, `labels`, `contains`, `has_a` or `constraint`)")),
        }
    }

    fn name_list(&mut self) -> PResult<Vec<Name>> {
        let mut names = vec![self.ident()?];
        while self.at(&TokenKind::Comma) {
            self.advance();
            names.push(self.ident()?);
        }
        Ok(names)
    }

    fn expr(&mut self) -> PResult<RawExpr> {
        let tok = self.peek().clone();
        let TokenKind::Ident(word) = &tok.kind else {
            return Err(self.unexpected("a constraint expression"));
        };
        let span = tok.span;
        match word.as_str() {
            "if" | "iff" | "and" | "or" | "not" | "exactly" | "atMost" | "atLeast" => {
                let op = word.clone();
                self.advance();
                self.expect(TokenKind::LParen)?;
                let k = if matches!(op.as_str(), "exactly" | "atMost" | "atLeast") {
                    let k = match self.peek().kind {
                        TokenKind::Int(n) => n,
                        _ => return Err(self.unexpected("an integer count")),
                    };
                    self.advance();
                    self.expect(TokenKind::Comma)?;
                    Some(k)
                } else {
                    None
                };
                let mut args = vec![self.expr()?];
                while self.at(&TokenKind::Comma) {
                    self.advance();
                    args.push(self.expr()?);
                }
                self.expect(TokenKind::RParen)?;
                let want = match op.as_str() {
                    "if" | "iff" => Some(2),
                    "not" => Some(1),
                    _ => None,
                };
                if let Some(n) = want {
                    if args.len() != n {
                        return Err(Diagnostic::error(
                            codes::SYNTAX,
                            format!("`{op}` takes {n} argument(s), found {}", args.len()),
                            span,
                        ));
                    }
                }
                if let Some(k) = k {
                    if k as usize > args.len() {
                        self.diags.push(Diagnostic::error(
                            codes::INVALID_COUNT,
                            format!("`{op}({k}, ...)` has only {} argument(s)", args.len()),
                            span,
                        ));
                    }
                }
                Ok(RawExpr::Op { op, k, args })
            }
            _ => {
                let first = self.ident()?;
                let (qualifier, name) = if self.at(&TokenKind::Dot) {
                    self.advance();
                    (Some(first), self.ident()?)
                } else {
                    (None, first)
                };
                self.expect(TokenKind::LParen)?;
                let args = self.name_list()?;
                self.expect(TokenKind::RParen)?;
                Ok(RawExpr::Call { qualifier, name, args })
            }
        }
    }
}

struct Resolver<'g> {
    graph: &'g ConceptGraph,
    diags: Vec<Diagnostic>,
    /// label name -> label sets declaring it
    label_index: HashMap<&'g str, Vec<&'g str>>,
}

fn resolve(raw: RawGraph) -> (ConceptGraph, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut names: HashMap<String, Span> = HashMap::new();
    let mut constraint_names: HashSet<String> = HashSet::new();
    let mut refs: Vec<Name> = Vec::new();
    let declare = |name: &Name, table: &mut HashMap<String, Span>, diags: &mut Vec<Diagnostic>| {
        if let Some(prev) = table.get(&name.text) {
            diags.push(Diagnostic::error(
                codes::DUPLICATE,
                format!("`{}` is already declared at {}", name.text, prev),
                name.span,
            ));
            false
        } else {
            table.insert(name.text.clone(), name.span);
            true
        }
    };

    let mut graph = ConceptGraph {
        name: raw.name.text.clone(),
        concepts: Vec::new(),
        relations: Vec::new(),
        constraints: Vec::new(),
    };
    let mut pending_constraints = Vec::new();

    for decl in raw.decls {
        match decl {
            RawDecl::Concept(name) => {
                if declare(&name, &mut names, &mut diags) {
                    graph.concepts.push(ConceptDecl { name: name.text, kind: ConceptKind::Entity, span: name.span });
                }
            }
            RawDecl::Labels { name, parent, labels } => {
                let mut seen = HashMap::new();
                let mut unique = Vec::new();
                for label in labels {
                    if let Some(prev) = seen.get(&label.text) {
                        diags.push(Diagnostic::error(
                            codes::DUPLICATE,
                            format!("label `{}` is already declared at {}", label.text, prev),
                            label.span,
                        ));
                    } else {
                        seen.insert(label.text.clone(), label.span);
                        unique.push(label.text);
                    }
                }
                if declare(&name, &mut names, &mut diags) {
                    graph.concepts.push(ConceptDecl {
                        name: name.text,
                        kind: ConceptKind::LabelSet { parent: parent.text.clone(), labels: unique },
                        span: name.span,
                    });
                    refs.push(parent.clone());
                }
            }
            RawDecl::Contains { name, parent, child } => {
                if declare(&name, &mut names, &mut diags) {
                    graph.relations.push(RelationDecl {
                        name: name.text,
                        kind: RelationKind::Contains,
                        parent: parent.text.clone(),
                        slots: vec![RoleSlot { role: child.text.clone(), concept: child.text.clone() }],
                        span: name.span,
                    });
                    refs.push(parent.clone());
                    refs.push(child.clone());
                }
            }
            RawDecl::HasA { name, owner, slots } => {
                if slots.len() < 2 {
                    diags.push(Diagnostic::error(
                        codes::ARITY_MISMATCH,
                        format!("has_a relation `{}` needs at least two slots", name.text),
                        name.span,
                    ));
                }
                let mut roles = HashMap::new();
                for (role, _) in &slots {
                    if let Some(prev) = roles.insert(role.text.clone(), role.span) {
                        diags.push(Diagnostic::error(
                            codes::DUPLICATE,
                            format!("role `{}` is already declared at {}", role.text, prev),
                            role.span,
                        ));
                    }
                }
                if declare(&name, &mut names, &mut diags) {
                    refs.push(owner.clone());
                    for (_, concept) in &slots {
                        refs.push(concept.clone());
                    }
                    graph.relations.push(RelationDecl {
                        name: name.text,
                        kind: RelationKind::HasA,
                        parent: owner.text,
                        slots: slots
                            .into_iter()
                            .map(|(role, concept)| RoleSlot { role: role.text, concept: concept.text })
                            .collect(),
                        span: name.span,
                    });
                }
            }
            RawDecl::Constraint { name, target, vars, owner, body } => {
                if !constraint_names.insert(name.text.clone()) {
                    diags.push(Diagnostic::error(
                        codes::DUPLICATE,
                        format!("constraint `{}` is declared more than once", name.text),
                        name.span,
                    ));
                    continue;
                }
                pending_constraints.push((name, target, vars, owner, body));
            }
        }
    }

    // Second pass: references. Declarations may appear in any order.
    for r in refs {
        if !names.contains_key(&r.text) {
            diags.push(Diagnostic::error(codes::UNDEFINED, format!("`{}` is not declared", r.text), r.span));
        }
    }

    let mut label_index: HashMap<&str, Vec<&str>> = HashMap::new();
    for set in graph.label_sets() {
        for label in set.labels() {
            label_index.entry(label.as_str()).or_default().push(set.name.as_str());
        }
    }
    let mut resolver = Resolver { graph: &graph, diags: Vec::new(), label_index };
    let mut constraints = Vec::new();
    for (name, target, vars, owner, body) in pending_constraints {
        if let Some(c) = resolver.constraint(name, target, vars, owner, body) {
            constraints.push(c);
        }
    }
    diags.extend(resolver.diags);
    graph.constraints = constraints;
    (graph, diags)
}

impl Resolver<'_> {
    fn constraint(
        &mut self,
        name: Name,
        target: Name,
        vars: Vec<Name>,
        owner: Option<Name>,
        body: RawExpr,
    ) -> Option<ConstraintDecl> {
        let is_target = self.graph.relation(&target.text).is_some() || self.graph.concept(&target.text).is_some();
        if !is_target {
            self.diags.push(Diagnostic::error(
                codes::UNDEFINED,
                format!("scope `{}` is not a declared relation or concept", target.text),
                target.span,
            ));
        }
        let mut seen: HashMap<&str, Span> = HashMap::new();
        for v in vars.iter().chain(owner.iter()) {
            if let Some(prev) = seen.insert(&v.text, v.span) {
                self.diags.push(Diagnostic::error(
                    codes::DUPLICATE,
                    format!("variable `{}` is already bound at {}", v.text, prev),
                    v.span,
                ));
            }
        }
        let scope = Scope {
            target: target.text.clone(),
            vars: vars.iter().map(|v| v.text.clone()).collect(),
            owner: owner.as_ref().map(|o| o.text.clone()),
            span: target.span,
        };
        let types: BTreeMap<String, String> =
            self.graph.scope_types(&scope).unwrap_or_default().into_iter().collect();
        let in_scope: HashSet<&str> = seen.keys().copied().collect();
        let body = self.expr(body, &in_scope, &types)?;
        Some(ConstraintDecl { name: name.text, scope, body, span: name.span })
    }

    fn check_vars(&mut self, args: &[Name], in_scope: &HashSet<&str>) -> bool {
        let mut ok = true;
        for a in args {
            if !in_scope.contains(a.text.as_str()) {
                self.diags.push(Diagnostic::error(
                    codes::UNDEFINED,
                    format!("variable `{}` is not bound by the constraint scope", a.text),
                    a.span,
                ));
                ok = false;
            }
        }
        ok
    }

    fn expr(
        &mut self,
        raw: RawExpr,
        in_scope: &HashSet<&str>,
        types: &BTreeMap<String, String>,
    ) -> Option<ConstraintExpr> {
        match raw {
            RawExpr::Op { op, k, args, .. } => {
                let mut out = Vec::with_capacity(args.len());
                let mut failed = false;
                for a in args {
                    match self.expr(a, in_scope, types) {
                        Some(e) => out.push(e),
                        None => failed = true,
                    }
                }
                if failed {
                    return None;
                }
                let mut it = out.into_iter();
                Some(match op.as_str() {
                    "if" => ConstraintExpr::If(Box::new(it.next()?), Box::new(it.next()?)),
                    "iff" => ConstraintExpr::Iff(Box::new(it.next()?), Box::new(it.next()?)),
                    "not" => ConstraintExpr::Not(Box::new(it.next()?)),
                    "and" => ConstraintExpr::And(it.collect()),
                    "or" => ConstraintExpr::Or(it.collect()),
                    count => {
                        let kind = match count {
                            "exactly" => CountKind::Exactly,
                            "atMost" => CountKind::AtMost,
                            _ => CountKind::AtLeast,
                        };
                        ConstraintExpr::Count { kind, k: k.unwrap_or(0) as u32, args: it.collect() }
                    }
                })
            }
            RawExpr::Call { qualifier, name, args } => {
                let vars_ok = self.check_vars(&args, in_scope);
                let span = qualifier.as_ref().map_or(name.span, |q| q.span);
                if let Some(q) = qualifier {
                    let Some(set) = self.graph.label_set(&q.text) else {
                        self.diags.push(Diagnostic::error(
                            codes::UNDEFINED,
                            format!("`{}` is not a declared label set", q.text),
                            q.span,
                        ));
                        return None;
                    };
                    if !set.labels().contains(&name.text) {
                        self.diags.push(Diagnostic::error(
                            codes::UNDEFINED,
                            format!("label set `{}` has no label `{}`", q.text, name.text),
                            span,
                        ));
                        return None;
                    }
                    return self.label_atom(q.text, name, args, span, vars_ok);
                }
                let is_relation = self.graph.relation(&name.text).is_some();
                let candidates = self.label_index.get(name.text.as_str()).cloned().unwrap_or_default();
                if is_relation && !candidates.is_empty() {
                    self.diags.push(Diagnostic::error(
                        codes::AMBIGUOUS,
                        format!("`{}` names both a relation and a label; qualify the label", name.text),
                        span,
                    ));
                    return None;
                }
                if is_relation {
                    if !vars_ok {
                        return None;
                    }
                    return Some(ConstraintExpr::Relation(RelationAtom {
                        relation: name.text,
                        vars: args.into_iter().map(|a| a.text).collect(),
                        span,
                    }));
                }
                if candidates.is_empty() {
                    self.diags.push(Diagnostic::error(
                        codes::UNDEFINED,
                        format!("`{}` is not a declared label or relation", name.text),
                        span,
                    ));
                    return None;
                }
                let set = if candidates.len() == 1 {
                    candidates[0].to_string()
                } else {
                    let var_type = args.first().and_then(|a| types.get(&a.text));
                    let narrowed: Vec<&&str> = candidates
                        .iter()
                        .filter(|s| {
                            var_type.is_some_and(|t| self.graph.concept(s).and_then(|c| c.parent()) == Some(t))
                        })
                        .collect();
                    if narrowed.len() != 1 {
                        self.diags.push(Diagnostic::error(
                            codes::AMBIGUOUS,
                            format!(
                                "label `{}` is declared in several label sets ({}); qualify it",
                                name.text,
                                candidates.join(", ")
                            ),
                            span,
                        ));
                        return None;
                    }
                    narrowed[0].to_string()
                };
                self.label_atom(set, name, args, span, vars_ok)
            }
        }
    }

    fn label_atom(&mut self, set: String, label: Name, args: Vec<Name>, span: Span, vars_ok: bool) -> Option<ConstraintExpr> {
        if args.len() != 1 {
            self.diags.push(Diagnostic::error(
                codes::ARITY_MISMATCH,
                format!("label atom `{}` takes exactly one variable, found {}", label.text, args.len()),
                span,
            ));
            return None;
        }
        if !vars_ok {
            return None;
        }
        Some(ConstraintExpr::Label(LabelAtom {
            label_set: set,
            label: label.text,
            var: args.into_iter().next()?.text,
            span,
        }))
    }
}
