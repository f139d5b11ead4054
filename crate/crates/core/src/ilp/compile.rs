use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::scores::{floored_log, ScoreTable};
use super::IlpError;
use crate::graph::{CountKindRepr, GroundAtom, GroundExpr, GroundedConstraintSet};

pub type VarId = usize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Atom(GroundAtom),
    /// Defined by encoding rows of the formula with this index.
    Aux { formula: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub kind: VarKind,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    /// One label per slot.
    ExactlyOne { slot: usize },
    /// A top-level counting formula written directly as a row.
    Formula { formula: usize },
    /// Definition of an auxiliary variable.
    Encoding { formula: usize },
    /// Pins a formula's root literal to true.
    Root { formula: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
    pub origin: RowOrigin,
}

impl Row {
    pub fn is_satisfied(&self, value: impl Fn(VarId) -> i64) -> bool {
        let lhs: i64 = self.terms.iter().map(|(v, a)| a * value(*v)).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
            Sense::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotVars {
    pub instance: String,
    pub label_set: String,
    pub labels: Vec<String>,
    pub vars: Vec<VarId>,
}

/// 0/1 program: maximize `Σ objective·x` subject to `rows`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IlpProgram {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Decision slots ordered by (instance id, label-set declaration order).
    pub slots: Vec<SlotVars>,
}

impl IlpProgram {
    pub fn atom_vars(&self) -> usize {
        self.variables.iter().filter(|v| matches!(v.kind, VarKind::Atom(_))).count()
    }

    pub fn aux_vars(&self) -> usize {
        self.variables.len() - self.atom_vars()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lit {
    Const(bool),
    Pos(VarId),
    Neg(VarId),
}

impl Lit {
    fn negate(self) -> Lit {
        match self {
            Lit::Const(b) => Lit::Const(!b),
            Lit::Pos(v) => Lit::Neg(v),
            Lit::Neg(v) => Lit::Pos(v),
        }
    }
}

/// `Σ coeff·x + constant`.
#[derive(Debug, Default)]
struct Lin {
    terms: BTreeMap<VarId, i64>,
    constant: i64,
}

impl Lin {
    fn add_lit(&mut self, lit: Lit, coeff: i64) {
        match lit {
            Lit::Const(true) => self.constant += coeff,
            Lit::Const(false) => {}
            Lit::Pos(v) => *self.terms.entry(v).or_default() += coeff,
            Lit::Neg(v) => {
                self.constant += coeff;
                *self.terms.entry(v).or_default() -= coeff;
            }
        }
    }

    fn of(lits: &[Lit]) -> Lin {
        let mut lin = Lin::default();
        for l in lits {
            lin.add_lit(*l, 1);
        }
        lin
    }
}

struct Builder {
    variables: Vec<Variable>,
    rows: Vec<Row>,
    seen_rows: HashSet<(Vec<(VarId, i64)>, Sense, i64)>,
    formula: usize,
}

impl Builder {
    fn aux(&mut self) -> VarId {
        self.variables.push(Variable { kind: VarKind::Aux { formula: self.formula }, objective: 0.0 });
        self.variables.len() - 1
    }

    fn row(&mut self, lin: Lin, sense: Sense, rhs: i64, origin: RowOrigin) {
        let rhs = rhs - lin.constant;
        let terms: Vec<(VarId, i64)> = lin.terms.into_iter().filter(|(_, a)| *a != 0).collect();
        if terms.is_empty() {
            let ok = match sense {
                Sense::Le => 0 <= rhs,
                Sense::Eq => 0 == rhs,
                Sense::Ge => 0 >= rhs,
            };
            if ok {
                return;
            }
            // Keep an unsatisfiable marker so the solver reports infeasibility.
            self.push_row(Vec::new(), Sense::Ge, 1, origin);
            return;
        }
        self.push_row(terms, sense, rhs, origin);
    }

    fn push_row(&mut self, terms: Vec<(VarId, i64)>, sense: Sense, rhs: i64, origin: RowOrigin) {
        if self.seen_rows.insert((terms.clone(), sense, rhs)) {
            self.rows.push(Row { terms, sense, rhs, origin });
        }
    }

    fn encoding(&mut self, lin: Lin, sense: Sense, rhs: i64) {
        let origin = RowOrigin::Encoding { formula: self.formula };
        self.row(lin, sense, rhs, origin);
    }

    fn and(&mut self, lits: Vec<Lit>) -> Lit {
        if lits.contains(&Lit::Const(false)) {
            return Lit::Const(false);
        }
        let mut vars: Vec<Lit> = Vec::new();
        for l in lits.into_iter().filter(|l| *l != Lit::Const(true)) {
            if vars.contains(&l.negate()) {
                return Lit::Const(false);
            }
            if !vars.contains(&l) {
                vars.push(l);
            }
        }
        match vars.len() {
            0 => Lit::Const(true),
            1 => vars[0],
            n => {
                let y = self.aux();
                for l in &vars {
                    // y <= l
                    let mut lin = Lin::default();
                    lin.add_lit(Lit::Pos(y), 1);
                    lin.add_lit(*l, -1);
                    self.encoding(lin, Sense::Le, 0);
                }
                // y >= Σl - (n-1)
                let mut lin = Lin::of(&vars);
                lin.add_lit(Lit::Pos(y), -1);
                self.encoding(lin, Sense::Le, n as i64 - 1);
                Lit::Pos(y)
            }
        }
    }

    fn or(&mut self, lits: Vec<Lit>) -> Lit {
        let negated: Vec<Lit> = lits.into_iter().map(Lit::negate).collect();
        if negated.contains(&Lit::Const(false)) {
            return Lit::Const(true);
        }
        let mut vars: Vec<Lit> = Vec::new();
        for l in negated.into_iter().filter(|l| *l != Lit::Const(true)).map(Lit::negate) {
            if vars.contains(&l.negate()) {
                return Lit::Const(true);
            }
            if !vars.contains(&l) {
                vars.push(l);
            }
        }
        match vars.len() {
            0 => Lit::Const(false),
            1 => vars[0],
            _ => {
                let y = self.aux();
                for l in &vars {
                    // y >= l
                    let mut lin = Lin::default();
                    lin.add_lit(Lit::Pos(y), 1);
                    lin.add_lit(*l, -1);
                    self.encoding(lin, Sense::Ge, 0);
                }
                // y <= Σl
                let mut lin = Lin::of(&vars);
                lin.add_lit(Lit::Pos(y), -1);
                self.encoding(lin, Sense::Ge, 0);
                Lit::Pos(y)
            }
        }
    }

    /// Reified `Σ lits >= k`.
    fn at_least(&mut self, lits: Vec<Lit>, k: i64) -> Lit {
        let trues = lits.iter().filter(|l| **l == Lit::Const(true)).count() as i64;
        let vars: Vec<Lit> = lits.into_iter().filter(|l| !matches!(l, Lit::Const(_))).collect();
        let need = k - trues;
        let m = vars.len() as i64;
        if need <= 0 {
            return Lit::Const(true);
        }
        if need > m {
            return Lit::Const(false);
        }
        if need == 1 {
            return self.or(vars);
        }
        if need == m {
            return self.and(vars);
        }
        let y = self.aux();
        // Σl >= need·y
        let mut lin = Lin::of(&vars);
        lin.add_lit(Lit::Pos(y), -need);
        self.encoding(lin, Sense::Ge, 0);
        // Σl <= (need-1) + (m-need+1)·y
        let mut lin = Lin::of(&vars);
        lin.add_lit(Lit::Pos(y), -(m - need + 1));
        self.encoding(lin, Sense::Le, need - 1);
        Lit::Pos(y)
    }

    fn count(&mut self, kind: CountKindRepr, k: i64, lits: Vec<Lit>) -> Lit {
        match kind {
            CountKindRepr::AtLeast => self.at_least(lits, k),
            CountKindRepr::AtMost => self.at_least(lits, k + 1).negate(),
            CountKindRepr::Exactly => {
                let lo = self.at_least(lits.clone(), k);
                let hi = self.at_least(lits, k + 1).negate();
                self.and(vec![lo, hi])
            }
        }
    }

    fn encode(&mut self, expr: &GroundExpr, atoms: &HashMap<&GroundAtom, VarId>) -> Result<Lit, IlpError> {
        Ok(match expr {
            GroundExpr::Const(b) => Lit::Const(*b),
            GroundExpr::Atom(a) => Lit::Pos(*atoms.get(a).ok_or_else(|| IlpError::UnknownAtom(a.clone()))?),
            GroundExpr::Not(x) => self.encode(x, atoms)?.negate(),
            GroundExpr::And(xs) => {
                let lits = xs.iter().map(|x| self.encode(x, atoms)).collect::<Result<_, _>>()?;
                self.and(lits)
            }
            GroundExpr::Or(xs) => {
                let lits = xs.iter().map(|x| self.encode(x, atoms)).collect::<Result<_, _>>()?;
                self.or(lits)
            }
            GroundExpr::If(a, b) => {
                let a = self.encode(a, atoms)?;
                let b = self.encode(b, atoms)?;
                self.or(vec![a.negate(), b])
            }
            GroundExpr::Iff(a, b) => {
                let a = self.encode(a, atoms)?;
                let b = self.encode(b, atoms)?;
                let fwd = self.or(vec![a.negate(), b]);
                let back = self.or(vec![a, b.negate()]);
                self.and(vec![fwd, back])
            }
            GroundExpr::Count { kind, k, args } => {
                let lits = args.iter().map(|x| self.encode(x, atoms)).collect::<Result<_, _>>()?;
                self.count(*kind, *k as i64, lits)
            }
        })
    }

    fn assert_true(&mut self, expr: &GroundExpr, atoms: &HashMap<&GroundAtom, VarId>) -> Result<(), IlpError> {
        let formula = self.formula;
        match expr {
            GroundExpr::And(xs) => {
                for x in xs {
                    self.assert_true(x, atoms)?;
                }
            }
            GroundExpr::Count { kind, k, args } => {
                let lits: Vec<Lit> = args.iter().map(|x| self.encode(x, atoms)).collect::<Result<_, _>>()?;
                let sense = match kind {
                    CountKindRepr::Exactly => Sense::Eq,
                    CountKindRepr::AtMost => Sense::Le,
                    CountKindRepr::AtLeast => Sense::Ge,
                };
                self.row(Lin::of(&lits), sense, *k as i64, RowOrigin::Formula { formula });
            }
            other => {
                let lit = self.encode(other, atoms)?;
                let mut lin = Lin::default();
                lin.add_lit(lit, 1);
                self.row(lin, Sense::Eq, 1, RowOrigin::Root { formula });
            }
        }
        Ok(())
    }
}

/// Builds the 0/1 program for a grounded constraint set: one variable per
/// (slot, label) with objective `ln(max(p, ε))`, one exactly-one row per
/// slot, and linear encodings of every ground formula.
pub fn compile(ground: &GroundedConstraintSet, scores: &ScoreTable) -> Result<IlpProgram, IlpError> {
    let mut order: Vec<usize> = (0..ground.slots.len()).collect();
    order.sort_by(|a, b| ground.slots[*a].instance.cmp(&ground.slots[*b].instance));

    let mut shared_labels: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    for slot in &ground.slots {
        let labels = shared_labels.entry(&slot.instance).or_default();
        for l in &slot.labels {
            *labels.entry(l).or_default() += 1;
        }
    }

    let mut b = Builder { variables: Vec::new(), rows: Vec::new(), seen_rows: HashSet::new(), formula: 0 };
    let mut slots = Vec::with_capacity(order.len());
    let mut atoms: HashMap<&GroundAtom, VarId> = HashMap::new();
    let mut atom_keys: Vec<GroundAtom> = Vec::new();
    for &i in &order {
        let slot = &ground.slots[i];
        let mut vars = Vec::with_capacity(slot.labels.len());
        for label in &slot.labels {
            let p = scores.lookup(&slot.instance, &slot.label_set, label).ok_or_else(|| IlpError::MissingScore {
                instance: slot.instance.clone(),
                label_set: slot.label_set.clone(),
                label: label.clone(),
            })?;
            if shared_labels[slot.instance.as_str()][label.as_str()] > 1
                && !scores.has_qualified(&slot.instance, &slot.label_set, label)
            {
                return Err(IlpError::AmbiguousScore { instance: slot.instance.clone(), label: label.clone() });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(IlpError::InvalidScore { instance: slot.instance.clone(), label: label.clone(), value: p });
            }
            let atom = GroundAtom { instance: slot.instance.clone(), label_set: slot.label_set.clone(), label: label.clone() };
            b.variables.push(Variable { kind: VarKind::Atom(atom.clone()), objective: floored_log(p) });
            vars.push(b.variables.len() - 1);
            atom_keys.push(atom);
        }
        slots.push(SlotVars {
            instance: slot.instance.clone(),
            label_set: slot.label_set.clone(),
            labels: slot.labels.clone(),
            vars,
        });
    }
    for (idx, slot) in slots.iter().enumerate() {
        let lin = Lin::of(&slot.vars.iter().map(|v| Lit::Pos(*v)).collect::<Vec<_>>());
        b.row(lin, Sense::Eq, 1, RowOrigin::ExactlyOne { slot: idx });
    }
    let mut atom_var = 0;
    for slot in &slots {
        for v in &slot.vars {
            atoms.insert(&atom_keys[atom_var], *v);
            atom_var += 1;
        }
    }
    for (i, f) in ground.formulas.iter().enumerate() {
        b.formula = i;
        b.assert_true(&f.expr, &atoms)?;
    }
    Ok(IlpProgram { variables: b.variables, rows: b.rows, slots })
}
