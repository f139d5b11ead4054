use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::compile::{IlpProgram, Row, Sense, SlotVars, VarId};
use super::IlpError;

/// Default cap on search nodes before giving up.
pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;

const OBJ_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub status: Status,
    /// `instance -> label set -> chosen label`.
    pub choices: BTreeMap<String, BTreeMap<String, String>>,
    pub objective: Option<f64>,
    pub nodes: u64,
}

impl Assignment {
    pub fn label(&self, instance: &str, label_set: &str) -> Option<&str> {
        self.choices.get(instance)?.get(label_set).map(String::as_str)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub node_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { node_limit: DEFAULT_NODE_LIMIT }
    }
}

const FREE: i8 = -1;

struct Search<'p> {
    prog: &'p IlpProgram,
    value: Vec<i8>,
    trail: Vec<VarId>,
    min_act: Vec<i64>,
    max_act: Vec<i64>,
    occurs: Vec<Vec<(usize, i64)>>,
    queue: Vec<usize>,
    queued: Vec<bool>,
    nodes: u64,
    limit: u64,
    best: Option<(f64, Vec<i8>)>,
}

impl<'p> Search<'p> {
    fn new(prog: &'p IlpProgram, limit: u64) -> Self {
        let mut occurs = vec![Vec::new(); prog.variables.len()];
        let mut min_act = Vec::with_capacity(prog.rows.len());
        let mut max_act = Vec::with_capacity(prog.rows.len());
        for (r, row) in prog.rows.iter().enumerate() {
            let (mut lo, mut hi) = (0, 0);
            for &(v, a) in &row.terms {
                occurs[v].push((r, a));
                if a < 0 {
                    lo += a;
                } else {
                    hi += a;
                }
            }
            min_act.push(lo);
            max_act.push(hi);
        }
        Search {
            prog,
            value: vec![FREE; prog.variables.len()],
            trail: Vec::new(),
            min_act,
            max_act,
            occurs,
            queue: Vec::new(),
            queued: vec![false; prog.rows.len()],
            nodes: 0,
            limit,
            best: None,
        }
    }

    fn assign(&mut self, v: VarId, val: i8) {
        self.value[v] = val;
        self.trail.push(v);
        for &(r, a) in &self.occurs[v] {
            match (val, a > 0) {
                (1, true) => self.min_act[r] += a,
                (1, false) => self.max_act[r] += a,
                (_, true) => self.max_act[r] -= a,
                (_, false) => self.min_act[r] -= a,
            }
            if !self.queued[r] {
                self.queued[r] = true;
                self.queue.push(r);
            }
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail entry");
            let val = self.value[v];
            for &(r, a) in &self.occurs[v] {
                match (val, a > 0) {
                    (1, true) => self.min_act[r] -= a,
                    (1, false) => self.max_act[r] -= a,
                    (_, true) => self.max_act[r] += a,
                    (_, false) => self.min_act[r] += a,
                }
            }
            self.value[v] = FREE;
        }
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r] = false;
        }
    }

    /// Bound propagation to a fixpoint. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        let mut fixes: Vec<(VarId, i8)> = Vec::new();
        while let Some(r) = self.queue.pop() {
            self.queued[r] = false;
            let row = &self.prog.rows[r];
            let (lo, hi) = (self.min_act[r], self.max_act[r]);
            let upper = matches!(row.sense, Sense::Le | Sense::Eq);
            let lower = matches!(row.sense, Sense::Ge | Sense::Eq);
            if (upper && lo > row.rhs) || (lower && hi < row.rhs) {
                self.clear_queue();
                return false;
            }
            fixes.clear();
            for &(v, a) in &row.terms {
                if self.value[v] != FREE {
                    continue;
                }
                if upper && a.abs() > row.rhs - lo {
                    fixes.push((v, if a > 0 { 0 } else { 1 }));
                } else if lower && a.abs() > hi - row.rhs {
                    fixes.push((v, if a > 0 { 1 } else { 0 }));
                }
            }
            for i in 0..fixes.len() {
                let (v, val) = fixes[i];
                if self.value[v] == FREE {
                    self.assign(v, val);
                } else if self.value[v] != val {
                    self.clear_queue();
                    return false;
                }
            }
        }
        true
    }

    fn slot_value(&self, slot: usize) -> Option<f64> {
        let s = &self.prog.slots[slot];
        s.vars.iter().find(|v| self.value[**v] == 1).map(|v| self.prog.variables[*v].objective)
    }

    fn bound(&self) -> f64 {
        let mut total = 0.0;
        for (i, s) in self.prog.slots.iter().enumerate() {
            total += match self.slot_value(i) {
                Some(obj) => obj,
                None => s
                    .vars
                    .iter()
                    .filter(|v| self.value[**v] == FREE)
                    .map(|v| self.prog.variables[*v].objective)
                    .fold(f64::NEG_INFINITY, f64::max),
            };
        }
        total
    }

    fn dfs(&mut self) -> Result<(), IlpError> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(IlpError::BudgetExceeded { nodes: self.limit });
        }
        let bound = self.bound();
        if let Some((best, _)) = &self.best {
            if bound <= best + OBJ_EPS {
                return Ok(());
            }
        }
        if !bound.is_finite() {
            return Ok(());
        }
        let open = (0..self.prog.slots.len()).find(|i| self.slot_value(*i).is_none());
        let branch: Vec<(VarId, i8)> = match open {
            Some(i) => self.prog.slots[i].vars.iter().filter(|v| self.value[**v] == FREE).map(|v| (*v, 1)).collect(),
            None => match self.value.iter().position(|x| *x == FREE) {
                Some(v) => vec![(v, 0), (v, 1)],
                None => {
                    let obj: f64 = (0..self.prog.slots.len()).map(|i| self.slot_value(i).unwrap_or(0.0)).sum();
                    let better = self.best.as_ref().is_none_or(|(b, _)| obj > b + OBJ_EPS);
                    if better {
                        self.best = Some((obj, self.value.clone()));
                    }
                    return Ok(());
                }
            },
        };
        for (v, val) in branch {
            let mark = self.trail.len();
            self.assign(v, val);
            if self.propagate() {
                self.dfs()?;
            }
            self.undo(mark);
        }
        Ok(())
    }
}

/// Splits the program into groups of variables that share no row or slot.
/// Each group is a standalone program; slots keep their relative order.
fn components(prog: &IlpProgram) -> Vec<(IlpProgram, Vec<VarId>)> {
    let n = prog.variables.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut link = |vars: &mut dyn Iterator<Item = VarId>| {
        if let Some(first) = vars.next() {
            for v in vars {
                let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                parent[a.max(b)] = a.min(b);
            }
        }
    };
    for slot in &prog.slots {
        link(&mut slot.vars.iter().copied());
    }
    for row in &prog.rows {
        link(&mut row.terms.iter().map(|t| t.0));
    }

    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut parts: Vec<(IlpProgram, Vec<VarId>)> = Vec::new();
    let mut local = vec![0usize; n];
    for v in 0..n {
        let root = find(&mut parent, v);
        let k = *index.entry(root).or_insert_with(|| {
            parts.push((IlpProgram { variables: Vec::new(), rows: Vec::new(), slots: Vec::new() }, Vec::new()));
            parts.len() - 1
        });
        local[v] = parts[k].1.len();
        parts[k].0.variables.push(prog.variables[v].clone());
        parts[k].1.push(v);
    }
    let part_of = |v: VarId, parent: &mut [usize]| index[&find(parent, v)];
    for s in &prog.slots {
        let Some(&first) = s.vars.first() else { continue };
        let k = part_of(first, &mut parent);
        let vars = s.vars.iter().map(|v| local[*v]).collect();
        parts[k].0.slots.push(SlotVars { vars, ..s.clone() });
    }
    for row in &prog.rows {
        // Rows without terms are checked by the caller.
        let Some(&(first, _)) = row.terms.first() else { continue };
        let k = part_of(first, &mut parent);
        let terms = row.terms.iter().map(|(v, a)| (local[*v], *a)).collect();
        parts[k].0.rows.push(Row { terms, ..row.clone() });
    }
    parts
}

fn search(prog: &IlpProgram, limit: u64) -> Result<(Option<(f64, Vec<i8>)>, u64), IlpError> {
    let mut search = Search::new(prog, limit);
    for r in 0..prog.rows.len() {
        search.queued[r] = true;
        search.queue.push(r);
    }
    if search.propagate() {
        search.dfs()?;
    }
    Ok((search.best, search.nodes))
}

/// Exact maximization by depth-first branch and bound. Slots are branched in
/// program order and labels in declaration order; among equal-objective
/// optima the first one found is kept, which makes the result the
/// lexicographically smallest label-index vector.
///
/// Independent parts are searched one at a time with a shared node budget.
/// The lexicographic tie rule carries over, since the smallest optimum of a
/// product of independent parts is the product of their smallest optima.
pub fn solve(prog: &IlpProgram, options: SolveOptions) -> Result<Assignment, IlpError> {
    let mut nodes = 0;
    let mut objective = 0.0;
    let mut value = vec![FREE; prog.variables.len()];
    let mut feasible = prog.rows.iter().filter(|r| r.terms.is_empty()).all(|r| r.is_satisfied(|_| 0));
    for (part, vars) in components(prog) {
        if !feasible {
            break;
        }
        let (best, used) = search(&part, options.node_limit - nodes)
            .map_err(|_| IlpError::BudgetExceeded { nodes: options.node_limit })?;
        nodes += used;
        let Some((obj, local)) = best else {
            feasible = false;
            break;
        };
        objective += obj;
        for (l, v) in vars.iter().enumerate() {
            value[*v] = local[l];
        }
    }
    if !feasible {
        return Ok(Assignment { status: Status::Infeasible, choices: BTreeMap::new(), objective: None, nodes });
    }
    let mut choices: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for s in &prog.slots {
        let idx = s.vars.iter().position(|v| value[*v] == 1).expect("every slot decided");
        choices.entry(s.instance.clone()).or_default().insert(s.label_set.clone(), s.labels[idx].clone());
    }
    Ok(Assignment { status: Status::Optimal, choices, objective: Some(objective), nodes })
}
