use std::collections::BTreeMap;

use nesy_core::fixtures::*;
use nesy_core::graph::{
    self, CountKindRepr, GroundAtom, GroundExpr, GroundFormula, GroundedConstraintSet, InstanceSet, Slot,
};
use nesy_core::ilp::{compile, infer, solve, IlpError, RowOrigin, ScoreTable, SolveOptions, Status};
use proptest::prelude::*;

const EPS: f64 = 1e-9;

fn ln_floor(p: f64) -> f64 {
    p.max(1e-9).ln()
}

/// Exhaustive reference: walks assignments in lexicographic order of label
/// indices (slots sorted by instance id, then label-set order) and keeps the
/// first strictly better one.
fn brute_force(ground: &GroundedConstraintSet, scores: &ScoreTable) -> Option<(f64, Vec<String>)> {
    let mut slots: Vec<&Slot> = ground.slots.iter().collect();
    slots.sort_by(|a, b| a.instance.cmp(&b.instance));
    let mut idx = vec![0usize; slots.len()];
    let mut best: Option<(f64, Vec<String>)> = None;
    loop {
        let truth = |a: &GroundAtom| {
            slots
                .iter()
                .zip(&idx)
                .any(|(s, i)| s.instance == a.instance && s.label_set == a.label_set && s.labels[*i] == a.label)
        };
        if ground.formulas.iter().all(|f| f.expr.eval(&truth)) {
            let obj: f64 = slots
                .iter()
                .zip(&idx)
                .map(|(s, i)| ln_floor(scores.lookup(&s.instance, &s.label_set, &s.labels[*i]).unwrap()))
                .sum();
            if best.as_ref().is_none_or(|(b, _)| obj > b + EPS) {
                let labels = slots.iter().zip(&idx).map(|(s, i)| s.labels[*i].clone()).collect();
                best = Some((obj, labels));
            }
        }
        // odometer increment, last slot fastest
        let mut pos = slots.len();
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < slots[pos].labels.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn chosen(ground: &GroundedConstraintSet, result: &nesy_core::ilp::Assignment) -> Vec<String> {
    let mut slots: Vec<&Slot> = ground.slots.iter().collect();
    slots.sort_by(|a, b| a.instance.cmp(&b.instance));
    slots.iter().map(|s| result.label(&s.instance, &s.label_set).unwrap().to_string()).collect()
}

fn satisfies(ground: &GroundedConstraintSet, result: &nesy_core::ilp::Assignment) -> bool {
    let truth = |a: &GroundAtom| result.label(&a.instance, &a.label_set) == Some(a.label.as_str());
    ground.formulas.iter().all(|f| f.expr.eval(&truth))
}

#[derive(Debug, Clone)]
struct RandomProblem {
    ground: GroundedConstraintSet,
    scores: ScoreTable,
}

fn random_expr(atoms: Vec<GroundAtom>) -> impl Strategy<Value = GroundExpr> {
    let leaf = prop_oneof![
        8 => proptest::sample::select(atoms).prop_map(GroundExpr::Atom),
        1 => any::<bool>().prop_map(GroundExpr::Const),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| GroundExpr::Not(Box::new(e))),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(GroundExpr::And),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(GroundExpr::Or),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| GroundExpr::If(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| GroundExpr::Iff(Box::new(a), Box::new(b))),
            (
                prop_oneof![Just(CountKindRepr::Exactly), Just(CountKindRepr::AtMost), Just(CountKindRepr::AtLeast)],
                0u32..5,
                proptest::collection::vec(inner, 1..5)
            )
                .prop_map(|(kind, k, args)| GroundExpr::Count { kind, k, args }),
        ]
    })
}

fn random_problem() -> impl Strategy<Value = RandomProblem> {
    (1usize..=3, proptest::collection::vec(any::<bool>(), 3))
        .prop_flat_map(|(n, has_b)| {
            // Label set `a` on every instance, `b` on some; both contain `x`.
            let mut slots = Vec::new();
            for i in 0..n {
                slots.push(Slot {
                    instance: format!("i{i}"),
                    label_set: "a".into(),
                    labels: vec!["x".into(), "y".into(), "z".into()],
                });
            }
            for (i, b) in has_b.iter().enumerate().take(n) {
                if *b {
                    slots.push(Slot { instance: format!("i{i}"), label_set: "b".into(), labels: vec!["x".into(), "w".into()] });
                }
            }
            let atoms: Vec<GroundAtom> = slots
                .iter()
                .flat_map(|s| {
                    s.labels.iter().map(|l| GroundAtom {
                        instance: s.instance.clone(),
                        label_set: s.label_set.clone(),
                        label: l.clone(),
                    })
                })
                .collect();
            let n_atoms = atoms.len();
            (
                Just(slots),
                proptest::collection::vec(random_expr(atoms), 0..4),
                proptest::collection::vec(prop_oneof![1 => Just(0.0), 9 => 0.0f64..1.0], n_atoms),
            )
        })
        .prop_map(|(slots, exprs, probs)| {
            let mut scores = ScoreTable::new();
            let mut k = 0;
            for s in &slots {
                for l in &s.labels {
                    scores.set(&s.instance, &format!("{}.{l}", s.label_set), probs[k]);
                    k += 1;
                }
            }
            let formulas = exprs
                .into_iter()
                .enumerate()
                .map(|(i, expr)| GroundFormula { constraint: format!("c{i}"), bindings: Vec::new(), expr })
                .collect();
            RandomProblem { ground: GroundedConstraintSet { slots, formulas }, scores }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_matches_exhaustive_search(problem in random_problem()) {
        let program = compile(&problem.ground, &problem.scores).unwrap();
        let result = solve(&program, SolveOptions::default()).unwrap();
        match brute_force(&problem.ground, &problem.scores) {
            None => {
                prop_assert_eq!(result.status, Status::Infeasible);
                prop_assert!(result.objective.is_none());
            }
            Some((obj, labels)) => {
                prop_assert_eq!(result.status, Status::Optimal);
                prop_assert!((result.objective.unwrap() - obj).abs() < 1e-9);
                prop_assert_eq!(chosen(&problem.ground, &result), labels);
                prop_assert!(satisfies(&problem.ground, &result));
            }
        }
    }

    #[test]
    fn raising_a_chosen_score_keeps_it(problem in random_problem(), pick in 0usize..64, bump in 0.01f64..0.5) {
        let program = compile(&problem.ground, &problem.scores).unwrap();
        let before = solve(&program, SolveOptions::default()).unwrap();
        prop_assume!(before.is_optimal());
        let slot = &problem.ground.slots[pick % problem.ground.slots.len()];
        let label = before.label(&slot.instance, &slot.label_set).unwrap().to_string();
        let key = format!("{}.{label}", slot.label_set);
        let old = problem.scores.lookup(&slot.instance, &slot.label_set, &label).unwrap();
        let mut raised = problem.scores.clone();
        raised.set(&slot.instance, &key, old.max(1e-6) + bump);
        let after = solve(&compile(&problem.ground, &raised).unwrap(), SolveOptions::default()).unwrap();
        prop_assert_eq!(after.label(&slot.instance, &slot.label_set), Some(label.as_str()));
    }

    #[test]
    fn scaling_one_label_set_keeps_choices(problem in random_problem(), pick in 0usize..64, factor in 0.05f64..20.0) {
        // Keep every probability clear of the floor so the log shift is uniform.
        let mut scores = ScoreTable::new();
        for s in &problem.ground.slots {
            for l in &s.labels {
                let p = problem.scores.lookup(&s.instance, &s.label_set, l).unwrap();
                scores.set(&s.instance, &format!("{}.{l}", s.label_set), 0.01 + p);
            }
        }
        let before = solve(&compile(&problem.ground, &scores).unwrap(), SolveOptions::default()).unwrap();
        let slot = &problem.ground.slots[pick % problem.ground.slots.len()];
        let mut scaled = scores.clone();
        for l in &slot.labels {
            let p = scores.lookup(&slot.instance, &slot.label_set, l).unwrap();
            scaled.set(&slot.instance, &format!("{}.{l}", slot.label_set), p * factor);
        }
        let after = solve(&compile(&problem.ground, &scaled).unwrap(), SolveOptions::default()).unwrap();
        prop_assert_eq!(before.choices, after.choices);
    }

    #[test]
    fn solving_is_deterministic(problem in random_problem()) {
        let a = solve(&compile(&problem.ground, &problem.scores).unwrap(), SolveOptions::default()).unwrap();
        let mut reversed = problem.ground.clone();
        reversed.slots.reverse();
        reversed.formulas.reverse();
        let b = solve(&compile(&reversed, &problem.scores).unwrap(), SolveOptions::default()).unwrap();
        prop_assert_eq!(&a.choices, &b.choices);
        prop_assert_eq!(a.status, b.status);
        let c = solve(&compile(&problem.ground, &problem.scores).unwrap(), SolveOptions::default()).unwrap();
        prop_assert_eq!(a, c);
    }
}

#[test]
fn uniform_ties_pick_the_lowest_label_indices() {
    let g = graph::parse(WIQA_GRAPH).unwrap();
    let mut scores = ScoreTable::new();
    for q in ["q1", "q2", "q3"] {
        for l in ["is_more", "is_less", "no_effect"] {
            scores.set(q, l, 1.0 / 3.0);
        }
    }
    let result = infer(&g, &wiqa_instances(), &scores, SolveOptions::default()).unwrap();
    for q in ["q1", "q2", "q3"] {
        assert_eq!(result.label(q, "answer"), Some("is_more"));
    }
}

fn wiqa_scores(rows: &[[f64; 3]]) -> ScoreTable {
    let mut scores = ScoreTable::new();
    for (i, row) in rows.iter().enumerate() {
        for (l, p) in ["is_more", "is_less", "no_effect"].iter().zip(row) {
            scores.set(&format!("q{}", i + 1), l, *p);
        }
    }
    scores
}

#[test]
fn wiqa_transitivity_flips_the_weak_answer() {
    let g = graph::parse(WIQA_GRAPH).unwrap();
    let scores = wiqa_scores(&[[0.9, 0.05, 0.05], [0.85, 0.1, 0.05], [0.3, 0.4, 0.3]]);
    let ground = graph::ground(&g, &wiqa_instances()).unwrap();
    let program = compile(&ground, &scores).unwrap();
    // 9 atoms, one `and` and one `or` auxiliary.
    assert_eq!(program.atom_vars(), 9);
    assert_eq!(program.aux_vars(), 2);
    let result = solve(&program, SolveOptions::default()).unwrap();
    assert_eq!(result.label("q3", "answer"), Some("is_more"));
    let (obj, labels) = brute_force(&ground, &scores).unwrap();
    assert!((result.objective.unwrap() - obj).abs() < 1e-9);
    assert_eq!(chosen(&ground, &result), labels);

    // Without a confident antecedent the argmax stands.
    let scores = wiqa_scores(&[[0.9, 0.05, 0.05], [0.2, 0.7, 0.1], [0.3, 0.4, 0.3]]);
    let result = infer(&g, &wiqa_instances(), &scores, SolveOptions::default()).unwrap();
    assert_eq!(result.label("q3", "answer"), Some("is_less"));
}

#[test]
fn unnormalized_scores_are_rejected_by_infer() {
    let g = graph::parse(WIQA_GRAPH).unwrap();
    let scores = wiqa_scores(&[[0.9, 0.05, 0.05], [0.9, 0.1, 0.05], [0.3, 0.4, 0.3]]);
    let err = infer(&g, &wiqa_instances(), &scores, SolveOptions::default()).unwrap_err();
    assert!(matches!(err, IlpError::NotNormalized { ref instance, .. } if instance == "q2"), "{err}");

    let mut missing = wiqa_scores(&[[0.9, 0.05, 0.05], [0.9, 0.05, 0.05], [0.3, 0.4, 0.3]]);
    missing = {
        let mut t = ScoreTable::new();
        for i in missing.instances().map(str::to_string).collect::<Vec<_>>() {
            if i != "q3" {
                t.set_row(&i, "answer", missing.row(&i).unwrap());
            }
        }
        t
    };
    let err = infer(&g, &wiqa_instances(), &missing, SolveOptions::default()).unwrap_err();
    assert!(matches!(err, IlpError::MissingScore { ref instance, .. } if instance == "q3"));
}

#[test]
fn shared_label_names_need_qualified_keys() {
    let source = "graph g { concept a; labels p of a { x, y } labels q of a { x, z } }";
    let g = graph::parse(source).unwrap();
    let mut inst = InstanceSet::default();
    inst.push("a1", "a");
    let mut scores = ScoreTable::new();
    for (k, v) in [("x", 0.5), ("y", 0.5), ("z", 0.5)] {
        scores.set("a1", k, v);
    }
    let err = infer(&g, &inst, &scores, SolveOptions::default()).unwrap_err();
    assert!(matches!(err, IlpError::AmbiguousScore { .. }));
    let mut scores = ScoreTable::new();
    for (k, v) in [("p.x", 0.2), ("y", 0.8), ("q.x", 0.9), ("z", 0.1)] {
        scores.set("a1", k, v);
    }
    let result = infer(&g, &inst, &scores, SolveOptions::default()).unwrap();
    assert_eq!(result.label("a1", "p"), Some("y"));
    assert_eq!(result.label("a1", "q"), Some("x"));
}

#[test]
fn contradictory_constraints_are_infeasible() {
    let source = "graph g { concept a; labels l of a { x, y }
        constraint c1 over a(v) { x(v) } constraint c2 over a(v) { y(v) } }";
    let g = graph::parse(source).unwrap();
    let mut inst = InstanceSet::default();
    inst.push("a1", "a");
    let mut scores = ScoreTable::new();
    scores.set("a1", "x", 0.5);
    scores.set("a1", "y", 0.5);
    let result = infer(&g, &inst, &scores, SolveOptions::default()).unwrap();
    assert_eq!(result.status, Status::Infeasible);
    assert_eq!(result.objective, None);
    assert!(result.choices.is_empty());
}

#[test]
fn node_budget_is_enforced() {
    let g = graph::parse(&queens_graph(8)).unwrap();
    let err = infer(&g, &queens_instances(8), &queens_scores(8, &[]), SolveOptions { node_limit: 5 }).unwrap_err();
    assert!(matches!(err, IlpError::BudgetExceeded { nodes: 5 }));
}

// Sudoku

fn sudoku_oracle(side: usize, n: usize, givens: &[(usize, usize, usize)]) -> Option<Vec<usize>> {
    let mut grid = vec![0usize; side * side];
    for &(r, c, d) in givens {
        grid[r * side + c] = d;
    }
    fn ok(grid: &[usize], side: usize, n: usize, pos: usize, d: usize) -> bool {
        let (r, c) = (pos / side, pos % side);
        for i in 0..side {
            if (i != c && grid[r * side + i] == d) || (i != r && grid[i * side + c] == d) {
                return false;
            }
        }
        let (br, bc) = (r / n * n, c / n * n);
        for rr in br..br + n {
            for cc in bc..bc + n {
                if (rr, cc) != (r, c) && grid[rr * side + cc] == d {
                    return false;
                }
            }
        }
        true
    }
    fn go(grid: &mut Vec<usize>, fixed: &[bool], side: usize, n: usize, pos: usize) -> bool {
        if pos == grid.len() {
            return true;
        }
        if fixed[pos] {
            return ok(grid, side, n, pos, grid[pos]) && go(grid, fixed, side, n, pos + 1);
        }
        for d in 1..=side {
            if ok(grid, side, n, pos, d) {
                grid[pos] = d;
                if go(grid, fixed, side, n, pos + 1) {
                    return true;
                }
            }
        }
        grid[pos] = 0;
        false
    }
    let fixed: Vec<bool> = grid.iter().map(|d| *d != 0).collect();
    go(&mut grid, &fixed, side, n, 0).then_some(grid)
}

fn grid_givens(grid: &[usize], side: usize) -> Vec<(usize, usize, usize)> {
    grid.iter().enumerate().map(|(i, d)| (i / side, i % side, *d)).collect()
}

fn solve_sudoku(n: usize, givens: &[(usize, usize, usize)]) -> Option<Vec<usize>> {
    let side = sudoku_side(n);
    let g = graph::parse(&sudoku_graph(n)).unwrap();
    let result = infer(&g, &sudoku_instances(n), &sudoku_scores(n, givens), SolveOptions::default()).unwrap();
    if !result.is_optimal() {
        return None;
    }
    let mut grid = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let d = result.label(&sudoku_cell(r, c), "digit").unwrap();
            grid.push(d[1..].parse().unwrap());
        }
    }
    Some(grid)
}

#[test]
fn sudoku_4x4_program_shape() {
    let g = graph::parse(&sudoku_graph(2)).unwrap();
    let ground = graph::ground(&g, &sudoku_instances(2)).unwrap();
    let program = compile(&ground, &sudoku_scores(2, &[])).unwrap();
    assert_eq!(program.atom_vars(), 64);
    assert_eq!(program.aux_vars(), 0);
    let exactly = program.rows.iter().filter(|r| matches!(r.origin, RowOrigin::ExactlyOne { .. })).count();
    assert_eq!(exactly, 16);
    // 3 groups × 4 instances × 4 digits at-most-one rows; one-digit rows dedupe.
    assert_eq!(program.rows.len() - exactly, 48);
}

/// Tiny LCG so generated puzzles are reproducible without extra deps.
struct Lcg(u64);
impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }
}

#[test]
fn random_4x4_sudokus_match_backtracking() {
    let mut rng = Lcg(7);
    for _ in 0..50 {
        // random solved grid by permuting digits of a base pattern
        let mut perm: Vec<usize> = (1..=4).collect();
        for i in (1..4).rev() {
            perm.swap(i, rng.next() as usize % (i + 1));
        }
        let base = |r: usize, c: usize| (r * 2 + r / 2 + c) % 4;
        let mut givens = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                if rng.next() % 3 == 0 {
                    givens.push((r, c, perm[base(r, c)]));
                }
            }
        }
        assert_eq!(solve_sudoku(2, &givens), sudoku_oracle(4, 2, &givens), "givens {givens:?}");
    }
    // Givens are scores, not hard facts: a conflicting pair yields a full
    // grid that keeps one of them.
    let grid = solve_sudoku(2, &[(0, 0, 1), (0, 3, 1)]).unwrap();
    assert_eq!(sudoku_oracle(4, 2, &grid_givens(&grid, 4)).as_ref(), Some(&grid));
    assert!(grid[0] == 1 || grid[3] == 1);
}

// N-queens

fn queens_solutions(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cols: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let r = cols.len();
        if r == n {
            out.push(cols.clone());
            return;
        }
        for c in 0..n {
            if cols.iter().enumerate().all(|(rr, cc)| *cc != c && r - rr != c.abs_diff(*cc)) {
                cols.push(c);
                go(n, cols, out);
                cols.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut out);
    out
}

#[test]
fn eight_queens_matches_enumeration() {
    assert_eq!(diagonal_pairs(8).len(), 280);
    let all = queens_solutions(8);
    assert_eq!(all.len(), 92);
    let g = graph::parse(&queens_graph(8)).unwrap();
    for givens in [vec![], vec![(0, 0)], vec![(0, 3), (1, 6)], vec![(4, 4)], vec![(0, 0), (1, 1)]] {
        // Lexicographically smallest occupancy vector (empty < queen) in
        // row-major order = the solution whose first queen sits furthest right.
        let expected = all
            .iter()
            .filter(|s| givens.iter().all(|(r, c)| s[*r] == *c))
            .map(|s| {
                let mut v = vec![0u8; 64];
                for (r, c) in s.iter().enumerate() {
                    v[r * 8 + c] = 1;
                }
                v
            })
            .min();
        let result = infer(&g, &queens_instances(8), &queens_scores(8, &givens), SolveOptions::default()).unwrap();
        let got: Vec<u8> = (0..64)
            .map(|i| u8::from(result.label(&square(i / 8, i % 8), "occupancy") == Some("queen")))
            .collect();
        match expected {
            Some(v) => assert_eq!(got, v, "{givens:?}"),
            // Conflicting givens: still a valid placement honoring one of them.
            None => {
                let cols: Vec<usize> = got.chunks(8).map(|r| r.iter().position(|x| *x == 1).unwrap()).collect();
                assert!(all.contains(&cols));
                assert!(givens.iter().any(|(r, c)| cols[*r] == *c));
            }
        }
    }
}

// Digit addition

#[test]
fn mnist_sum_matches_pairwise_search() {
    let g = graph::parse(&mnist_sum_graph()).unwrap();
    assert!(graph::validate(&g).is_empty());
    let mut rng = Lcg(11);
    let digits: Vec<String> = (0..10).map(|d| format!("d{d}")).collect();
    let pairs = 6;
    let mut scores = ScoreTable::new();
    let mut rows = Vec::new();
    for i in 0..pairs {
        let mut side_rows = Vec::new();
        for side in ["left", "right"] {
            let weights: Vec<f64> = (0..10).map(|_| 0.01 + (rng.next() % 1000) as f64).collect();
            let row = normalized(&digits, &weights);
            assert!(row.values().all(|p| *p >= 1e-3 || weights.iter().sum::<f64>() > 10000.0));
            scores.set_row(&format!("pair{i}/{side}"), "digit", &row);
            side_rows.push(row);
        }
        let sum = (rng.next() % 19) as usize;
        mnist_sum_given(&mut scores, &format!("pair{i}"), sum);
        rows.push((side_rows, sum));
    }
    let result = infer(&g, &mnist_sum_instances(pairs), &scores, SolveOptions::default()).unwrap();
    for (i, (side_rows, sum)) in rows.iter().enumerate() {
        let (mut best, mut best_obj) = ((0, 0), f64::NEG_INFINITY);
        for a in 0..10usize {
            if *sum < a || sum - a > 9 {
                continue;
            }
            let b = sum - a;
            let obj = side_rows[0][&format!("d{a}")].ln() + side_rows[1][&format!("d{b}")].ln();
            if obj > best_obj + EPS {
                best = (a, b);
                best_obj = obj;
            }
        }
        assert_eq!(result.label(&format!("pair{i}/left"), "digit"), Some(format!("d{}", best.0).as_str()));
        assert_eq!(result.label(&format!("pair{i}/right"), "digit"), Some(format!("d{}", best.1).as_str()));
        assert_eq!(result.label(&format!("pair{i}"), "total"), Some(format!("s{sum}").as_str()));
    }
}

// Class hierarchy

#[test]
fn hierarchy_matches_joint_search() {
    let g = graph::parse(&hierarchy_graph()).unwrap();
    let fine: Vec<String> = CIFAR_FINE.iter().map(|(f, _)| f.to_string()).collect();
    let coarse: Vec<String> = vec!["animal".into(), "vehicle".into()];
    let mut rng = Lcg(3);
    let images = 8;
    let mut scores = ScoreTable::new();
    let mut rows = Vec::new();
    for i in 0..images {
        let f = normalized(&fine, &(0..10).map(|_| 1.0 + (rng.next() % 100) as f64).collect::<Vec<_>>());
        let c = normalized(&coarse, &(0..2).map(|_| 1.0 + (rng.next() % 100) as f64).collect::<Vec<_>>());
        scores.set_row(&format!("img{i}"), "fine", &f);
        scores.set_row(&format!("img{i}"), "coarse", &c);
        rows.push((f, c));
    }
    let result = infer(&g, &hierarchy_instances(images), &scores, SolveOptions::default()).unwrap();
    for (i, (f, c)) in rows.iter().enumerate() {
        let mut best = (f64::NEG_INFINITY, "", "");
        // coarse before fine: label-set declaration order
        for cl in &coarse {
            for (fl, parent) in CIFAR_FINE {
                if parent != cl {
                    continue;
                }
                let obj = c[cl].ln() + f[fl].ln();
                if obj > best.0 + EPS {
                    best = (obj, cl.as_str(), fl);
                }
            }
        }
        let id = format!("img{i}");
        assert_eq!(result.label(&id, "coarse"), Some(best.1));
        assert_eq!(result.label(&id, "fine"), Some(best.2));
    }
}

// Sequence tagging

#[test]
fn iob_matches_exhaustive_search() {
    let g = graph::parse(IOB_GRAPH).unwrap();
    let tags = ["B", "I", "O"];
    let mut rng = Lcg(5);
    for len in 1..=6 {
        let inst = iob_instances(len);
        let mut scores = ScoreTable::new();
        let mut probs = Vec::new();
        for t in 0..len {
            let w: Vec<f64> = (0..3).map(|_| 1.0 + (rng.next() % 50) as f64).collect();
            let row = normalized(&tags.iter().map(|s| s.to_string()).collect::<Vec<_>>(), &w);
            scores.set_row(&format!("t{t}"), "tag", &row);
            probs.push(row);
        }
        let result = infer(&g, &inst, &scores, SolveOptions::default()).unwrap();
        let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
        for code in 0..3usize.pow(len as u32) {
            let seq: Vec<usize> = (0..len).map(|i| code / 3usize.pow((len - 1 - i) as u32) % 3).collect();
            if seq.windows(2).any(|w| w[0] == 2 && w[1] == 1) {
                continue;
            }
            let obj: f64 = seq.iter().enumerate().map(|(i, t)| probs[i][tags[*t]].ln()).sum();
            if obj > best.0 + EPS {
                best = (obj, seq);
            }
        }
        let got: Vec<usize> = (0..len)
            .map(|i| tags.iter().position(|t| Some(*t) == result.label(&format!("t{i}"), "tag")).unwrap())
            .collect();
        assert_eq!(got, best.1, "len {len}");
    }
}

#[test]
fn assignments_serialize() {
    let g = graph::parse(WIQA_GRAPH).unwrap();
    let scores = wiqa_scores(&[[0.9, 0.05, 0.05], [0.85, 0.1, 0.05], [0.3, 0.4, 0.3]]);
    let result = infer(&g, &wiqa_instances(), &scores, SolveOptions::default()).unwrap();
    let json = serde_json::to_value(&result).unwrap();
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["choices"]["q3"]["answer"], "is_more");
    let back: nesy_core::ilp::Assignment = serde_json::from_value(json).unwrap();
    assert_eq!(back, result);
    let _: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(&serde_json::to_string(&scores).unwrap()).unwrap();
}
