//! Ready-made graphs and instance sets used by tests, examples and the
//! evaluation harness.

use std::collections::BTreeMap;

use crate::graph::InstanceSet;
use crate::ilp::{ScoreTable, PROB_FLOOR};

pub const WIQA_GRAPH: &str = "graph wiqa {
  concept paragraph;
  concept question;
  labels answer of question { is_more, is_less, no_effect }
  contains paragraph_question: paragraph -> question;
  has_a transitivity in paragraph (t1: question, t2: question, t3: question);
  constraint transitive_more over transitivity(a, b, c) {
    if(and(answer.is_more(a), answer.is_more(b)), answer.is_more(c))
  }
}";

/// One paragraph with three questions forming a single transitivity triple.
pub fn wiqa_instances() -> InstanceSet {
    let mut set = InstanceSet::default();
    set.push("p1", "paragraph");
    for q in ["q1", "q2", "q3"] {
        set.push(q, "question");
        set.add_edge("paragraph_question", "p1", q);
    }
    set.add_tuple("transitivity", Some("p1"), &["q1", "q2", "q3"]);
    set
}

pub const IOB_GRAPH: &str = "graph iob {
  concept sentence;
  concept token;
  labels tag of token { B, I, O }
  contains sentence_token: sentence -> token;
  has_a next in sentence (prev: token, cur: token);
  constraint no_inside_after_outside over next(p, c) {
    not(and(tag.O(p), tag.I(c)))
  }
}";

/// A sentence with `len` tokens `t0..` chained by `next`.
pub fn iob_instances(len: usize) -> InstanceSet {
    let mut set = InstanceSet::default();
    set.push("s1", "sentence");
    for i in 0..len {
        let id = format!("t{i}");
        set.push(&id, "token");
        set.add_edge("sentence_token", "s1", &id);
    }
    for i in 1..len {
        set.add_tuple("next", Some("s1"), &[&format!("t{}", i - 1), &format!("t{i}")]);
    }
    set
}

/// Grid side for a Sudoku with `n x n` boxes.
pub fn sudoku_side(n: usize) -> usize {
    n * n
}

pub fn sudoku_cell(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

/// Sudoku with `n x n` boxes: every cell holds one digit and every row,
/// column and box holds each digit at most once.
pub fn sudoku_graph(n: usize) -> String {
    let side = sudoku_side(n);
    let digits: Vec<String> = (1..=side).map(|d| format!("d{d}")).collect();
    let members: Vec<String> = (1..=side).map(|i| format!("c{i}: cell")).collect();
    let vars: Vec<String> = (1..=side).map(|i| format!("c{i}")).collect();
    let mut out = format!("graph sudoku{side} {{\n  concept board;\n  concept cell;\n");
    out += &format!("  labels digit of cell {{ {} }}\n", digits.join(", "));
    out += "  contains board_cell: board -> cell;\n";
    for group in ["row", "column", "box"] {
        out += &format!("  has_a {group} in board ({});\n", members.join(", "));
    }
    for d in &digits {
        for group in ["row", "column", "box"] {
            let atoms: Vec<String> = vars.iter().map(|v| format!("digit.{d}({v})")).collect();
            out += &format!(
                "  constraint {group}_{d} over {group}({}) {{\n    atMost(1, {})\n  }}\n",
                vars.join(", "),
                atoms.join(", ")
            );
        }
    }
    let atoms: Vec<String> = digits.iter().map(|d| format!("digit.{d}(x)")).collect();
    out += &format!("  constraint one_digit over cell(x) {{\n    exactly(1, {})\n  }}\n}}\n", atoms.join(", "));
    out
}

pub fn sudoku_instances(n: usize) -> InstanceSet {
    let side = sudoku_side(n);
    let mut set = InstanceSet::default();
    set.push("board", "board");
    for r in 0..side {
        for c in 0..side {
            let id = sudoku_cell(r, c);
            set.push(&id, "cell");
            set.add_edge("board_cell", "board", &id);
        }
    }
    let cells = |pick: &dyn Fn(usize) -> (usize, usize)| -> Vec<String> {
        (0..side).map(|i| {
            let (r, c) = pick(i);
            sudoku_cell(r, c)
        }).collect()
    };
    for k in 0..side {
        let row = cells(&|i| (k, i));
        let col = cells(&|i| (i, k));
        let (br, bc) = ((k / n) * n, (k % n) * n);
        let boxed = cells(&|i| (br + i / n, bc + i % n));
        for (rel, members) in [("row", row), ("column", col), ("box", boxed)] {
            let refs: Vec<&str> = members.iter().map(String::as_str).collect();
            set.add_tuple(rel, Some("board"), &refs);
        }
    }
    set
}

/// Scores that pin `givens` (row, col, digit 1-based) and leave the other
/// cells uniform.
pub fn sudoku_scores(n: usize, givens: &[(usize, usize, usize)]) -> ScoreTable {
    let side = sudoku_side(n);
    let mut scores = ScoreTable::new();
    for r in 0..side {
        for c in 0..side {
            let given = givens.iter().find(|g| g.0 == r && g.1 == c).map(|g| g.2);
            let row = given_row(side, given);
            for (d, p) in row.into_iter().enumerate() {
                scores.set(&sudoku_cell(r, c), &format!("d{}", d + 1), p);
            }
        }
    }
    scores
}

/// Near one-hot row on `hot` (1-based) or uniform when `hot` is `None`.
fn given_row(labels: usize, hot: Option<usize>) -> Vec<f64> {
    match hot {
        Some(h) => (1..=labels)
            .map(|d| if d == h { 1.0 - (labels - 1) as f64 * PROB_FLOOR } else { PROB_FLOOR })
            .collect(),
        None => vec![1.0 / labels as f64; labels],
    }
}

pub fn square(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

/// N-queens on an `n x n` board: one queen per rank and file, at most one
/// per attacking diagonal pair.
pub fn queens_graph(n: usize) -> String {
    let members: Vec<String> = (1..=n).map(|i| format!("s{i}: square")).collect();
    let vars: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    let atoms: Vec<String> = vars.iter().map(|v| format!("occupancy.queen({v})")).collect();
    let mut out = format!("graph queens{n} {{\n  concept board;\n  concept square;\n");
    out += "  labels occupancy of square { empty, queen }\n";
    out += "  contains board_square: board -> square;\n";
    out += &format!("  has_a rank in board ({});\n", members.join(", "));
    out += &format!("  has_a file in board ({});\n", members.join(", "));
    out += "  has_a diagonal in board (a: square, b: square);\n";
    for rel in ["rank", "file"] {
        out += &format!(
            "  constraint one_per_{rel} over {rel}({}) {{\n    exactly(1, {})\n  }}\n",
            vars.join(", "),
            atoms.join(", ")
        );
    }
    out += "  constraint diagonal_attack over diagonal(a, b) {\n    atMost(1, queen(a), queen(b))\n  }\n}\n";
    out
}

/// Diagonal square pairs `(r1, c1) < (r2, c2)` on an `n x n` board.
pub fn diagonal_pairs(n: usize) -> Vec<((usize, usize), (usize, usize))> {
    let mut pairs = Vec::new();
    for r1 in 0..n {
        for c1 in 0..n {
            for r2 in r1 + 1..n {
                for c2 in 0..n {
                    if r2 - r1 == c1.abs_diff(c2) {
                        pairs.push(((r1, c1), (r2, c2)));
                    }
                }
            }
        }
    }
    pairs
}

pub fn queens_instances(n: usize) -> InstanceSet {
    let mut set = InstanceSet::default();
    set.push("board", "board");
    for r in 0..n {
        for c in 0..n {
            set.push(square(r, c), "square");
            set.add_edge("board_square", "board", &square(r, c));
        }
    }
    for k in 0..n {
        let rank: Vec<String> = (0..n).map(|c| square(k, c)).collect();
        let file: Vec<String> = (0..n).map(|r| square(r, k)).collect();
        set.add_tuple("rank", Some("board"), &rank.iter().map(String::as_str).collect::<Vec<_>>());
        set.add_tuple("file", Some("board"), &file.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for ((r1, c1), (r2, c2)) in diagonal_pairs(n) {
        set.add_tuple("diagonal", Some("board"), &[&square(r1, c1), &square(r2, c2)]);
    }
    set
}

/// Scores that force queens on `givens` and leave other squares uniform.
pub fn queens_scores(n: usize, givens: &[(usize, usize)]) -> ScoreTable {
    let mut scores = ScoreTable::new();
    for r in 0..n {
        for c in 0..n {
            let row = given_row(2, givens.contains(&(r, c)).then_some(2));
            scores.set(&square(r, c), "empty", row[0]);
            scores.set(&square(r, c), "queen", row[1]);
        }
    }
    scores
}

/// Two digit images per pair; the pair's sum label must be the sum of the
/// two digit labels.
pub fn mnist_sum_graph() -> String {
    let digits: Vec<String> = (0..10).map(|d| format!("d{d}")).collect();
    let sums: Vec<String> = (0..19).map(|s| format!("s{s}")).collect();
    let mut out = String::from("graph mnist_sum {\n  concept pair;\n  concept image;\n");
    out += &format!("  labels digit of image {{ {} }}\n", digits.join(", "));
    out += &format!("  labels total of pair {{ {} }}\n", sums.join(", "));
    out += "  contains pair_image: pair -> image;\n";
    out += "  has_a operands in pair (left: image, right: image);\n";
    for s in 0..19usize {
        let ways: Vec<String> = (0..10usize)
            .filter(|a| s >= *a && s - a < 10)
            .map(|a| format!("and(digit.d{a}(l), digit.d{}(r))", s - a))
            .collect();
        let body = if ways.len() == 1 { ways[0].clone() } else { format!("or({})", ways.join(", ")) };
        out += &format!("  constraint sum_{s} over operands(l, r) in p {{\n    if(total.s{s}(p), {body})\n  }}\n");
    }
    out += "}\n";
    out
}

pub fn mnist_sum_instances(pairs: usize) -> InstanceSet {
    let mut set = InstanceSet::default();
    for i in 0..pairs {
        let pair = format!("pair{i}");
        let left = format!("{pair}/left");
        let right = format!("{pair}/right");
        set.push(&pair, "pair");
        set.push(&left, "image");
        set.push(&right, "image");
        set.add_edge("pair_image", &pair, &left);
        set.add_edge("pair_image", &pair, &right);
        set.add_tuple("operands", Some(&pair), &[&left, &right]);
    }
    set
}

/// Pins the sum label of `pair` to `sum`.
pub fn mnist_sum_given(scores: &mut ScoreTable, pair: &str, sum: usize) {
    for (s, p) in given_row(19, Some(sum + 1)).into_iter().enumerate() {
        scores.set(pair, &format!("s{s}"), p);
    }
}

pub const CIFAR_FINE: [(&str, &str); 10] = [
    ("airplane", "vehicle"),
    ("automobile", "vehicle"),
    ("bird", "animal"),
    ("cat", "animal"),
    ("deer", "animal"),
    ("dog", "animal"),
    ("frog", "animal"),
    ("horse", "animal"),
    ("ship", "vehicle"),
    ("truck", "vehicle"),
];

/// Coarse/fine image labels tied by a parent rule per fine class.
pub fn hierarchy_graph() -> String {
    let fine: Vec<&str> = CIFAR_FINE.iter().map(|(f, _)| *f).collect();
    let mut out = String::from("graph cifar_hierarchy {\n  concept image;\n");
    out += "  labels coarse of image { animal, vehicle }\n";
    out += &format!("  labels fine of image {{ {} }}\n", fine.join(", "));
    for (f, parent) in CIFAR_FINE {
        out += &format!("  constraint {f}_is_{parent} over image(x) {{\n    if(fine.{f}(x), coarse.{parent}(x))\n  }}\n");
    }
    out += "}\n";
    out
}

pub fn hierarchy_instances(images: usize) -> InstanceSet {
    let mut set = InstanceSet::default();
    for i in 0..images {
        set.push(format!("img{i}"), "image");
    }
    set
}

/// Normalizes raw non-negative weights into a probability row.
pub fn normalized(labels: &[String], weights: &[f64]) -> BTreeMap<String, f64> {
    let total: f64 = weights.iter().sum();
    labels.iter().cloned().zip(weights.iter().map(|w| w / total)).collect()
}

pub const WIQA_RECORDS: &str = r#"{"id": "p1", "paragraph": "Rain falls. Water soaks the soil. Plants absorb the water.", "questions": [{"id": "q1", "question": "Suppose more rain falls, will more water soak the soil?", "answer": "is_more"}, {"id": "q2", "question": "Suppose more water soaks the soil, will plants absorb more water?", "answer": "is_more"}, {"id": "q3", "question": "Suppose more rain falls, will plants absorb more water?", "answer": "is_more"}], "triples": [[0, 1, 2]]}
"#;

pub const WIQA_BINDING: &str = r#"{
  "root": "paragraph",
  "properties": [
    {"concept": "paragraph", "property": "text", "field": "paragraph"},
    {"concept": "question", "property": "text", "field": "question"},
    {"concept": "question", "property": "answer", "field": "answer", "reader": "label-reader", "label_set": "answer"}
  ],
  "edges": [{"relation": "paragraph_question", "field": "questions"}],
  "relations": [{"relation": "transitivity", "field": "triples"}],
  "models": [{
    "label_set": "answer",
    "model": {
      "mode": "mock",
      "template": "Question: {text}\nDoes the change lead to more, less, or no effect?",
      "labels": ["is_more", "is_less", "no_effect"],
      "scores": {"is_more": 0.5, "is_less": 0.3, "no_effect": 0.2}
    }
  }]
}"#;

pub const CONLL_RECORDS: &str = r#"{"id": "s1", "tokens": ["John", "lives", "in", "New", "York"], "labels": [0, 2, 2, 0, 1]}
{"id": "s2", "tokens": [], "labels": []}
"#;

pub const CONLL_BINDING: &str = r#"{
  "root": "sentence",
  "properties": [
    {"concept": "token", "property": "word", "field": "tokens"},
    {"concept": "token", "property": "tag", "field": "labels", "reader": "label-reader", "label_set": "tag"}
  ],
  "edges": [{"relation": "sentence_token", "field": "tokens", "zip": ["labels"]}],
  "relations": [],
  "models": [{"label_set": "tag", "model": {"template": "Tag the token {word} as B, I or O."}}]
}"#;
