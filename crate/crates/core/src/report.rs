//! Recorded figures that need live models or human graders, and the
//! formatters that print them. Nothing here is recomputed offline; the
//! data is carried so reports keep the published layout.

use std::fmt::Write;

/// Manual grade of one generated graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    /// Correct.
    C,
    /// Semantically correct with harmless redundancy.
    R,
    /// Semantic error.
    Se,
    /// Syntax error left after the loop.
    Sy,
}

/// Error class of one end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunError {
    Graph,
    Sensor,
}

pub struct RecordedGrades {
    pub label: &'static str,
    pub samples: [[Grade; 12]; 3],
}

use Grade::{C, R, Se, Sy};

pub const GRADES: [RecordedGrades; 5] = [
    RecordedGrades {
        label: "GPT-5 (Minimal)",
        samples: [
            [Se, C, R, C, R, Se, Sy, Se, C, Se, Se, C],
            [C, C, R, Sy, C, Se, R, Se, C, Se, C, C],
            [R, C, C, C, C, Se, R, Se, C, R, R, C],
        ],
    },
    RecordedGrades {
        label: "GPT-5 (Low)",
        samples: [
            [C, R, C, C, C, C, R, Sy, C, R, C, C],
            [C, C, Sy, C, C, Sy, R, C, C, R, C, C],
            [C, R, R, C, C, Sy, R, C, Se, R, C, C],
        ],
    },
    RecordedGrades {
        label: "GPT-5 (Medium)",
        samples: [
            [C, C, C, C, C, C, C, C, Sy, C, Se, C],
            [C, R, C, C, C, C, R, Sy, C, R, Se, C],
            [C, R, C, C, C, C, R, Sy, Se, C, C, C],
        ],
    },
    RecordedGrades {
        label: "DeepSeek R1",
        samples: [
            [C, R, Sy, C, C, C, R, C, C, R, C, C],
            [C, C, Se, C, C, C, R, Sy, C, R, C, C],
            [C, R, C, C, C, C, R, C, C, Sy, C, C],
        ],
    },
    RecordedGrades {
        label: "Kimi k2",
        samples: [
            [Sy, C, C, C, C, C, C, C, C, C, C, C],
            [C, C, C, R, R, C, R, C, C, C, C, C],
            [C, C, C, C, C, C, R, C, C, C, C, C],
        ],
    },
];

pub struct RecordedWorkflow {
    pub level: &'static str,
    pub samples: [[Option<RunError>; 12]; 5],
}

const N: Option<RunError> = None;
const G: Option<RunError> = Some(RunError::Graph);
const S: Option<RunError> = Some(RunError::Sensor);

pub const WORKFLOW: [RecordedWorkflow; 3] = [
    RecordedWorkflow {
        level: "Minimal",
        samples: [
            [S, N, N, N, N, G, S, G, N, G, S, N],
            [N, N, N, S, N, G, N, S, N, N, N, N],
            [S, N, N, N, N, S, N, N, N, S, S, N],
            [N, N, N, N, N, S, N, N, N, G, S, N],
            [S, N, N, G, N, G, N, G, N, N, N, N],
        ],
    },
    RecordedWorkflow {
        level: "Low",
        samples: [
            [N, N, N, N, N, S, N, G, N, S, N, N],
            [N, N, N, N, N, S, N, N, N, S, N, N],
            [S, N, N, N, N, N, N, N, N, S, N, N],
            [N, N, N, G, N, G, N, N, N, S, N, N],
            [S, N, N, N, N, S, N, S, N, S, N, N],
        ],
    },
    RecordedWorkflow {
        level: "Medium",
        samples: [
            [N, N, N, N, N, N, N, G, N, S, S, N],
            [N, N, N, N, N, S, N, N, N, N, N, N],
            [G, N, N, N, N, N, N, N, N, S, N, N],
            [N, N, N, N, N, S, N, N, N, N, N, S],
            [N, N, N, N, N, G, N, N, N, S, N, S],
        ],
    },
];

/// Development minutes per task (rows) and participant (columns); `None`
/// marks a task the participant did not finish. Columns 1-3 already used
/// the framework, 4-6 had not.
pub const USER_MINUTES: [[Option<u32>; 6]; 3] = [
    [Some(4), Some(6), Some(7), Some(7), Some(15), Some(9)],
    [Some(10), Some(10), Some(9), None, Some(15), Some(10)],
    [Some(11), Some(15), Some(20), Some(10), Some(8), Some(15)],
];

/// `n / total` as a percentage with two decimals, e.g. `97.22%`.
pub fn percent(n: usize, total: usize) -> String {
    if total == 0 {
        return "-".to_string();
    }
    format!("{:.2}%", 100.0 * n as f64 / total as f64)
}

/// (correct, redundant, graded) counts over every sample.
pub fn grade_counts(grades: &RecordedGrades) -> (usize, usize, usize) {
    let all = grades.samples.iter().flatten();
    let c = all.clone().filter(|g| **g == C).count();
    let r = all.clone().filter(|g| **g == R).count();
    (c, r, all.count())
}

/// `label  C%  R%  C+R%`.
pub fn correctness_row(grades: &RecordedGrades) -> String {
    let (c, r, n) = grade_counts(grades);
    format!("{:<16} {:>7} {:>7} {:>7}", grades.label, percent(c, n), percent(r, n), percent(c + r, n))
}

pub fn correctness_table() -> String {
    let mut out = format!("{:<16} {:>7} {:>7} {:>7}\n", "Model", "C", "R", "C+R");
    for g in &GRADES {
        let _ = writeln!(out, "{}", correctness_row(g));
    }
    out
}

pub fn failures(workflow: &RecordedWorkflow) -> usize {
    workflow.samples.iter().flatten().filter(|e| e.is_some()).count()
}

pub fn minutes_cell(m: Option<u32>) -> String {
    m.map_or("F".to_string(), |m| m.to_string())
}

pub fn minutes_table() -> String {
    let mut out = format!("{:<8} {}\n", "", (1..=6).map(|u| format!("{u:>3}")).collect::<String>());
    for (t, row) in USER_MINUTES.iter().enumerate() {
        let cells: String = row.iter().map(|m| format!("{:>3}", minutes_cell(*m))).collect();
        let _ = writeln!(out, "{:<8} {cells}", format!("Task {}", t + 1));
    }
    out
}
