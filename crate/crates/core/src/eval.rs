//! Scripted evaluation of graph design: every corpus task is run through the
//! workflow with a scripted backend whose replies reproduce a target
//! (attempts, revises, syntax errors) tuple. No network is involved.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{AgentRole, ScriptedBackend};
use crate::rag::{Corpus, ExampleEntry};
use crate::workflow::{run_to_pause, AttemptStats, SessionState, StepOutcome, WorkflowConfig, DEFAULT_ATTEMPT_LIMIT};

pub type Tuple = (u32, u32, u32);

/// Recorded attempt counts of one model: three samples over twelve tasks.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub name: &'static str,
    pub label: &'static str,
    pub samples: [[Tuple; 12]; 3],
}

pub const PROFILES: [Profile; 5] = [
    Profile {
        name: "gpt-5-minimal",
        label: "GPT-5 (Minimal)",
        samples: [
            [(2, 1, 0), (1, 0, 0), (2, 1, 0), (1, 0, 0), (1, 0, 0), (3, 2, 3), (3, 3, 3), (1, 0, 0), (1, 0, 0), (3, 2, 1), (3, 3, 0), (2, 1, 0)],
            [(1, 0, 0), (1, 0, 0), (1, 0, 0), (3, 3, 1), (1, 0, 0), (2, 0, 1), (2, 1, 0), (3, 2, 2), (1, 0, 0), (1, 0, 0), (3, 1, 1), (2, 0, 1)],
            [(3, 1, 1), (1, 0, 0), (3, 3, 3), (3, 3, 1), (1, 0, 0), (3, 1, 2), (3, 2, 0), (3, 0, 2), (1, 0, 0), (3, 3, 0), (2, 1, 1), (2, 1, 0)],
        ],
    },
    Profile {
        name: "gpt-5-low",
        label: "GPT-5 (Low)",
        samples: [
            [(1, 0, 0), (3, 3, 0), (3, 2, 0), (2, 0, 1), (1, 0, 0), (3, 3, 2), (1, 0, 0), (3, 3, 3), (1, 0, 0), (2, 1, 1), (3, 3, 0), (2, 0, 1)],
            [(2, 0, 1), (2, 1, 0), (3, 3, 2), (2, 1, 1), (2, 0, 1), (3, 3, 1), (1, 0, 0), (2, 1, 1), (2, 1, 0), (2, 1, 0), (1, 0, 0), (2, 1, 0)],
            [(2, 1, 1), (3, 2, 0), (1, 0, 0), (2, 0, 1), (1, 0, 0), (3, 3, 3), (1, 0, 0), (2, 1, 1), (3, 3, 0), (2, 1, 0), (1, 0, 0), (2, 1, 0)],
        ],
    },
    Profile {
        name: "gpt-5-medium",
        label: "GPT-5 (Medium)",
        samples: [
            [(3, 2, 1), (1, 0, 0), (3, 2, 1), (3, 1, 1), (2, 1, 1), (1, 0, 0), (1, 0, 0), (2, 1, 1), (3, 3, 2), (3, 3, 0), (3, 3, 0), (3, 2, 0)],
            [(3, 2, 1), (1, 0, 0), (2, 1, 0), (1, 0, 0), (2, 1, 1), (2, 1, 0), (1, 0, 0), (3, 2, 3), (1, 0, 0), (2, 1, 1), (3, 2, 0), (1, 0, 0)],
            [(1, 0, 0), (1, 0, 0), (3, 3, 1), (3, 3, 1), (1, 0, 0), (2, 1, 0), (1, 0, 0), (3, 2, 3), (3, 3, 1), (1, 0, 0), (1, 0, 0), (1, 0, 0)],
        ],
    },
    Profile {
        name: "kimi-k2",
        label: "Kimi k2",
        samples: [
            [(3, 2, 1), (1, 0, 0), (3, 2, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (3, 2, 0), (1, 0, 0), (2, 1, 0), (2, 1, 0), (2, 1, 0), (1, 0, 0)],
            [(3, 2, 0), (3, 3, 0), (2, 1, 0), (3, 3, 0), (1, 0, 0), (1, 0, 0), (3, 2, 0), (2, 1, 1), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0)],
            [(3, 2, 0), (1, 0, 0), (1, 0, 0), (2, 1, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (2, 1, 0), (2, 1, 1), (1, 0, 0), (1, 0, 0), (2, 1, 0)],
        ],
    },
    Profile {
        name: "deepseek-r1",
        label: "DeepSeek R1",
        samples: [
            [(1, 0, 0), (1, 0, 0), (3, 0, 3), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0)],
            [(1, 0, 0), (1, 0, 0), (2, 1, 0), (1, 0, 0), (3, 1, 1), (1, 0, 0), (1, 0, 0), (3, 0, 3), (2, 0, 1), (1, 0, 0), (1, 0, 0), (1, 0, 0)],
            [(1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0), (3, 0, 3), (1, 0, 0), (1, 0, 0)],
        ],
    },
];

pub fn profile(name: &str) -> Option<&'static Profile> {
    PROFILES.iter().find(|p| p.name == name)
}

/// Per-attempt outcome: does the execution check fail, does the reviewer
/// ask for a revision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptPlan {
    pub syntax_error: bool,
    pub revise: bool,
}

/// Spreads a tuple over attempts. Syntax errors go to the first attempts;
/// revises first cover the remaining non-final attempts, which must fail
/// for the loop to continue, then stack onto attempts that already fail,
/// and reach the final attempt only when it is the last one allowed.
/// Returns `None` for tuples no run could produce.
pub fn plan_attempts((attempts, revises, syntax): Tuple, limit: u32) -> Option<Vec<AttemptPlan>> {
    if attempts == 0 || attempts > limit || syntax > attempts || revises > attempts {
        return None;
    }
    let n = attempts as usize;
    let final_may_fail = attempts == limit;
    let mut plan: Vec<AttemptPlan> =
        (0..n).map(|i| AttemptPlan { syntax_error: i < syntax as usize, revise: false }).collect();
    if !final_may_fail && plan[n - 1].syntax_error {
        return None;
    }
    let mut left = revises as usize;
    let uncovered: Vec<usize> = (0..n - 1).filter(|&i| !plan[i].syntax_error).collect();
    if uncovered.len() > left {
        return None;
    }
    for i in uncovered {
        plan[i].revise = true;
        left -= 1;
    }
    let extra: Vec<usize> = (0..n)
        .filter(|&i| !plan[i].revise && (i < n - 1 || final_may_fail))
        .filter(|&i| plan[i].syntax_error || i == n - 1)
        .collect();
    if extra.len() < left {
        return None;
    }
    for &i in extra.iter().take(left) {
        plan[i].revise = true;
    }
    Some(plan)
}

fn fenced(lang: &str, body: &str) -> String {
    format!("Here is the result.\n\n```{lang}\n{}\n```\n", body.trim_end())
}

/// A draft that fails parsing: the example graph with a dangling keyword.
pub fn broken_draft(graph: &str) -> String {
    format!("{}\nconcept\n", graph.trim_end())
}

/// Structural part of an example's bindings, as the sensor designer writes it.
pub fn sensor_reply(entry: &ExampleEntry) -> String {
    let mut sensors = entry.bindings.clone();
    if let Value::Object(map) = &mut sensors {
        map.remove("properties");
        map.remove("models");
    }
    fenced("json", &serde_json::to_string_pretty(&sensors).expect("json"))
}

pub fn property_reply(entry: &ExampleEntry) -> String {
    let body = json!({
        "properties": entry.bindings.get("properties").cloned().unwrap_or(json!([])),
        "prompts": entry.prompts,
    });
    fenced("json", &serde_json::to_string_pretty(&body).expect("json"))
}

/// Fields the example's properties read, as a mapping description.
pub fn mapping_for(entry: &ExampleEntry) -> String {
    let fields: BTreeSet<&str> = entry
        .bindings
        .get("properties")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|p| p.get("field").and_then(Value::as_str))
        .collect();
    let fields: Vec<&str> = fields.into_iter().collect();
    format!("Each record is one `{}`; its fields: {}.", entry.bindings["root"].as_str().unwrap_or("item"), fields.join(", "))
}

/// Backend whose replies drive `entry` through the workflow with `plan`.
pub fn scripted_backend(entry: &ExampleEntry, plan: &[AttemptPlan]) -> ScriptedBackend {
    let backend = ScriptedBackend::new();
    for step in plan {
        let graph = if step.syntax_error { broken_draft(&entry.graph) } else { entry.graph.clone() };
        backend.push(AgentRole::GraphDesigner, fenced("nsg", &graph));
        let review = if step.revise {
            "Some constraints of the task are not expressed yet.\nVERDICT: revise"
        } else {
            "The graph covers the task.\nVERDICT: approve"
        };
        backend.push(AgentRole::GraphReviewer, review);
    }
    backend.push(AgentRole::SensorDesigner, sensor_reply(entry));
    if plan.last().is_some_and(|a| a.syntax_error) {
        // Sensors for an unparsable graph fail their check and get refined once.
        backend.push(AgentRole::SensorDesigner, sensor_reply(entry));
    }
    backend.push(AgentRole::PropertyDesignator, property_reply(entry));
    backend
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRun {
    pub task: usize,
    pub task_id: String,
    pub sample: usize,
    pub target: Tuple,
    pub stats: AttemptStats,
    /// `done`, or the reason the run stopped.
    pub status: String,
}

impl EvalRun {
    pub fn matches_target(&self) -> bool {
        self.stats.tuple() == self.target
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("tuple {0:?} cannot be produced with an attempt limit of {1}")]
    Unreachable(Tuple, u32),
    #[error("profile covers {profile} tasks but the corpus has {corpus}")]
    TaskCount { profile: usize, corpus: usize },
}

/// One session per (task, sample), leave-one-out retrieval, gates approved
/// automatically. Runs that fail are reported, not fatal.
pub fn run_one(corpus: &Corpus, task: usize, sample: usize, target: Tuple) -> Result<EvalRun, EvalError> {
    let entry = &corpus.entries()[task];
    let plan = plan_attempts(target, DEFAULT_ATTEMPT_LIMIT).ok_or(EvalError::Unreachable(target, DEFAULT_ATTEMPT_LIMIT))?;
    let backend = scripted_backend(entry, &plan);
    let config = WorkflowConfig {
        exclusions: BTreeSet::from([entry.id.clone()]),
        auto_approve: true,
        auto_mapping: Some(mapping_for(entry)),
        ..WorkflowConfig::default()
    };
    let mut state = SessionState::new(&format!("eval-{}-s{}", entry.id, sample + 1), &entry.description, config);
    let status = match run_to_pause(&mut state, &backend, corpus) {
        Ok(StepOutcome::Completed { .. }) => "done".to_string(),
        Ok(StepOutcome::Failed { reason }) => format!("failed: {reason}"),
        Ok(other) => format!("stopped: {other:?}"),
        Err(e) => format!("error: {e}"),
    };
    Ok(EvalRun { task: task + 1, task_id: entry.id.clone(), sample: sample + 1, target, stats: state.stats, status })
}

/// Every (task, sample) of `profile`, in task-major order whatever `jobs` is.
pub fn evaluate(corpus: &Corpus, profile: &Profile, samples: usize, jobs: usize) -> Result<Vec<EvalRun>, EvalError> {
    let tasks = profile.samples[0].len();
    if corpus.len() < tasks {
        return Err(EvalError::TaskCount { profile: tasks, corpus: corpus.len() });
    }
    let samples = samples.min(profile.samples.len());
    let work: Vec<(usize, usize)> = (0..tasks).flat_map(|t| (0..samples).map(move |s| (t, s))).collect();
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<EvalRun, EvalError>>> = (0..work.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = work.len().div_ceil(jobs).max(1);
        for (slots, items) in results.chunks_mut(chunk).zip(work.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, &(t, s)) in slots.iter_mut().zip(items) {
                    *slot = Some(run_one(corpus, t, s, profile.samples[s][t]));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every slot is filled")).collect()
}

/// Runs as one `(attempts,revises,syntax)` cell per task, one row per sample.
pub fn summary_table(label: &str, runs: &[EvalRun]) -> String {
    let tasks = runs.iter().map(|r| r.task).max().unwrap_or(0);
    let samples = runs.iter().map(|r| r.sample).max().unwrap_or(0);
    let mut out = String::new();
    let header: Vec<String> = (1..=tasks).map(|t| format!("{t:>7}")).collect();
    let _ = writeln!(out, "{:<16} {:<6} {}", "Model", "Sample", header.join(" "));
    for s in 1..=samples {
        let cells: Vec<String> = (1..=tasks)
            .map(|t| {
                runs.iter().find(|r| r.task == t && r.sample == s).map_or("-".to_string(), |r| r.stats.to_string())
            })
            .map(|c| format!("{c:>7}"))
            .collect();
        let model = if s == 1 { label } else { "" };
        let _ = writeln!(out, "{:<16} {:<6} {}", model, format!("S{s}"), cells.join(" "));
    }
    out
}
