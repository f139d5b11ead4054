//! `nesy run`: one design session in the terminal. Gates read their answer
//! from stdin, one line each.

use std::io::BufRead;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use nesy_core::agents::CompletionBackend;
use nesy_core::rag::Corpus;
use nesy_core::workflow::{self, Gate, GateView, HumanDecision, SessionState, StepOutcome};
use nesy_service::{Envelope, FileStore};
use serde_json::json;

pub struct RunArgs {
    pub state: SessionState,
    pub store: Option<(FileStore, Envelope)>,
    pub out: Option<PathBuf>,
}

fn show(view: &GateView) {
    eprintln!("--- {} gate (attempt {}) ---", view.gate, view.attempts);
    if let Some(draft) = &view.draft {
        eprintln!("{}", draft.trim_end());
    }
    if let Some(exec) = &view.execution {
        for m in &exec.messages {
            eprintln!("check: {m}");
        }
    }
    if let Some(review) = &view.review {
        eprintln!("review: {}", review.notes);
    }
    for e in &view.errors {
        eprintln!("error: {e}");
    }
    match view.gate {
        Gate::Mapping => eprintln!("describe the dataset fields:"),
        Gate::Graph => eprintln!("approve | revise <feedback>"),
        Gate::Sensor => eprintln!("approve | revise <feedback> | edit <file>"),
    }
}

fn read_answer(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> anyhow::Result<String> {
    match lines.next() {
        Some(line) => Ok(line.context("reading stdin")?),
        None => bail!("stdin closed while the session waits for input"),
    }
}

fn decision(gate: Gate, answer: &str) -> anyhow::Result<HumanDecision> {
    let (word, rest) = answer.trim().split_once(' ').unwrap_or((answer.trim(), ""));
    let rest = rest.trim();
    Ok(match word {
        "approve" => HumanDecision::approve(gate),
        "revise" => HumanDecision::revise(gate, rest),
        "edit" => {
            let code = std::fs::read_to_string(rest).with_context(|| format!("reading {rest}"))?;
            HumanDecision::edit(gate, code)
        }
        other => bail!("unknown answer `{other}`"),
    })
}

fn persist(state: &SessionState, from: usize, store: &mut Option<(FileStore, Envelope)>) -> anyhow::Result<()> {
    if let Some((fs, envelope)) = store {
        *envelope = fs.save(state, from, envelope)?;
    }
    Ok(())
}

pub fn run(args: RunArgs, backend: &dyn CompletionBackend, corpus: &Corpus) -> anyhow::Result<serde_json::Value> {
    let RunArgs { mut state, mut store, out } = args;
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let started = Instant::now();
    loop {
        let before = state.events.len();
        let phase = state.phase;
        let clock = Instant::now();
        let result = workflow::step(&mut state, backend, corpus);
        persist(&state, before, &mut store)?;
        let outcome = result?;
        eprintln!("[{phase}] {:.3}s", clock.elapsed().as_secs_f64());
        match outcome {
            StepOutcome::Advanced { .. } => {}
            StepOutcome::AwaitingHuman { gate, view } => {
                show(&view);
                let answer = read_answer(&mut lines)?;
                let before = state.events.len();
                let applied = match gate {
                    Gate::Mapping => workflow::provide_mapping(&mut state, &answer),
                    gate => decision(gate, &answer).and_then(|d| Ok(workflow::submit_human(&mut state, d)?)).map_err(|e| {
                        workflow::WorkflowError::InvalidDecision(e.to_string())
                    }),
                };
                if let Err(e) = applied {
                    eprintln!("not accepted: {e}");
                }
                persist(&state, before, &mut store)?;
            }
            StepOutcome::Completed { .. } => break,
            StepOutcome::Failed { reason } => bail!("session failed: {reason}"),
        }
    }
    let files = match &out {
        Some(dir) => workflow::export_session(&state, dir)?,
        None => Vec::new(),
    };
    eprintln!("[total] {:.3}s", started.elapsed().as_secs_f64());
    Ok(json!({
        "session_id": state.session_id,
        "phase": state.phase,
        "stats": state.stats.to_string(),
        "files": files,
    }))
}
