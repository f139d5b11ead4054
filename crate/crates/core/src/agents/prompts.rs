//! Prompt templates. Bump [`PROMPT_VERSION`] whenever the wording changes.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{AgentError, AgentRole};
use crate::rag::ExampleEntry;

pub const PROMPT_VERSION: &str = "1";

const LANGUAGE_GUIDE: &str = "\
A graph file looks like this:

graph NAME {
  concept paragraph;
  concept question;
  labels answer of question { is_more, is_less, no_effect }
  contains paragraph_question: paragraph -> question;
  has_a transitivity in paragraph (t1: question, t2: question, t3: question);
  constraint transitive_more over transitivity(a, b, c) {
    if(and(answer.is_more(a), answer.is_more(b)), answer.is_more(c))
  }
}

Operators: if(a, b), iff(a, b), and(...), or(...), not(a), exactly(k, ...),
atMost(k, ...), atLeast(k, ...). A label atom is set.label(var); a relation
atom is relation(var, ...). A constraint ranges over a concept, such as
`over question(q)`, or over a relation's tuples; add `in owner` to bind the
tuple's owning instance as well.";

/// Everything a prompt may draw on. The workflow fills the fields that
/// exist at the current phase.
#[derive(Debug, Clone)]
pub struct PromptContext<'a> {
    pub task: &'a str,
    pub examples: &'a [ExampleEntry],
    pub exclusions: &'a BTreeSet<String>,
    pub graph: Option<&'a str>,
    pub previous_draft: Option<&'a str>,
    pub execution_notes: &'a [String],
    pub reviewer_notes: &'a [String],
    pub human_feedback: Option<&'a str>,
    pub sensor_draft: Option<&'a str>,
    pub sensor_errors: &'a [String],
    pub mapping: Option<&'a str>,
}

static NO_EXCLUSIONS: BTreeSet<String> = BTreeSet::new();

impl Default for PromptContext<'_> {
    fn default() -> Self {
        PromptContext {
            task: "",
            examples: &[],
            exclusions: &NO_EXCLUSIONS,
            graph: None,
            previous_draft: None,
            execution_notes: &[],
            reviewer_notes: &[],
            human_feedback: None,
            sensor_draft: None,
            sensor_errors: &[],
            mapping: None,
        }
    }
}

fn section(out: &mut String, title: &str, body: &str) {
    let _ = write!(out, "\n## {title}\n{}\n", body.trim_end());
}

fn fenced(lang: &str, body: &str) -> String {
    format!("```{lang}\n{}\n```", body.trim_end())
}

fn bullets(items: &[String]) -> String {
    items.iter().map(|i| format!("- {}", i.replace('\n', "\n  "))).collect::<Vec<_>>().join("\n")
}

fn visible<'a>(ctx: &'a PromptContext<'a>) -> impl Iterator<Item = &'a ExampleEntry> + 'a {
    ctx.examples.iter().filter(|e| !ctx.exclusions.contains(&e.id))
}

fn require<'a>(value: Option<&'a str>, field: &'static str) -> Result<&'a str, AgentError> {
    value.filter(|v| !v.trim().is_empty()).ok_or(AgentError::MissingContext(field))
}

pub fn assemble_prompt(role: AgentRole, ctx: &PromptContext) -> Result<String, AgentError> {
    if ctx.task.trim().is_empty() {
        return Err(AgentError::MissingContext("task description"));
    }
    let mut out = String::new();
    match role {
        AgentRole::RagSelectorReranker => {
            out.push_str("You pick the prior programs most useful as examples for a new task.\n");
            section(&mut out, "Task", ctx.task);
            let list: Vec<String> = visible(ctx).map(|e| format!("- {}: {}", e.id, e.description)).collect();
            section(&mut out, "Candidates", &list.join("\n"));
            section(&mut out, "Output", "List the ids to keep, most useful first, one per line.");
        }
        AgentRole::GraphDesigner => {
            out.push_str("You write concept graphs with logical constraints for a neuro-symbolic program.\n\n");
            out.push_str(LANGUAGE_GUIDE);
            out.push('\n');
            section(&mut out, "Task", ctx.task);
            let examples: Vec<String> = visible(ctx)
                .map(|e| format!("### {}\n{}\n{}", e.id, e.description.trim(), fenced("nsg", &e.graph)))
                .collect();
            if !examples.is_empty() {
                section(&mut out, "Examples", &examples.join("\n\n"));
            }
            if let Some(draft) = ctx.previous_draft {
                section(&mut out, "Previous draft", &fenced("nsg", draft));
            }
            if !ctx.execution_notes.is_empty() {
                section(&mut out, "Execution errors", &bullets(ctx.execution_notes));
            }
            if !ctx.reviewer_notes.is_empty() {
                section(&mut out, "Reviewer notes", &bullets(ctx.reviewer_notes));
            }
            if let Some(feedback) = ctx.human_feedback {
                section(&mut out, "Human feedback", feedback);
            }
            section(&mut out, "Output", "Reply with the complete graph in a single ```nsg fenced block.");
        }
        AgentRole::GraphReviewer => {
            let graph = require(ctx.graph, "graph draft")?;
            out.push_str("You review a concept graph written for the task below. Check that the concepts, ");
            out.push_str("relations and constraints capture the task and nothing more.\n");
            section(&mut out, "Task", ctx.task);
            section(&mut out, "Draft", &fenced("nsg", graph));
            if let Some(feedback) = ctx.human_feedback {
                section(&mut out, "Human feedback", feedback);
            }
            section(
                &mut out,
                "Output",
                "Write your review, then finish with exactly one line `VERDICT: approve` or `VERDICT: revise`.",
            );
        }
        AgentRole::SensorDesigner => {
            let graph = require(ctx.graph, "approved graph")?;
            out.push_str("You write the data binding for a concept graph: the root concept, the containment ");
            out.push_str("edges read from child lists and the has_a tuples read from index lists.\n");
            section(&mut out, "Task", ctx.task);
            section(&mut out, "Graph", &fenced("nsg", graph));
            let examples: Vec<String> = visible(ctx)
                .filter(|e| !e.bindings.is_null())
                .map(|e| {
                    let json = serde_json::to_string_pretty(&e.bindings).unwrap_or_default();
                    format!("### {}\n{}", e.id, fenced("json", &json))
                })
                .collect();
            if !examples.is_empty() {
                section(&mut out, "Examples", &examples.join("\n\n"));
            }
            if let Some(draft) = ctx.sensor_draft {
                section(&mut out, "Previous draft", &fenced("json", draft));
            }
            if !ctx.sensor_errors.is_empty() {
                section(&mut out, "Errors", &bullets(ctx.sensor_errors));
            }
            if let Some(feedback) = ctx.human_feedback {
                section(&mut out, "Human feedback", feedback);
            }
            section(&mut out, "Output", "Reply with the binding as JSON in a single ```json fenced block.");
        }
        AgentRole::PropertyDesignator => {
            let graph = require(ctx.graph, "approved graph")?;
            let sensors = require(ctx.sensor_draft, "sensor binding")?;
            let mapping = require(ctx.mapping, "dataset mapping")?;
            out.push_str("You attach dataset fields to concepts as properties and write one prompt per ");
            out.push_str("label set for the language model that scores it.\n");
            section(&mut out, "Task", ctx.task);
            section(&mut out, "Graph", &fenced("nsg", graph));
            section(&mut out, "Sensors", &fenced("json", sensors));
            section(&mut out, "Dataset mapping", mapping);
            section(
                &mut out,
                "Output",
                "Reply with a single ```json fenced block holding {\"properties\": [...], \"prompts\": {\"label_set\": \"template with {property} placeholders\"}}.",
            );
        }
    }
    Ok(out)
}
