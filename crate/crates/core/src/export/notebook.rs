use serde::Serialize;
use serde_json::{json, Value};

use super::bundle::{ProgramBundle, BINDINGS_FILE, GRAPH_FILE};
use super::ExportError;

pub const NOTEBOOK_FILE: &str = "program.ipynb";
pub const DEFAULT_DATA_FILE: &str = "data.jsonl";

/// Splits text into notebook source lines, each keeping its newline except
/// the last.
fn source_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text.split_inclusive('\n').map(str::to_string).collect();
    if let Some(last) = lines.last_mut() {
        if last.ends_with('\n') {
            last.pop();
        }
    }
    lines.retain(|l| !l.is_empty());
    lines
}

fn code_cell(index: usize, text: &str) -> Value {
    json!({
        "cell_type": "code",
        "execution_count": null,
        "id": format!("cell-{index}"),
        "metadata": {},
        "outputs": [],
        "source": source_lines(text),
    })
}

/// Source of the five code cells: setup, graph, dataset, bindings, run.
pub fn cell_sources(bundle: &ProgramBundle) -> [String; 5] {
    let data = bundle.run.dataset.as_deref().unwrap_or(DEFAULT_DATA_FILE);
    let setup = format!(
        "# {name}: {task}\n\
         # Needs the `nesy` runner on PATH (cargo install --path crates/cli from a checkout).\n\
         import os\n\
         # Models run in mock mode. To query a live model, set the mode to \"remote\"\n\
         # and export NESY_MODEL_URL and NESY_MODEL_KEY.\n\
         os.environ[\"NESY_MODEL_MODE\"] = \"mock\"\n",
        name = bundle.run.name,
        task = bundle.run.task.replace('\n', " "),
    );
    let graph = format!("%%writefile {GRAPH_FILE}\n{}", bundle.graph);
    let dataset = format!(
        "# Dataset: JSON Lines, one record per line. Replace the path to use another file.\n\
         DATA = {}\n",
        serde_json::to_string(data).expect("string serializes")
    );
    let bindings = format!("%%writefile {BINDINGS_FILE}\n{}", super::bundle::pretty(&bundle.bindings));
    let run = format!("!nesy infer --graph {GRAPH_FILE} --bindings {BINDINGS_FILE} --data \"{{DATA}}\"\n");
    [setup, graph, dataset, bindings, run]
}

/// nbformat 4.5 document for `bundle`, byte-identical for identical input.
pub fn notebook(bundle: &ProgramBundle) -> Result<String, ExportError> {
    bundle.validate()?;
    let cells: Vec<Value> = cell_sources(bundle).iter().enumerate().map(|(i, s)| code_cell(i + 1, s)).collect();
    let doc = json!({
        "cells": cells,
        "metadata": {
            "kernelspec": {"display_name": "Python 3", "language": "python", "name": "python3"},
            "language_info": {"name": "python"}
        },
        "nbformat": 4,
        "nbformat_minor": 5
    });
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, serde_json::ser::PrettyFormatter::with_indent(b" "));
    doc.serialize(&mut ser).expect("notebook serializes");
    let mut text = String::from_utf8(buf).expect("serde_json writes UTF-8");
    text.push('\n');
    Ok(text)
}
