use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binding::{BindingSpec, ModelMode};
use crate::graph;
use crate::ilp::DEFAULT_NODE_LIMIT;

pub const GRAPH_FILE: &str = "graph.nsg";
pub const BINDINGS_FILE: &str = "bindings.json";
pub const PROMPTS_FILE: &str = "prompts.json";
pub const RUN_FILE: &str = "run.json";

/// The finished program: knowledge declaration plus model declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramBundle {
    pub graph: String,
    pub bindings: BindingSpec,
    pub prompts: BTreeMap<String, String>,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub task: String,
    /// Dataset the program was designed for (JSON Lines).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default)]
    pub model_mode: ModelMode,
    pub node_limit: u64,
    pub prompt_version: String,
}

impl RunConfig {
    pub fn new(name: &str, task: &str) -> Self {
        RunConfig {
            name: name.to_string(),
            task: task.to_string(),
            dataset: None,
            model_mode: ModelMode::Mock,
            node_limit: DEFAULT_NODE_LIMIT,
            prompt_version: crate::agents::PROMPT_VERSION.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("graph is not valid: {0}")]
    InvalidGraph(String),
    #[error("bindings are not valid: {0}")]
    InvalidBindings(String),
    #[error("label set `{0}` has no model")]
    MissingModel(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ProgramBundle {
    /// Graph parses and validates without errors, bindings fit the graph,
    /// and every label set has a model.
    pub fn validate(&self) -> Result<(), ExportError> {
        let g = graph::parse(&self.graph).map_err(|d| ExportError::InvalidGraph(join(&d)))?;
        let diags = graph::validate(&g);
        if graph::has_errors(&diags) {
            let errors: Vec<_> = diags.into_iter().filter(|d| d.is_error()).collect();
            return Err(ExportError::InvalidGraph(join(&errors)));
        }
        self.bindings.validate(&g).map_err(|e| ExportError::InvalidBindings(e.to_string()))?;
        for set in g.label_sets() {
            if self.bindings.model_for(&set.name).is_none() {
                return Err(ExportError::MissingModel(set.name.clone()));
            }
        }
        Ok(())
    }

    /// File name -> contents, in a fixed order.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            (GRAPH_FILE, self.graph.clone()),
            (BINDINGS_FILE, pretty(&self.bindings)),
            (PROMPTS_FILE, pretty(&self.prompts)),
            (RUN_FILE, pretty(&self.run)),
        ]
    }
}

fn join(diags: &[graph::Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("bundle part serializes") + "\n"
}

/// Validates, then writes the four bundle files into `dir`.
pub fn write_bundle(bundle: &ProgramBundle, dir: &Path) -> Result<Vec<String>, ExportError> {
    bundle.validate()?;
    let io = |p: &Path, e: std::io::Error| ExportError::Io { path: p.display().to_string(), message: e.to_string() };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (name, text) in bundle.files() {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(name.to_string());
    }
    Ok(written)
}

pub fn read_bundle(dir: &Path) -> Result<ProgramBundle, ExportError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| ExportError::Io { path: path.display().to_string(), message: e.to_string() })
    };
    let parse_err = |name: &str, e: serde_json::Error| ExportError::Io { path: dir.join(name).display().to_string(), message: e.to_string() };
    Ok(ProgramBundle {
        graph: read(GRAPH_FILE)?,
        bindings: serde_json::from_str(&read(BINDINGS_FILE)?).map_err(|e| parse_err(BINDINGS_FILE, e))?,
        prompts: serde_json::from_str(&read(PROMPTS_FILE)?).map_err(|e| parse_err(PROMPTS_FILE, e))?,
        run: serde_json::from_str(&read(RUN_FILE)?).map_err(|e| parse_err(RUN_FILE, e))?,
    })
}
