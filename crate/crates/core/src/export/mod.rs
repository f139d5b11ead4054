//! Bundle files and the runnable notebook.

mod bundle;
mod notebook;

pub use bundle::{
    read_bundle, write_bundle, ExportError, ProgramBundle, RunConfig, BINDINGS_FILE, GRAPH_FILE, PROMPTS_FILE, RUN_FILE,
};
pub use notebook::{cell_sources, notebook, DEFAULT_DATA_FILE, NOTEBOOK_FILE};
