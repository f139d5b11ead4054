use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use nesy_core::agents::{AgentRole, ScriptedBackend};
use nesy_core::workflow::SessionState;

/// Loads `{"graph-designer": ["reply", ...], ...}`.
pub fn load(path: &Path) -> anyhow::Result<ScriptedBackend> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading script {}", path.display()))?;
    let script: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).with_context(|| format!("parsing script {}", path.display()))?;
    let backend = ScriptedBackend::new();
    for (role, replies) in script {
        let Some(role) = AgentRole::parse(&role) else {
            bail!("script names unknown role `{role}`");
        };
        backend.extend(role, replies);
    }
    Ok(backend)
}

/// Drops the replies a resumed session has already consumed.
pub fn skip_consumed(backend: &ScriptedBackend, state: &SessionState) {
    let reviewed = state
        .graph_attempts
        .iter()
        .filter(|a| a.review.is_some() && !a.source().trim().is_empty())
        .count();
    backend.skip(AgentRole::GraphDesigner, state.graph_attempts.len());
    backend.skip(AgentRole::GraphReviewer, reviewed);
    backend.skip(AgentRole::SensorDesigner, state.sensor_attempts.len());
    backend.skip(AgentRole::PropertyDesignator, usize::from(state.bundle.is_some()));
}
