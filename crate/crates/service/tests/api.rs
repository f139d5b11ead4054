use std::fs;
use std::path::Path;
use std::sync::Arc;

use nesy_core::agents::{AgentError, AgentRole, CompletionBackend, ScriptedBackend};
use nesy_core::eval::{property_reply, sensor_reply};
use nesy_core::rag::Corpus;
use nesy_service::{router, AppState, FileStore};
use serde_json::{json, Value};

struct Server {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
}

impl Server {
    fn start(dir: &Path, backend: Arc<dyn CompletionBackend>, token: Option<&str>) -> Server {
        let app = AppState::new(FileStore::open(dir).unwrap(), Corpus::seed(), backend, token.map(str::to_string));
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        listener.set_nonblocking(true).unwrap();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, router(app)).await.unwrap();
            });
        });
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { base: format!("http://{addr}"), agent, token: token.map(str::to_string) }
    }

    fn auth<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match &self.token {
            Some(t) => req.header("Authorization", &format!("Bearer {t}")),
            None => req,
        }
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut resp = self.auth(self.agent.get(&format!("{}{path}", self.base))).call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
    }

    fn post(&self, path: &str, body: Option<Value>) -> (u16, Value) {
        let req = self.auth(self.agent.post(&format!("{}{path}", self.base)));
        let mut resp = match body {
            Some(b) => req.send_json(b).unwrap(),
            None => req.send_empty().unwrap(),
        };
        let text = resp.body_mut().read_to_string().unwrap();
        (resp.status().as_u16(), serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    fn create(&self) -> String {
        let corpus = Corpus::seed();
        let task = corpus.get("wiqa").unwrap().description.clone();
        let (status, body) =
            self.post("/sessions", Some(json!({"task": task, "config": {"exclusions": ["wiqa"]}, "owner": "ana"})));
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    /// Steps until the session needs a human or finishes.
    fn step_to_pause(&self, id: &str) -> Value {
        for _ in 0..20 {
            let (status, body) = self.post(&format!("/sessions/{id}/step"), None);
            assert_eq!(status, 200, "{body}");
            if body["status"] != "advanced" {
                return body;
            }
        }
        panic!("session never paused");
    }
}

fn wiqa_script() -> Arc<ScriptedBackend> {
    let corpus = Corpus::seed();
    let entry = corpus.get("wiqa").unwrap();
    let backend = ScriptedBackend::new();
    backend
        .push(AgentRole::GraphDesigner, format!("```nsg\n{}\n```", entry.graph))
        .push(AgentRole::GraphReviewer, "Fine.\nVERDICT: approve")
        .push(AgentRole::SensorDesigner, sensor_reply(entry))
        .push(AgentRole::PropertyDesignator, property_reply(entry));
    Arc::new(backend)
}

#[test]
fn health_needs_no_token_but_sessions_do() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), wiqa_script(), Some("s3cret"));
    let anonymous = Server { token: None, base: server.base.clone(), agent: server.agent.clone() };
    assert_eq!(anonymous.get("/health").0, 200);
    assert_eq!(anonymous.get("/sessions").0, 401);
    let wrong = Server { token: Some("nope".into()), base: server.base.clone(), agent: server.agent.clone() };
    assert_eq!(wrong.post("/sessions", Some(json!({"task": "t"}))).0, 401);
    assert_eq!(server.get("/sessions").0, 200);
}

#[test]
fn full_session_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), wiqa_script(), None);
    let id = server.create();

    let paused = server.step_to_pause(&id);
    assert_eq!(paused["status"], "awaiting-human");
    assert_eq!(paused["gate"], "graph");
    assert!(paused["view"]["draft"].as_str().unwrap().contains("graph wiqa"));
    assert_eq!(server.post(&format!("/sessions/{id}/step"), None).0, 409);
    assert_eq!(server.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "sensor", "action": "approve"}))).0, 409);
    assert_eq!(server.get(&format!("/sessions/{id}/export.ipynb")).0, 409);
    let (status, body) = server.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "graph", "action": "approve"})));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["phase"], "sensor-design");

    let paused = server.step_to_pause(&id);
    assert_eq!(paused["gate"], "sensor");
    let bad_edit = json!({"gate": "sensor", "action": "edit", "code": "{oops"});
    assert_eq!(server.post(&format!("/sessions/{id}/feedback"), Some(bad_edit)).0, 400);
    server.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "sensor", "action": "approve"})));

    assert_eq!(server.post(&format!("/sessions/{id}/step"), None).0, 409);
    assert_eq!(server.post(&format!("/sessions/{id}/mapping"), Some(json!({"mapping": " "}))).0, 400);
    let (status, _) = server.post(&format!("/sessions/{id}/mapping"), Some(json!({"mapping": "paragraph text and questions"})));
    assert_eq!(status, 200);
    let done = server.step_to_pause(&id);
    assert_eq!(done["status"], "completed", "{done}");

    let (status, nb) = server.get(&format!("/sessions/{id}/export.ipynb"));
    assert_eq!(status, 200);
    let nb: Value = serde_json::from_str(&nb).unwrap();
    assert_eq!(nb["nbformat"], 4);
    assert_eq!(nb["cells"].as_array().unwrap().len(), 5);

    let (status, state) = server.get(&format!("/sessions/{id}/state"));
    assert_eq!(status, 200);
    let state: Value = serde_json::from_str(&state).unwrap();
    assert_eq!(state["phase"], "done");
    let (_, list) = server.get("/sessions");
    let list: Value = serde_json::from_str(&list).unwrap();
    assert_eq!(list[0]["owner"], "ana");
    assert_eq!(list[0]["phase"], "done");
}

#[test]
fn unknown_sessions_and_bad_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), wiqa_script(), None);
    assert_eq!(server.get("/sessions/nope/state").0, 404);
    assert_eq!(server.get("/sessions/..%2F..%2Fetc/state").0, 404);
    assert_eq!(server.post("/sessions/nope/step", None).0, 404);
    assert_eq!(server.post("/sessions", Some(json!({"nothing": 1}))).0, 400);
    assert_eq!(server.post("/sessions", Some(json!({"task": ""}))).0, 400);
    let id = server.create();
    assert_eq!(server.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "graph"}))).0, 400);
    assert_eq!(server.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "graph", "action": "approve"}))).0, 409);
}

struct Down;

impl CompletionBackend for Down {
    fn complete(&self, _: AgentRole, _: &str) -> Result<String, AgentError> {
        Err(AgentError::Backend("upstream unavailable".into()))
    }
}

#[test]
fn backend_failure_is_a_logged_500() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), Arc::new(Down), None);
    let id = server.create();
    assert_eq!(server.post(&format!("/sessions/{id}/step"), None).0, 200);
    let (status, body) = server.post(&format!("/sessions/{id}/step"), None);
    assert_eq!(status, 500);
    assert_eq!(body["retryable"], true);
    let (_, state) = server.get(&format!("/sessions/{id}/state"));
    let state: Value = serde_json::from_str(&state).unwrap();
    assert_eq!(state["phase"], "graph-design");
    assert_eq!(state["events"].as_array().unwrap().last().unwrap()["event"]["type"], "agent-failed");
}

#[test]
fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = Server::start(dir.path(), wiqa_script(), None);
    let id = first.create();
    first.step_to_pause(&id);
    let (_, before) = first.get(&format!("/sessions/{id}/state"));

    let second = Server::start(dir.path(), wiqa_script(), None);
    let (status, after) = second.get(&format!("/sessions/{id}/state"));
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&after).unwrap(), serde_json::from_str::<Value>(&before).unwrap());
    let (status, body) = second.post(&format!("/sessions/{id}/feedback"), Some(json!({"gate": "graph", "action": "approve"})));
    assert_eq!(status, 200, "{body}");
}

#[test]
fn torn_log_recovers_to_last_intact_event() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), wiqa_script(), None);
    let id = server.create();
    server.step_to_pause(&id);
    let log = dir.path().join(&id).join("events.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);

    // Crash mid-write: the last line is cut short.
    let torn = format!("{}\n{}\n{}\n{}", lines[0], lines[1], lines[2], &lines[3][..lines[3].len() / 2]);
    fs::write(&log, torn).unwrap();
    let store = FileStore::open(dir.path()).unwrap();
    let (state, envelope) = store.load(&id).unwrap();
    assert_eq!(state.events.len(), 3);
    assert_eq!(state.phase.name(), "graph-check");
    assert_eq!(envelope.owner.as_deref(), Some("ana"));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 3);

    // A line whose checksum no longer matches is dropped with what follows.
    let mut lines: Vec<String> = fs::read_to_string(&log).unwrap().lines().map(str::to_string).collect();
    let mut line: Value = serde_json::from_str(&lines[1]).unwrap();
    line["event"]["picks"][0]["similarity"] = json!(0.99);
    lines[1] = line.to_string();
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    let (state, _) = store.load(&id).unwrap();
    assert_eq!(state.events.len(), 1);
    assert_eq!(state.phase.name(), "rag-select");
}
