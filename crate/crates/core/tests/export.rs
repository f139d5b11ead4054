use nesy_core::export::*;
use nesy_core::rag::Corpus;
use nesy_core::workflow::assemble_bundle;
use serde_json::Value;

const SCHEMA: &str = include_str!("fixtures/nbformat.v4.5.schema.json");

fn bundle_for(id: &str) -> ProgramBundle {
    let corpus = Corpus::seed();
    let entry = corpus.get(id).unwrap();
    assemble_bundle(&entry.graph, &entry.bindings.to_string(), "{}", &entry.description, Some("train.jsonl")).unwrap()
}

fn minimal() -> ProgramBundle {
    let graph = "graph tiny {\n  concept review;\n  labels sentiment of review { good, bad }\n}\n";
    let sensors = r#"{"root": "review", "properties": [{"concept": "review", "property": "text", "field": "text"}]}"#;
    let reply = r#"{"prompts": {"sentiment": "Review: {text}"}}"#;
    assemble_bundle(graph, sensors, reply, "Label reviews.", None).unwrap()
}

fn cells(nb: &str) -> Vec<String> {
    let doc: Value = serde_json::from_str(nb).unwrap();
    doc["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["source"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect::<String>())
        .collect()
}

#[test]
fn notebook_matches_the_nbformat_schema() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for bundle in [bundle_for("wiqa"), bundle_for("mnist-sum"), minimal()] {
        let doc: Value = serde_json::from_str(&notebook(&bundle).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}");
        assert_eq!(doc["nbformat"], 4);
        assert_eq!(doc["nbformat_minor"], 5);
    }
}

#[test]
fn five_cells_in_order() {
    let bundle = bundle_for("wiqa");
    let nb = notebook(&bundle).unwrap();
    let doc: Value = serde_json::from_str(&nb).unwrap();
    for (i, cell) in doc["cells"].as_array().unwrap().iter().enumerate() {
        assert_eq!(cell["cell_type"], "code");
        assert_eq!(cell["id"], format!("cell-{}", i + 1));
        assert!(cell["execution_count"].is_null());
        assert_eq!(cell["outputs"], Value::Array(vec![]));
    }
    let cells = cells(&nb);
    assert_eq!(cells.len(), 5);
    assert!(cells[0].contains("os.environ[\"NESY_MODEL_MODE\"] = \"mock\""));
    assert!(cells[0].contains("NESY_MODEL_URL"));
    assert_eq!(cells[1], format!("%%writefile {GRAPH_FILE}\n{}", bundle.graph.trim_end()));
    assert!(cells[2].contains("DATA = \"train.jsonl\""));
    let files = bundle.files();
    assert_eq!(cells[3], format!("%%writefile {BINDINGS_FILE}\n{}", files[1].1.trim_end()));
    assert!(cells[4].starts_with("!nesy infer --graph graph.nsg --bindings bindings.json --data"));
}

#[test]
fn cells_only_name_bundle_files() {
    let bundle = bundle_for("sudoku");
    let written: Vec<&str> = bundle.files().into_iter().map(|(n, _)| n).collect();
    let nb = notebook(&bundle).unwrap();
    for cell in cells(&nb) {
        for word in cell.split_whitespace() {
            if word.ends_with(".nsg") || word.ends_with(".json") {
                assert!(written.contains(&word), "{word}");
            }
        }
    }
}

#[test]
fn export_is_byte_deterministic() {
    let a = notebook(&bundle_for("propara")).unwrap();
    let b = notebook(&bundle_for("propara")).unwrap();
    assert_eq!(a.as_bytes(), b.as_bytes());
    assert!(a.ends_with("}\n"));

    let dir = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    write_bundle(&bundle_for("propara"), dir.path()).unwrap();
    write_bundle(&bundle_for("propara"), other.path()).unwrap();
    for name in [GRAPH_FILE, BINDINGS_FILE, PROMPTS_FILE, RUN_FILE] {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(other.path().join(name)).unwrap());
    }
}

#[test]
fn bundle_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for bundle in [bundle_for("beliefbank"), minimal()] {
        let written = write_bundle(&bundle, dir.path()).unwrap();
        assert_eq!(written, [GRAPH_FILE, BINDINGS_FILE, PROMPTS_FILE, RUN_FILE]);
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(notebook(&back).unwrap(), notebook(&bundle).unwrap());
    }
}

#[test]
fn unconstrained_graph_still_has_five_cells() {
    let nb = notebook(&minimal()).unwrap();
    let cells = cells(&nb);
    assert_eq!(cells.len(), 5);
    assert!(cells[2].contains(&format!("DATA = \"{DEFAULT_DATA_FILE}\"")));
}

#[test]
fn invalid_bundles_are_refused() {
    let mut broken = minimal();
    broken.graph.push_str("concept");
    assert!(matches!(notebook(&broken), Err(ExportError::InvalidGraph(_))));

    let mut unmodelled = minimal();
    unmodelled.bindings.models.clear();
    assert!(matches!(unmodelled.validate(), Err(ExportError::MissingModel(set)) if set == "sentiment"));

    let dir = tempfile::tempdir().unwrap();
    assert!(write_bundle(&unmodelled, dir.path()).is_err());
    assert!(!dir.path().join(GRAPH_FILE).exists());
    assert!(read_bundle(dir.path()).is_err());
}
