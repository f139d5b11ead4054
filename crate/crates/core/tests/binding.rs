mod common;

use nesy_core::binding::*;
use nesy_core::fixtures::*;
use nesy_core::graph::{self, ConceptGraph, Instance};
use nesy_core::ilp::{infer, SolveOptions, PROB_FLOOR};
use proptest::prelude::*;
use serde_json::json;

fn wiqa() -> (ConceptGraph, BindingSpec) {
    (graph::parse(WIQA_GRAPH).unwrap(), BindingSpec::from_json(WIQA_BINDING).unwrap())
}

fn records(text: &str) -> Vec<Record> {
    load_jsonl(text).unwrap()
}

#[test]
fn wiqa_records_bind_instances_edges_and_triples() {
    let (g, spec) = wiqa();
    let set = bind(&records(WIQA_RECORDS), &spec, &g).unwrap();
    let ids: Vec<&str> = set.instances.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, ["p1", "q1", "q2", "q3"]);
    assert_eq!(set.get("p1").unwrap().properties["text"], json!("Rain falls. Water soaks the soil. Plants absorb the water."));
    assert_eq!(set.edges.len(), 3);
    assert!(set.edges.iter().all(|e| e.parent == "p1" && e.relation == "paragraph_question"));
    assert_eq!(set.tuples.len(), 1);
    assert_eq!(set.tuples[0].members, ["q1", "q2", "q3"]);
    assert_eq!(set.tuples[0].owner.as_deref(), Some("p1"));
    // annotations go to the gold channel only
    assert_eq!(set.gold.len(), 3);
    assert!(set.instances.iter().all(|i| !i.properties.contains_key("answer")));
    // and the populated graph grounds
    assert_eq!(graph::ground(&g, &set).unwrap().formulas.len(), 1);
}

#[test]
fn empty_dataset_and_empty_lists() {
    let (g, spec) = wiqa();
    assert!(bind(&[], &spec, &g).unwrap().is_empty());
    let text = r#"{"id": "p9", "paragraph": "x", "questions": [], "triples": []}"#;
    let set = bind(&records(text), &spec, &g).unwrap();
    assert_eq!(set.instances.len(), 1);
    assert!(set.edges.is_empty() && set.tuples.is_empty());
}

#[test]
fn binding_errors_name_record_and_field() {
    let (g, spec) = wiqa();
    let missing = r#"{"id": "p1", "questions": [], "triples": []}"#;
    assert_eq!(
        bind(&records(missing), &spec, &g).unwrap_err(),
        BindingError::MissingField { record: "p1".into(), field: "paragraph".into() }
    );
    let not_list = r#"{"id": "p1", "paragraph": "x", "questions": "q", "triples": []}"#;
    assert!(matches!(bind(&records(not_list), &spec, &g).unwrap_err(), BindingError::TypeMismatch { .. }));
    let q = r#"[{"question": "a", "answer": 0}, {"question": "b", "answer": 1}, {"question": "c", "answer": "no_effect"}]"#;
    let short = format!(r#"{{"id": "p1", "paragraph": "x", "questions": {q}, "triples": [[0, 1]]}}"#);
    assert_eq!(
        bind(&records(&short), &spec, &g).unwrap_err(),
        BindingError::ArityMismatch { record: "p1".into(), relation: "transitivity".into(), expected: 3, found: 2 }
    );
    let far = format!(r#"{{"id": "p1", "paragraph": "x", "questions": {q}, "triples": [[0, 1, 3]]}}"#);
    assert!(matches!(bind(&records(&far), &spec, &g).unwrap_err(), BindingError::IndexOutOfRange { len: 3, .. }));
    let bad_label = r#"{"id": "p1", "paragraph": "x", "questions": [{"question": "a", "answer": "more"}], "triples": []}"#;
    assert!(matches!(bind(&records(bad_label), &spec, &g).unwrap_err(), BindingError::BadLabel { .. }));
    let dup = format!("{}{}", WIQA_RECORDS, WIQA_RECORDS);
    assert_eq!(bind(&records(&dup), &spec, &g).unwrap_err(), BindingError::DuplicateId("p1".into()));
    assert!(load_jsonl("{\"id\": 1}\n[1, 2]\n").is_err());
}

#[test]
fn generated_child_ids_and_index_gold() {
    let (g, spec) = wiqa();
    let text = r#"{"id": 7, "paragraph": "x", "questions": [{"question": "a", "answer": 0}, {"question": "b", "answer": 2}], "triples": []}"#;
    let set = bind(&records(text), &spec, &g).unwrap();
    let ids: Vec<&str> = set.instances.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, ["7", "7/questions/0", "7/questions/1"]);
    let gold: Vec<&str> = set.gold.iter().map(|g| g.label.as_str()).collect();
    assert_eq!(gold, ["is_more", "no_effect"]);
}

#[test]
fn conll_tokens_keep_sentence_order() {
    let g = graph::parse(IOB_GRAPH).unwrap();
    let spec = BindingSpec::from_json(CONLL_BINDING).unwrap();
    let set = bind(&records(CONLL_RECORDS), &spec, &g).unwrap();
    let words: Vec<&str> = set.of_concept("token").map(|t| t.properties["word"].as_str().unwrap()).collect();
    assert_eq!(words, ["John", "lives", "in", "New", "York"]);
    let edge_children: Vec<&str> = set.edges.iter().map(|e| e.child.as_str()).collect();
    assert_eq!(edge_children, ["s1/tokens/0", "s1/tokens/1", "s1/tokens/2", "s1/tokens/3", "s1/tokens/4"]);
    let tags: Vec<&str> = set.gold.iter().map(|g| g.label.as_str()).collect();
    assert_eq!(tags, ["B", "O", "O", "B", "I"]);
    assert!(set.get("s2").is_some());
}

#[test]
fn spec_validation() {
    let (g, spec) = wiqa();
    assert!(spec.validate(&g).is_ok());
    let mut bad = spec.clone();
    bad.properties[0].concept = "city".into();
    assert_eq!(bad.validate(&g).unwrap_err(), BindingError::UnknownConcept("city".into()));
    let mut bad = spec.clone();
    bad.edges[0].relation = "transitivity".into();
    assert!(matches!(bad.validate(&g).unwrap_err(), BindingError::Invalid(_)));
    let mut bad = spec.clone();
    bad.models.push(bad.models[0].clone());
    assert!(matches!(bad.validate(&g).unwrap_err(), BindingError::Invalid(_)));
    let mut bad = spec.clone();
    bad.models[0].model.template = "Answer for {answer}".into();
    assert!(matches!(bad.validate(&g).unwrap_err(), BindingError::UnresolvedPlaceholder { .. }));
    let mut bad = spec.clone();
    bad.models[0].model.labels = vec!["yes".into(), "no".into()];
    assert!(matches!(bad.validate(&g).unwrap_err(), BindingError::Invalid(_)));
    let round: BindingSpec = serde_json::from_str(&spec.to_json_pretty()).unwrap();
    assert_eq!(round, spec);
}

#[test]
fn mock_prediction_passes_scores_through() {
    let (_, spec) = wiqa();
    let config = spec.model_for("answer").unwrap();
    let inst = Instance { id: "q1".into(), concept: "question".into(), properties: Default::default() };
    let p = predict(config, &inst).unwrap();
    assert!((p.row["is_more"] - 0.5).abs() < 1e-8);
    assert!((p.row["is_less"] - 0.3).abs() < 1e-8);
    assert!((p.row["no_effect"] - 0.2).abs() < 1e-8);
    assert!(p.warning.is_none());
}

#[test]
fn gold_labels_never_reach_scores() {
    let (g, spec) = wiqa();
    let set = bind(&records(WIQA_RECORDS), &spec, &g).unwrap();
    let mut stripped = set.clone();
    stripped.gold.clear();
    let (with_gold, _) = predict_scores(&spec, &g, &set, None).unwrap();
    let (without, _) = predict_scores(&spec, &g, &stripped, None).unwrap();
    assert_eq!(with_gold, without);
    // the mock favours is_more less than gold would suggest; inference follows scores
    let result = infer(&g, &set, &with_gold, SolveOptions::default()).unwrap();
    assert!(result.is_optimal());
}

#[test]
fn remote_answers_become_one_hot_rows() {
    let (_, spec) = wiqa();
    let (url, bodies) = common::fake_chat_server(vec![
        "is_more".into(),
        "The answer is: less effect".into(),
        "I am not sure.".into(),
    ]);
    let mut config = spec.model_for("answer").unwrap().clone();
    config.mode = ModelMode::Remote;
    config.endpoint = Some(url);
    config.model = Some("test-model".into());
    let mut inst = Instance { id: "q1".into(), concept: "question".into(), properties: Default::default() };
    inst.properties.insert("text".into(), json!("Will more rain fall?"));

    let first = predict(&config, &inst).unwrap();
    let body = bodies.recv().unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("Will more rain fall?"));
    assert!((first.row["is_more"] - (1.0 - 2.0 * PROB_FLOOR)).abs() < 1e-15);
    assert_eq!(first.row["is_less"], PROB_FLOOR);

    let second = predict(&config, &inst).unwrap();
    assert!(second.row["is_less"] > 0.99);

    let third = predict(&config, &inst).unwrap();
    assert!(third.warning.is_some());
    assert!(third.row.values().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn remote_failure_is_an_error() {
    let (_, spec) = wiqa();
    let mut config = spec.model_for("answer").unwrap().clone();
    config.mode = ModelMode::Remote;
    // nothing listens on port 9 of localhost
    config.endpoint = Some("http://127.0.0.1:9/v1/chat/completions".into());
    config.timeout_secs = Some(2);
    let mut inst = Instance { id: "q1".into(), concept: "question".into(), properties: Default::default() };
    inst.properties.insert("text".into(), json!("x"));
    assert!(matches!(predict(&config, &inst).unwrap_err(), BindingError::Remote(_)));
    inst.properties.clear();
    assert!(matches!(predict(&config, &inst).unwrap_err(), BindingError::UnresolvedPlaceholder { .. }));
}

#[test]
fn template_placeholders() {
    assert_eq!(placeholders("Q: {text} / {ctx} {text} {not valid} {}"), ["text", "ctx"]);
    let mut inst = Instance { id: "i".into(), concept: "c".into(), properties: Default::default() };
    inst.properties.insert("text".into(), json!("hello"));
    inst.properties.insert("n".into(), json!(3));
    assert_eq!(render_prompt("{text} x{n} {{text}}", &inst).unwrap(), "hello x3 {hello}");
}

proptest! {
    #[test]
    fn predictions_are_floored_distributions(weights in proptest::collection::vec(0.0f64..100.0, 2..12), answer in ".{0,40}") {
        let labels: Vec<String> = (0..weights.len()).map(|i| format!("label_{i}")).collect();
        for row in [smoothed(&labels, &weights), prediction_from_answer(&labels, &answer, "i").row] {
            let sum: f64 = row.values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            prop_assert!(row.values().all(|p| *p >= PROB_FLOOR * (1.0 - 1e-9)));
        }
    }
}
