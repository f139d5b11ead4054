//! Example store for in-context retrieval: prior programs keyed by task
//! description, ranked by TF-IDF cosine similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleEntry {
    pub id: String,
    pub description: String,
    pub graph: String,
    #[serde(default)]
    pub bindings: Value,
    #[serde(default)]
    pub prompts: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("an example with id `{0}` already exists")]
    DuplicateId(String),
    #[error("example `{id}` has an invalid graph: {message}")]
    InvalidGraph { id: String, message: String },
    #[error("example id must be non-empty and use only letters, digits, `-` and `_`: {0:?}")]
    BadId(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

const SEED: [&str; 12] = [
    include_str!("../corpus/01-news-hierarchy.json"),
    include_str!("../corpus/02-spam.json"),
    include_str!("../corpus/03-imdb.json"),
    include_str!("../corpus/04-propara.json"),
    include_str!("../corpus/05-wiqa.json"),
    include_str!("../corpus/06-beliefbank.json"),
    include_str!("../corpus/07-ruletaker.json"),
    include_str!("../corpus/08-cifar-hierarchy.json"),
    include_str!("../corpus/09-animals-flowers.json"),
    include_str!("../corpus/10-mnist-sum.json"),
    include_str!("../corpus/11-sudoku.json"),
    include_str!("../corpus/12-eight-queens.json"),
];

/// Lowercase word tokens plus adjacent-word bigrams.
pub fn terms(text: &str) -> Vec<String> {
    let words: Vec<String> =
        text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect();
    let mut out = words.clone();
    out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

fn counts(text: &str) -> HashMap<String, f64> {
    let mut tf = HashMap::new();
    for t in terms(text) {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

/// Weight for a term seen in `df` documents. It does not depend on corpus
/// size, so adding a document that shares no terms leaves every other
/// weight untouched.
pub fn idf(df: usize) -> f64 {
    (1.0 + 1.0 / df.max(1) as f64).ln()
}

fn cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    // `sum` of nothing is -0.0, which would sort below real zeros.
    let dot = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).fold(0.0, |acc, v| acc + v);
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    entries: Vec<ExampleEntry>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// The bundled twelve-program corpus.
    pub fn seed() -> Self {
        let mut c = Corpus::new();
        for text in SEED {
            let entry: ExampleEntry = serde_json::from_str(text).expect("seed entry is valid JSON");
            c.add(entry).expect("seed entry is valid");
        }
        c
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ExampleEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&ExampleEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn add(&mut self, entry: ExampleEntry) -> Result<String, RagError> {
        if entry.id.is_empty() || !entry.id.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '_') {
            return Err(RagError::BadId(entry.id));
        }
        if self.get(&entry.id).is_some() {
            return Err(RagError::DuplicateId(entry.id));
        }
        if let Err(diags) = graph::parse(&entry.graph) {
            let message = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
            return Err(RagError::InvalidGraph { id: entry.id, message });
        }
        let id = entry.id.clone();
        self.entries.push(entry);
        Ok(id)
    }

    /// Loads every `*.json` file of `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, RagError> {
        let io = |e: std::io::Error| RagError::Io { path: dir.display().to_string(), message: e.to_string() };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut c = Corpus::new();
        for p in paths {
            let fail = |message: String| RagError::Io { path: p.display().to_string(), message };
            let text = fs::read_to_string(&p).map_err(|e| fail(e.to_string()))?;
            let entry: ExampleEntry = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
            c.add(entry)?;
        }
        Ok(c)
    }

    /// Writes one `<id>.json` per entry (seed entries keep their numbered names).
    pub fn save_entry(dir: &Path, entry: &ExampleEntry) -> Result<(), RagError> {
        let path = dir.join(format!("{}.json", entry.id));
        let text = serde_json::to_string_pretty(entry).expect("entry serializes") + "\n";
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(&path, text))
            .map_err(|e| RagError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    /// Seed files under their bundled names.
    pub fn write_seed(dir: &Path) -> Result<usize, RagError> {
        let io = |e: std::io::Error| RagError::Io { path: dir.display().to_string(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(io)?;
        for (i, text) in SEED.iter().enumerate() {
            let entry: ExampleEntry = serde_json::from_str(text).expect("seed entry is valid JSON");
            fs::write(dir.join(format!("{:02}-{}.json", i + 1, entry.id)), text).map_err(io)?;
        }
        Ok(SEED.len())
    }

    fn document_frequencies<'a>(&'a self, base: &[&'a ExampleEntry]) -> HashMap<String, usize> {
        let mut df = HashMap::new();
        for e in base {
            let unique: BTreeSet<String> = terms(&e.description).into_iter().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        df
    }

    fn vector(text: &str, df: &HashMap<String, usize>) -> HashMap<String, f64> {
        counts(text).into_iter().map(|(t, tf)| {
            let w = tf * idf(df.get(&t).copied().unwrap_or(1));
            (t, w)
        }).collect()
    }

    /// Top `k` entries by similarity to `query`, skipping `exclude`.
    /// Excluded entries also leave the document-frequency statistics.
    pub fn retrieve(&self, query: &str, k: usize, exclude: &BTreeSet<String>) -> Result<Vec<(&ExampleEntry, f64)>, RagError> {
        if k == 0 {
            return Err(RagError::ZeroK);
        }
        let base: Vec<&ExampleEntry> = self.entries.iter().filter(|e| !exclude.contains(&e.id)).collect();
        let df = self.document_frequencies(&base);
        let q = Self::vector(query, &df);
        let mut scored: Vec<(&ExampleEntry, f64)> =
            base.iter().map(|e| (*e, cosine(&q, &Self::vector(&e.description, &df)))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Cosine similarity of two stored descriptions over the full corpus.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let all: Vec<&ExampleEntry> = self.entries.iter().collect();
        let df = self.document_frequencies(&all);
        let va = Self::vector(&self.get(a)?.description, &df);
        let vb = Self::vector(&self.get(b)?.description, &df);
        Some(cosine(&va, &vb))
    }
}
