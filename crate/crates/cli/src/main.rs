mod run;
mod script;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use nesy_core::agents::{CompletionBackend, RemoteBackend};
use nesy_core::binding::{self, BindingSpec};
use nesy_core::chat::ChatConfig;
use nesy_core::eval;
use nesy_core::graph::{self, InstanceSet};
use nesy_core::ilp::{self, ScoreTable, SolveOptions, Status, DEFAULT_NODE_LIMIT};
use nesy_core::rag::{Corpus, ExampleEntry, DEFAULT_K};
use nesy_core::report;
use nesy_core::workflow::{SessionState, WorkflowConfig, DEFAULT_ATTEMPT_LIMIT};
use nesy_service::{store, AppState, FileStore, DATA_DIR_ENV, TOKEN_ENV};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nesy", version, about = "Design and run constrained neuro-symbolic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a graph file; prints one diagnostic per line.
    Check { graph: PathBuf },
    /// Most probable labelling that satisfies every constraint.
    Infer {
        #[arg(long)]
        graph: PathBuf,
        /// JSON Lines records, bound through `--bindings`.
        #[arg(long, requires = "bindings")]
        data: Option<PathBuf>,
        #[arg(long)]
        bindings: Option<PathBuf>,
        /// Instance set JSON, instead of `--data`.
        #[arg(long, conflicts_with = "data")]
        instances: Option<PathBuf>,
        /// Score table JSON; overrides model scores for the rows it names.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
        node_limit: u64,
    },
    /// Example corpus used for retrieval.
    Rag {
        #[command(subcommand)]
        command: RagCommand,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, env = DATA_DIR_ENV, default_value = "nesy-data")]
        data_dir: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Scripted agent replies instead of a live model.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "gpt-5")]
        model: String,
    },
    /// Run one design session in the terminal.
    Run {
        #[arg(long, required_unless_present = "resume")]
        task: Option<String>,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        resume: Option<String>,
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
        /// Where to write the bundle and notebook.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long = "exclude")]
        exclude: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_ATTEMPT_LIMIT)]
        attempt_limit: u32,
        /// Approve every gate; needs `--mapping`.
        #[arg(long, requires = "mapping")]
        auto: bool,
        #[arg(long)]
        mapping: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, default_value = "gpt-5")]
        model: String,
    },
    /// Scripted graph-design evaluation over the corpus tasks.
    Eval {
        /// One of the recorded profiles, or `all`.
        #[arg(long, default_value = "gpt-5-low")]
        profile: String,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print runs as JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum RagCommand {
    /// Write the built-in examples into a corpus directory.
    Init {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Add an example file to a corpus directory.
    Add {
        #[arg(long)]
        corpus: PathBuf,
        entry: PathBuf,
    },
    Query {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long = "exclude")]
        exclude: Vec<String>,
        text: String,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_corpus(dir: Option<&Path>) -> anyhow::Result<Corpus> {
    Ok(match dir {
        Some(d) => Corpus::load_dir(d)?,
        None => Corpus::seed(),
    })
}

fn agent_backend(script: Option<&Path>, model: &str) -> anyhow::Result<Box<dyn CompletionBackend>> {
    Ok(match script {
        Some(path) => Box::new(script::load(path)?),
        None => Box::new(RemoteBackend::new(ChatConfig::from_env(model)?)),
    })
}

fn check(path: &Path) -> anyhow::Result<bool> {
    let source = read(path)?;
    let diags = match graph::parse(&source) {
        Ok(g) => graph::validate(&g),
        Err(d) => d,
    };
    for d in &diags {
        println!("{}", serde_json::to_string(d)?);
    }
    Ok(!graph::has_errors(&diags))
}

fn infer(
    graph_path: &Path,
    data: Option<&Path>,
    bindings: Option<&Path>,
    instances: Option<&Path>,
    scores: Option<&Path>,
    node_limit: u64,
) -> anyhow::Result<bool> {
    let source = read(graph_path)?;
    let g = match graph::parse(&source) {
        Ok(g) => g,
        Err(diags) => bail!("{} does not parse: {}", graph_path.display(), diags[0]),
    };
    let mut warnings = Vec::new();
    let (set, mut table) = match (data, instances) {
        (Some(data), _) => {
            let spec = BindingSpec::from_json(&read(bindings.expect("clap requires bindings"))?)?.with_graph_labels(&g);
            let records = binding::load_jsonl(&read(data)?)?;
            let set = binding::bind(&records, &spec, &g)?;
            let (table, w) = binding::predict_scores(&spec, &g, &set, None)?;
            warnings = w;
            (set, table)
        }
        (None, Some(path)) => {
            let set: InstanceSet = serde_json::from_str(&read(path)?).context("parsing instances")?;
            (set, ScoreTable::new())
        }
        (None, None) => bail!("give --data with --bindings, or --instances"),
    };
    if let Some(path) = scores {
        table.merge(ScoreTable::from_json(&read(path)?).context("parsing scores")?);
    }
    let result = ilp::infer(&g, &set, &table, SolveOptions { node_limit })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "status": result.status,
            "objective": result.objective,
            "choices": result.choices,
            "nodes": result.nodes,
            "warnings": warnings,
        }))?
    );
    Ok(result.status == Status::Optimal)
}

fn rag(command: RagCommand) -> anyhow::Result<()> {
    match command {
        RagCommand::Init { corpus } => {
            let n = Corpus::write_seed(&corpus)?;
            println!("{}", json!({"written": n}));
        }
        RagCommand::Add { corpus: dir, entry } => {
            let entry: ExampleEntry = serde_json::from_str(&read(&entry)?).context("parsing example")?;
            let mut corpus = Corpus::load_dir(&dir)?;
            let id = corpus.add(entry)?;
            Corpus::save_entry(&dir, corpus.get(&id).expect("just added"))?;
            println!("{}", json!({"added": id}));
        }
        RagCommand::Query { corpus, k, exclude, text } => {
            let corpus = load_corpus(corpus.as_deref())?;
            let exclude: BTreeSet<String> = exclude.into_iter().collect();
            for (e, sim) in corpus.retrieve(&text, k, &exclude)? {
                println!("{}", json!({"id": e.id, "similarity": sim}));
            }
        }
    }
    Ok(())
}

fn evaluate(profile: &str, samples: usize, jobs: usize, as_json: bool) -> anyhow::Result<bool> {
    let corpus = Corpus::seed();
    let profiles: Vec<&eval::Profile> = if profile == "all" {
        eval::PROFILES.iter().collect()
    } else {
        vec![eval::profile(profile).ok_or_else(|| eval::EvalError::UnknownProfile(profile.to_string()))?]
    };
    let mut all_match = true;
    for p in profiles {
        let runs = eval::evaluate(&corpus, p, samples, jobs)?;
        all_match &= runs.iter().all(eval::EvalRun::matches_target);
        if as_json {
            for r in &runs {
                println!("{}", serde_json::to_string(r)?);
            }
            continue;
        }
        for r in &runs {
            println!("task {:>2} {:<16} S{} {} {}", r.task, r.task_id, r.sample, r.stats, r.status);
        }
        println!();
        print!("{}", eval::summary_table(p.label, &runs));
        println!();
    }
    if !as_json {
        println!("Graph correctness rates and end-to-end error counts need live models and manual grading; they are not reproducible offline.");
        println!("Recorded manual grades, for reference:");
        print!("{}", report::correctness_table());
        let totals: Vec<String> =
            report::WORKFLOW.iter().map(|w| format!("{} {}", w.level, report::failures(w))).collect();
        println!("Recorded end-to-end failures over 60 runs: {}", totals.join(", "));
    }
    Ok(all_match)
}

fn serve(addr: &str, data_dir: &Path, corpus: Option<&Path>, script: Option<&Path>, model: &str) -> anyhow::Result<()> {
    let store = FileStore::open(data_dir)?;
    let backend: Arc<dyn CompletionBackend> = Arc::from(agent_backend(script, model)?);
    let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    let app = AppState::new(store, load_corpus(corpus)?, backend, token);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on {addr}");
    rt.block_on(nesy_service::serve(app, addr))?;
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Check { graph } => check(&graph),
        Command::Infer { graph, data, bindings, instances, scores, node_limit } => {
            infer(&graph, data.as_deref(), bindings.as_deref(), instances.as_deref(), scores.as_deref(), node_limit)
        }
        Command::Rag { command } => rag(command).map(|()| true),
        Command::Serve { addr, data_dir, corpus, script, model } => {
            serve(&addr, &data_dir, corpus.as_deref(), script.as_deref(), &model).map(|()| true)
        }
        Command::Eval { profile, samples, jobs, json } => evaluate(&profile, samples, jobs, json),
        Command::Run {
            task,
            script,
            resume,
            data_dir,
            out,
            corpus,
            exclude,
            attempt_limit,
            auto,
            mapping,
            dataset,
            model,
        } => {
            let corpus = load_corpus(corpus.as_deref())?;
            let store = data_dir.map(FileStore::open).transpose()?;
            let (state, store) = match (resume, store) {
                (Some(id), Some(fs)) => {
                    let (state, envelope) = fs.load(&id)?;
                    (state, Some((fs, envelope)))
                }
                (Some(_), None) => bail!("--resume needs --data-dir"),
                (None, store) => {
                    let config = WorkflowConfig {
                        graph_attempt_limit: attempt_limit,
                        exclusions: exclude.into_iter().collect(),
                        auto_approve: auto,
                        auto_mapping: mapping,
                        dataset,
                        ..WorkflowConfig::default()
                    };
                    let id = format!("run-{}-{}", store::now_secs(), std::process::id());
                    let state = SessionState::new(&id, task.as_deref().unwrap_or_default(), config);
                    let store = match store {
                        Some(fs) => {
                            let envelope = fs.create(&state, None)?;
                            Some((fs, envelope))
                        }
                        None => None,
                    };
                    (state, store)
                }
            };
            let backend: Box<dyn CompletionBackend> = match &script {
                Some(path) => {
                    // A resumed session already used the start of its script.
                    let scripted = script::load(path)?;
                    script::skip_consumed(&scripted, &state);
                    Box::new(scripted)
                }
                None => agent_backend(None, &model)?,
            };
            let summary = run::run(run::RunArgs { state, store, out }, backend.as_ref(), &corpus)?;
            println!("{summary}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({"error": format!("{e:#}")}));
            ExitCode::from(1)
        }
    }
}
