//! `ucca`: convert, restore, train, parse, evaluate, count and generate.
//!
//! Data goes to `--out` files; reports go to stdout as JSON. Failures print
//! `{"error": kind, "message": text}` on stderr and exit nonzero.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ucca_core::conversion::{graph_to_tree, tree_to_graph, tree_to_graph_lenient};
use ucca_core::corpus::{
    read_graphs, read_jsonl_file, read_trees, write_jsonl_file, FeatureLine, Sentence,
};
use ucca_core::evaluation::{score_corpus, F1Report};
use ucca_core::generator::{generate, SyntheticSpec};
use ucca_core::neural::{Checkpoint, TrainingSummary};
use ucca_core::par::Execution;
use ucca_core::pipeline::{parse_corpus, restore_with_remotes};
use ucca_core::stats::corpus_stats;
use ucca_core::train::{train, TrainConfig};
use ucca_core::UccaGraph;

#[derive(Parser)]
#[command(
    name = "ucca",
    version,
    about = "UCCA graph parsing through constituent trees"
)]
struct Cli {
    /// Process sentences one at a time instead of in parallel.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Sexpr,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Graph corpus (JSONL) to constituent trees, one per line.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "sexpr")]
        format: TreeFormat,
    },
    /// Trees (bracketed or JSON lines) back to graphs, optionally with
    /// remote edges predicted by a trained model.
    Restore {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        remotes_model: Option<PathBuf>,
        /// Accept trees that break the label grammar by dropping the
        /// offending annotations.
        #[arg(long)]
        lenient: bool,
    },
    /// Joint training; corpora given with repeated --train are merged.
    Train {
        #[arg(long = "train", required = true)]
        train: Vec<PathBuf>,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write one JSON line per epoch here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Tokenized sentences (JSONL) to graphs.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-token feature vectors, one JSON line per sentence.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Labeled F1 of predicted graphs against gold graphs.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Print a header and one tab-separated line instead of JSON.
        #[arg(long)]
        tsv: bool,
    },
    /// Distribution of discontinuity moves.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Print a tab-separated table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Seeded synthetic corpus.
    Gen {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// What gets reported on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<ucca_core::Error> for Failure {
    fn from(e: ucca_core::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Attach the file name to core errors.
fn at<T>(path: &Path, r: ucca_core::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure {
        kind: e.kind(),
        message: format!("{}: {e}", path.display()),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let file = at(path, File::open(path).map_err(Into::into))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure {
        kind: "json",
        message: format!("{}: {e}", path.display()),
    })
}

fn load_model(path: &Path) -> Outcome<ucca_core::neural::Model> {
    at(
        path,
        Checkpoint::load(path).and_then(Checkpoint::into_model),
    )
}

fn features(path: Option<&Path>, count: usize) -> Outcome<Option<Vec<Vec<Vec<f64>>>>> {
    let Some(path) = path else { return Ok(None) };
    let lines: Vec<FeatureLine> = at(path, read_jsonl_file(path))?;
    if lines.len() != count {
        return Err(Failure {
            kind: "shape_mismatch",
            message: format!(
                "{}: {} feature lines for {count} sentences",
                path.display(),
                lines.len()
            ),
        });
    }
    Ok(Some(lines.into_iter().map(|l| l.vectors).collect()))
}

/// Write a line to stdout. A closed pipe (`ucca ... | head`) is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print(value: serde_json::Value) {
    emit(&format!("{value:#}"));
}

fn report_json(r: &F1Report) -> serde_json::Value {
    serde_json::to_value(r).expect("reports serialize")
}

fn run(cli: Cli) -> Outcome<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Convert { input, out, format } => {
            let graphs = at(&input, read_graphs(&input))?;
            let results = exec.map(&graphs, graph_to_tree);
            let file = at(&out, File::create(&out).map_err(Into::into))?;
            let mut w = BufWriter::new(file);
            let (mut moves, mut lossy, mut dropped) = (0, 0, 0);
            for (i, r) in results.into_iter().enumerate() {
                let r = r.map_err(|e| Failure {
                    kind: e.kind(),
                    message: format!("{}: sentence {}: {e}", input.display(), i + 1),
                })?;
                moves += r.moves.len();
                lossy += r.lossy_moves;
                dropped += r.dropped_remote_edges.len();
                let line = match format {
                    TreeFormat::Sexpr => r.tree.to_sexpr(),
                    TreeFormat::Json => {
                        serde_json::to_string(&r.tree.to_json()).expect("trees serialize")
                    }
                };
                at(&out, writeln!(w, "{line}").map_err(Into::into))?;
            }
            at(&out, w.flush().map_err(Into::into))?;
            print(json!({
                "sentences": graphs.len(),
                "moves": moves,
                "lossy_moves": lossy,
                "dropped_remote_edges": dropped,
            }));
        }
        Command::Restore {
            input,
            out,
            remotes_model,
            lenient,
        } => {
            let file = at(&input, File::open(&input).map_err(Into::into))?;
            let trees = at(&input, read_trees(BufReader::new(file)))?;
            let model = remotes_model.as_deref().map(load_model).transpose()?;
            let graphs: Vec<ucca_core::Result<UccaGraph>> = exec.map(&trees, |t| match &model {
                Some(m) => restore_with_remotes(m, t, None),
                None if lenient => tree_to_graph_lenient(t).map(|(g, _)| g),
                None => tree_to_graph(t).map(|(g, _)| g),
            });
            let graphs = graphs
                .into_iter()
                .enumerate()
                .map(|(i, g)| {
                    g.map_err(|e| Failure {
                        kind: e.kind(),
                        message: format!("{}: line {}: {e}", input.display(), i + 1),
                    })
                })
                .collect::<Outcome<Vec<_>>>()?;
            at(&out, write_jsonl_file(&out, &graphs))?;
            let remotes: usize = graphs.iter().map(|g| g.remote_edges().count()).sum();
            print(json!({ "sentences": graphs.len(), "remote_edges": remotes }));
        }
        Command::Train {
            train: paths,
            dev,
            config,
            out,
            log,
        } => {
            let config: TrainConfig = match &config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            let mut corpus = Vec::new();
            for p in &paths {
                corpus.extend(at(p, read_graphs(p))?);
            }
            let dev_corpus = at(&dev, read_graphs(&dev))?;
            if config.model.multilingual {
                if let Some(i) = corpus
                    .iter()
                    .chain(&dev_corpus)
                    .position(|g| g.lang.is_empty())
                {
                    return Err(Failure {
                        kind: "config",
                        message: format!("multilingual training needs a language tag on every sentence (sentence {} has none)", i + 1),
                    });
                }
            }
            let mut log_file = match &log {
                Some(p) => Some(BufWriter::new(at(p, File::create(p).map_err(Into::into))?)),
                None => None,
            };
            let mut log_error = None;
            let outcome = train(&corpus, &dev_corpus, &config, exec, |entry| {
                if let Some(w) = log_file.as_mut() {
                    let line = serde_json::to_string(entry).expect("logs serialize");
                    if let Err(e) = writeln!(w, "{line}") {
                        log_error.get_or_insert(e);
                    }
                }
            })?;
            if let (Some(e), Some(p)) = (log_error, &log) {
                return Err(Failure {
                    kind: "io",
                    message: format!("{}: {e}", p.display()),
                });
            }
            if let (Some(mut w), Some(p)) = (log_file, &log) {
                at(p, w.flush().map_err(Into::into))?;
            }
            let summary = TrainingSummary {
                epoch: outcome.best_epoch,
                dev_f1: outcome.best_dev.averaged.f1,
            };
            at(
                &out,
                Checkpoint::from_model(&outcome.model, Some(summary)).save(&out),
            )?;
            print(json!({
                "train_sentences": corpus.len(),
                "dev_sentences": dev_corpus.len(),
                "epochs": outcome.log.len(),
                "best_epoch": outcome.best_epoch,
                "best_dev": report_json(&outcome.best_dev),
            }));
        }
        Command::Parse {
            model,
            input,
            out,
            features: feature_path,
        } => {
            let model = load_model(&model)?;
            let sentences: Vec<Sentence> = at(&input, read_jsonl_file(&input))?;
            let ext = features(feature_path.as_deref(), sentences.len())?;
            let graphs = at(
                &input,
                parse_corpus(&model, &sentences, ext.as_deref(), exec),
            )?;
            at(&out, write_jsonl_file(&out, &graphs))?;
            print(json!({ "sentences": graphs.len() }));
        }
        Command::Eval { gold, pred, tsv } => {
            let g = at(&gold, read_graphs(&gold))?;
            let p = at(&pred, read_graphs(&pred))?;
            let report = score_corpus(&g, &p, exec)?;
            if tsv {
                emit(F1Report::tsv_header());
                emit(&report.tsv());
            } else {
                print(report_json(&report));
            }
        }
        Command::Stats { input, table } => {
            let graphs = at(&input, read_graphs(&input))?;
            let report = corpus_stats(&graphs, exec)?;
            if table {
                emit(&report.table());
            } else {
                print(serde_json::to_value(&report).expect("stats serialize"));
            }
        }
        Command::Gen { spec, seed, out } => {
            let spec: SyntheticSpec = match &spec {
                Some(p) => read_json(p)?,
                None => SyntheticSpec::default(),
            };
            let corpus = generate(&spec, seed)?;
            at(&out, write_jsonl_file(&out, &corpus))?;
            let remotes: usize = corpus.iter().map(|g| g.remote_edges().count()).sum();
            print(json!({ "sentences": corpus.len(), "remote_edges": remotes, "seed": seed }));
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            emit(e.to_string().trim_end());
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f.kind, &f.message, 1),
    }
}
