//! `ghm` — train and query a hierarchical tag mixture over a geo-tree.
//!
//! Subcommands cover the whole pipeline: `ingest` raw geotagged records
//! into counts, `train` a model, query it (`classify`, `top-tags`,
//! `uniqueness`, `compare`), and run the synthetic benchmark (`simulate`,
//! `evaluate`). Every command that uses randomness takes `--seed` and is
//! byte-reproducible for a fixed seed; without the flag a seed is drawn
//! and logged.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
//! Errors are reported on stderr as one JSON object:
//! `{"error": "<Code>", "message": "..."}`.

mod files;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use ghm_core::corpus::{self, DefaultNormalizer, IngestConfig, RecordReader, RegionPolygons};
use ghm_core::eval::{run_eval, EvalConfig, Method};
use ghm_core::model;
use ghm_core::synth::{self, GenConfig};
use ghm_core::{EmConfig, Error, GeoTree, GhmModel, Vocabulary};

use files::{read_to_string, require_path, write_atomic, CountsDoc, VocabDoc};

#[derive(Debug)]
pub struct CliError {
    code: String,
    message: String,
    numerical: bool,
}

impl CliError {
    fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: "MalformedInput".into(),
            message: message.into(),
            numerical: false,
        }
    }

    fn unknown_path(path: &Path) -> CliError {
        CliError {
            code: "UnknownPath".into(),
            message: format!("no such file: {}", path.display()),
            numerical: false,
        }
    }

    fn exit_code(&self) -> i32 {
        if self.numerical {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError {
            code: e.code().to_owned(),
            numerical: e.is_numerical(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError {
            code: "Io".into(),
            message: e.to_string(),
            numerical: false,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError {
            code: "Json".into(),
            message: e.to_string(),
            numerical: false,
        }
    }
}

#[derive(Parser)]
#[command(name = "ghm", version, about = "Hierarchical tag mixture over a geo-tree")]
struct Cli {
    /// Seed for all randomness; drawn from entropy and logged when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log filter: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EmArgs {
    #[arg(long, default_value_t = EmConfig::default().max_iters)]
    max_iters: usize,
    /// Relative objective improvement that stops training.
    #[arg(long, default_value_t = EmConfig::default().tol)]
    tol: f64,
    /// Dirichlet pseudo-count per (node, tag).
    #[arg(long, default_value_t = EmConfig::default().alpha_smooth)]
    alpha_smooth: f64,
    /// Dirichlet pseudo-count per mixture component.
    #[arg(long, default_value_t = EmConfig::default().beta_smooth)]
    beta_smooth: f64,
}

impl EmArgs {
    fn config(&self, seed: u64) -> EmConfig {
        EmConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            alpha_smooth: self.alpha_smooth,
            beta_smooth: self.beta_smooth,
            seed,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Number of distinct synthetic tags.
    #[arg(long, default_value_t = GenConfig::default().vocab_size)]
    vocab_size: usize,
    /// Dirichlet concentration for node tag distributions.
    #[arg(long, default_value_t = GenConfig::default().alpha)]
    alpha: f64,
    /// Dirichlet concentration for leaf mixture weights.
    #[arg(long, default_value_t = GenConfig::default().beta)]
    beta: f64,
    /// Interval for the per-leaf instance-count order of magnitude.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"],
          default_values_t = [GenConfig::default().gamma.0, GenConfig::default().gamma.1])]
    gamma: Vec<f64>,
}

impl GenArgs {
    fn config(&self, seed: u64) -> GenConfig {
        GenConfig {
            vocab_size: self.vocab_size,
            alpha: self.alpha,
            beta: self.beta,
            gamma: (self.gamma[0], self.gamma[1]),
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Turn a JSON-lines record file into counts, vocabulary and stats.
    Ingest {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        /// GeoJSON FeatureCollection with a `leaf_id` property per feature.
        #[arg(long)]
        polygons: PathBuf,
        /// Plain text stoplist, one term per line.
        #[arg(long)]
        stoplist: Option<PathBuf>,
        #[arg(long, default_value_t = IngestConfig::default().min_accuracy)]
        min_accuracy: i32,
        /// Tags used by fewer distinct users are dropped.
        #[arg(long, default_value_t = IngestConfig::default().min_distinct_users)]
        min_users: u32,
        #[arg(long)]
        out_counts: PathBuf,
        #[arg(long)]
        out_vocab: PathBuf,
        #[arg(long)]
        out_stats: PathBuf,
    },
    /// Train a model from counts produced by `ingest` or `simulate`.
    Train {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Assign a tag observed in a leaf to the hierarchy level that most
    /// likely generated it.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        leaf: String,
    },
    /// The most probable tags of a leaf with their assigned levels.
    TopTags {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        leaf: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Leaf-level mixture weights; optionally annotate a GeoJSON file.
    Uniqueness {
        #[arg(long)]
        model: PathBuf,
        /// GeoJSON to copy with a `uniqueness` property per leaf feature.
        #[arg(long, requires = "out")]
        polygons: Option<PathBuf>,
        #[arg(long, requires = "polygons")]
        out: Option<PathBuf>,
    },
    /// Similarity of two leaves, or a full mapping between two leaf sets.
    Compare {
        #[arg(long)]
        model: PathBuf,
        /// Two leaf ids to compare directly.
        #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["from", "to"])]
        pair: Option<Vec<String>>,
        /// Comma-separated source leaves.
        #[arg(long, value_delimiter = ',', requires = "to")]
        from: Option<Vec<String>>,
        /// Comma-separated candidate leaves.
        #[arg(long, value_delimiter = ',', requires = "from")]
        to: Option<Vec<String>>,
        #[arg(short, default_value_t = 3)]
        k: usize,
        /// Shared tags listed per match.
        #[arg(long, default_value_t = 5)]
        common_tags: usize,
    },
    /// Generate a labeled synthetic corpus.
    Simulate {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        /// Corpus dump (JSON lines: header, then one triple per line).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_counts: Option<PathBuf>,
        #[arg(long)]
        out_vocab: Option<PathBuf>,
    },
    /// Repeated generate/split/train/score comparison of the methods.
    Evaluate {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0.10)]
        holdout: f64,
        /// Comma-separated subset of: random, nb, ht, ghm.
        #[arg(long, value_delimiter = ',', default_value = "random,nb,ht,ghm")]
        methods: Vec<String>,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long, default_value_t = EvalConfig::default().nb_smoothing)]
        nb_smoothing: f64,
        #[arg(long)]
        out_report: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    if let Some(threads) = cli.threads {
        ghm_core::init_thread_pool(threads);
    }
    let seed = cli.seed.unwrap_or_else(|| {
        let seed: u64 = rand::rng().random();
        log::info!("no --seed given; drew {seed}");
        seed
    });
    if let Err(e) = run(cli.command, seed) {
        eprintln!(
            "{}",
            serde_json::json!({ "error": e.code, "message": e.message })
        );
        std::process::exit(e.exit_code());
    }
}

fn load_tree(path: &Path) -> Result<Arc<GeoTree>, CliError> {
    Ok(Arc::new(GeoTree::from_json(&read_to_string(path)?)?))
}

fn load_model(path: &Path) -> Result<GhmModel, CliError> {
    Ok(GhmModel::from_json(&read_to_string(path)?)?)
}

fn run(command: Command, seed: u64) -> Result<(), CliError> {
    match command {
        Command::Ingest {
            records,
            tree,
            polygons,
            stoplist,
            min_accuracy,
            min_users,
            out_counts,
            out_vocab,
            out_stats,
        } => {
            require_path(&records)?;
            let tree = load_tree(&tree)?;
            let regions = RegionPolygons::from_geojson(&read_to_string(&polygons)?)?;
            let normalizer = match stoplist {
                Some(path) => DefaultNormalizer::from_stoplist_text(&read_to_string(&path)?),
                None => DefaultNormalizer::default(),
            };
            let cfg = IngestConfig {
                min_accuracy,
                min_distinct_users: min_users,
            };
            let reader = RecordReader::new(BufReader::new(File::open(&records)?));
            let (vocab, counts, stats) =
                corpus::ingest(reader, &tree, Some(&regions), &normalizer, &cfg)?;
            write_atomic(
                &out_counts,
                serde_json::to_string(&CountsDoc::new(&counts, &tree))?.as_bytes(),
            )?;
            write_atomic(
                &out_vocab,
                serde_json::to_string(&VocabDoc::new(&vocab))?.as_bytes(),
            )?;
            write_atomic(&out_stats, serde_json::to_string_pretty(&stats)?.as_bytes())?;
            println!("{}", serde_json::to_string(&stats)?);
            Ok(())
        }
        Command::Train {
            counts,
            vocab,
            tree,
            out_model,
            em,
        } => {
            let tree = load_tree(&tree)?;
            let counts: CountsDoc = serde_json::from_str(&read_to_string(&counts)?)?;
            let counts = counts.into_matrix(&tree)?;
            let vocab: VocabDoc = serde_json::from_str(&read_to_string(&vocab)?)?;
            let vocab = Arc::new(vocab.into_vocabulary()?);
            let model = model::train(&counts, &tree, &vocab, &em.config(seed))?;
            write_atomic(&out_model, model.to_json()?.as_bytes())?;
            println!(
                "{}",
                serde_json::json!({
                    "iterations": model.info().iterations,
                    "converged": model.info().converged,
                    "log_likelihood": model.info().log_likelihood,
                })
            );
            Ok(())
        }
        Command::Classify { model, tag, leaf } => {
            let model = load_model(&model)?;
            let tag_index = model.tag_index(&tag)?;
            let node = model.classify(tag_index, &leaf)?.clone();
            let posterior = model.posterior(tag_index, &leaf)?;
            println!(
                "{}",
                serde_json::json!({
                    "tag": tag,
                    "leaf": leaf,
                    "node": node.as_str(),
                    "level": posterior.best_level(),
                    "posterior": posterior.probs(),
                })
            );
            Ok(())
        }
        Command::TopTags { model, leaf, k } => {
            let model = load_model(&model)?;
            let top = model.top_tags(&leaf, k)?;
            println!("{}", serde_json::to_string_pretty(&top)?);
            Ok(())
        }
        Command::Uniqueness {
            model,
            polygons,
            out,
        } => {
            let model = load_model(&model)?;
            match (polygons, out) {
                (Some(polygons), Some(out)) => {
                    let mut doc: serde_json::Value =
                        serde_json::from_str(&read_to_string(&polygons)?)?;
                    let features = doc
                        .get_mut("features")
                        .and_then(serde_json::Value::as_array_mut)
                        .ok_or_else(|| {
                            CliError::input("expected a GeoJSON FeatureCollection".to_owned())
                        })?;
                    for feature in features {
                        let leaf = feature
                            .pointer("/properties/leaf_id")
                            .and_then(serde_json::Value::as_str)
                            .ok_or_else(|| {
                                CliError::input("feature without a `leaf_id` property".to_owned())
                            })?
                            .to_owned();
                        let value = model.uniqueness(&leaf)?;
                        feature["properties"]["uniqueness"] = serde_json::json!(value);
                    }
                    write_atomic(&out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
                }
                _ => {
                    let tree = model.tree();
                    let mut rows: Vec<(String, f64)> = (0..tree.num_leaves())
                        .map(|row| {
                            let id = tree.id(tree.leaf_node(row)).as_str().to_owned();
                            let value = model.uniqueness(&id)?;
                            Ok((id, value))
                        })
                        .collect::<Result<_, CliError>>()?;
                    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                    for (leaf, value) in rows {
                        println!("{value:.4}\t{leaf}");
                    }
                }
            }
            Ok(())
        }
        Command::Compare {
            model,
            pair,
            from,
            to,
            k,
            common_tags,
        } => {
            let model = load_model(&model)?;
            if let Some(pair) = pair {
                let sim = model.similarity(&pair[0], &pair[1])?;
                println!(
                    "{}",
                    serde_json::json!({ "a": pair[0], "b": pair[1], "similarity": sim })
                );
                return Ok(());
            }
            let (Some(from), Some(to)) = (from, to) else {
                return Err(CliError::input(
                    "pass either --pair A B or --from ... --to ...".to_owned(),
                ));
            };
            let from: Vec<&str> = from.iter().map(String::as_str).collect();
            let to: Vec<&str> = to.iter().map(String::as_str).collect();
            let mapping = model.map_regions(&from, &to, k, common_tags)?;
            println!("{}", serde_json::to_string_pretty(&mapping)?);
            Ok(())
        }
        Command::Simulate {
            tree,
            gen,
            out,
            out_counts,
            out_vocab,
        } => {
            let tree = load_tree(&tree)?;
            let cfg = gen.config(seed);
            let corpus = synth::generate(&tree, &cfg)?;
            let mut buf = BufWriter::new(Vec::new());
            synth::write_corpus(&corpus, &tree, &mut buf)?;
            let bytes = buf.into_inner().map_err(|e| CliError::input(e.to_string()))?;
            write_atomic(&out, &bytes)?;
            if let Some(path) = out_counts {
                write_atomic(
                    &path,
                    serde_json::to_string(&CountsDoc::new(&corpus.counts, &tree))?.as_bytes(),
                )?;
            }
            if let Some(path) = out_vocab {
                let vocab = Vocabulary::indexed(cfg.vocab_size);
                write_atomic(&path, serde_json::to_string(&VocabDoc::new(&vocab))?.as_bytes())?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "seed": seed,
                    "leaves": tree.num_leaves(),
                    "instances": corpus.total_instances(),
                    "distinct_cells": corpus.counts.nnz(),
                })
            );
            Ok(())
        }
        Command::Evaluate {
            tree,
            gen,
            trials,
            holdout,
            methods,
            em,
            nb_smoothing,
            out_report,
        } => {
            let tree = load_tree(&tree)?;
            let methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = EvalConfig {
                gen: gen.config(seed),
                trials,
                holdout,
                methods,
                em: em.config(seed),
                nb_smoothing,
                seed,
            };
            let report = run_eval(&tree, &cfg)?;
            write_atomic(&out_report, serde_json::to_string_pretty(&report)?.as_bytes())?;
            print!("{}", report.to_text_table());
            Ok(())
        }
    }
}
