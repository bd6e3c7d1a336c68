//! Repeated generate/split/train/score runs comparing the classifiers.
//!
//! Every trial draws a fresh synthetic corpus, holds out a fraction of the
//! tag instances, trains each method on the rest and measures how often a
//! method assigns a held-out instance to its true generating level. Trials
//! run independently from per-trial derived seeds, so reports are
//! deterministic for a fixed seed and method set regardless of scheduling.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::baselines::{HtModel, NbModel};
use crate::counts::{CountMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geotree::GeoTree;
use crate::model::{train_with, EmConfig};
use crate::sampling::hypergeometric;
use crate::synth::{generate_with, GenConfig, LabeledCorpus, LabeledTriple};

/// Classifiers the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Uniform guess over the leaf's path levels.
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "ht")]
    HierTfIdf,
    #[serde(rename = "ghm")]
    Ghm,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Random,
        Method::NaiveBayes,
        Method::HierTfIdf,
        Method::Ghm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::NaiveBayes => "nb",
            Method::HierTfIdf => "ht",
            Method::Ghm => "ghm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "random" => Ok(Method::Random),
            "nb" => Ok(Method::NaiveBayes),
            "ht" => Ok(Method::HierTfIdf),
            "ghm" => Ok(Method::Ghm),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}`; expected random, nb, ht or ghm"
            ))),
        }
    }
}

/// Harness configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub gen: GenConfig,
    pub trials: usize,
    /// Fraction of tag instances held out for testing.
    pub holdout: f64,
    pub methods: Vec<Method>,
    pub em: EmConfig,
    /// Additive smoothing for the naive Bayes baseline. Deliberately much
    /// heavier than the mixture model's pseudo-counts: raw per-node
    /// frequencies assign frequent shared tags to the leaf, and NB has no
    /// mixture to absorb that.
    pub nb_smoothing: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gen: GenConfig::default(),
            trials: 50,
            holdout: 0.10,
            methods: Method::ALL.to_vec(),
            em: EmConfig::default(),
            nb_smoothing: 10.0,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.em.validate()?;
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::InvalidFraction(self.holdout));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if !(self.nb_smoothing > 0.0) {
            return Err(Error::InvalidConfig("nb_smoothing must be > 0".into()));
        }
        Ok(())
    }
}

/// Held-out labeled instances.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub triples: Vec<LabeledTriple>,
    pub total: u64,
}

/// Splits a labeled corpus at tag-instance granularity: exactly
/// `round(total * fraction)` instances go to the test side, drawn uniformly
/// without replacement. A triple with count `c` can contribute to both
/// sides. Training counts drop the level labels; the test set keeps them.
pub fn split(corpus: &LabeledCorpus, fraction: f64, seed: u64) -> Result<(CountMatrix, TestSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let total = corpus.total_instances();
    let target = (total as f64 * fraction).round() as u64;
    if target == 0 {
        return Err(Error::EmptyTestSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining_total = total;
    let mut remaining_take = target;
    let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); corpus.counts.num_rows()];
    let mut test = Vec::new();
    for t in &corpus.triples {
        let c = t.count as u64;
        let take = if remaining_take == 0 {
            0
        } else if remaining_take >= remaining_total {
            c
        } else {
            hypergeometric(&mut rng, remaining_total, c, remaining_take)
        };
        remaining_total -= c;
        remaining_take -= take;
        if take > 0 {
            test.push(LabeledTriple {
                count: take as u32,
                ..*t
            });
        }
        if c > take {
            rows[t.leaf as usize].push((t.tag, (c - take) as u32));
        }
    }
    let train = CountMatrix::from_rows(corpus.counts.num_tags(), rows)?;
    Ok((
        train,
        TestSet {
            triples: test,
            total: target,
        },
    ))
}

/// Per-method aggregate over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_trial: Vec<f64>,
    pub avg_train_secs: f64,
    pub avg_classify_secs: f64,
}

/// Full harness output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub methods: Vec<MethodReport>,
    pub elapsed_secs: f64,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Aligned plain-text table of per-method accuracy.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Classification accuracy over {} generated datasets\n",
            self.config.trials
        ));
        out.push_str("method   accuracy (std)\n");
        out.push_str("------   --------------\n");
        for r in &self.methods {
            out.push_str(&format!(
                "{:<8} {:.3} ({:.3})\n",
                r.method.name(),
                r.mean_accuracy,
                r.std_accuracy
            ));
        }
        out
    }
}

struct TrialOutcome {
    accuracy: Vec<f64>,
    train_secs: Vec<f64>,
    classify_secs: Vec<f64>,
}

pub fn run_eval(tree: &Arc<GeoTree>, cfg: &EvalConfig) -> Result<EvalReport> {
    run_eval_with(tree, cfg, Execution::default())
}

/// Runs the harness with an explicit execution strategy (trials are the
/// parallel unit; everything inside a trial is sequential).
pub fn run_eval_with(tree: &Arc<GeoTree>, cfg: &EvalConfig, exec: Execution) -> Result<EvalReport> {
    cfg.validate()?;
    let vocab = Arc::new(Vocabulary::indexed(cfg.gen.vocab_size));
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trial_seeds: Vec<[u64; 4]> = (0..cfg.trials)
        .map(|_| [master.random(), master.random(), master.random(), master.random()])
        .collect();

    let start = Instant::now();
    let outcomes: Vec<Result<TrialOutcome>> = map_indexed(exec, cfg.trials, |trial| {
        run_trial(tree, &vocab, cfg, trial_seeds[trial])
    });
    let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let per_trial: Vec<f64> = outcomes.iter().map(|o| o.accuracy[mi]).collect();
            let mean = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
            let var = if per_trial.len() > 1 {
                per_trial.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
                    / (per_trial.len() - 1) as f64
            } else {
                0.0
            };
            MethodReport {
                method,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                avg_train_secs: outcomes.iter().map(|o| o.train_secs[mi]).sum::<f64>()
                    / outcomes.len() as f64,
                avg_classify_secs: outcomes.iter().map(|o| o.classify_secs[mi]).sum::<f64>()
                    / outcomes.len() as f64,
                per_trial,
            }
        })
        .collect();

    Ok(EvalReport {
        config: cfg.clone(),
        methods,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_trial(
    tree: &Arc<GeoTree>,
    vocab: &Arc<Vocabulary>,
    cfg: &EvalConfig,
    seeds: [u64; 4],
) -> Result<TrialOutcome> {
    let gen_cfg = GenConfig {
        seed: seeds[0],
        ..cfg.gen.clone()
    };
    let corpus = generate_with(tree, &gen_cfg, Execution::Sequential)?;
    let (train_counts, test) = split(&corpus, cfg.holdout, seeds[1])?;
    // Group held-out instances by (leaf, tag) so each pair is classified
    // exactly once.
    let mut test_triples = test.triples;
    test_triples.sort_unstable_by_key(|t| (t.leaf, t.tag, t.level));

    let mut accuracy = Vec::with_capacity(cfg.methods.len());
    let mut train_secs = Vec::with_capacity(cfg.methods.len());
    let mut classify_secs = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let t_train = Instant::now();
        let (correct, total, train_elapsed) = match method {
            Method::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds[3]);
                let mut correct = 0u64;
                let mut total = 0u64;
                for t in &test_triples {
                    let levels = tree.path(t.leaf as usize).len() as u64;
                    // Each instance independently guesses uniformly; the
                    // number of hits among `count` guesses is binomial.
                    let hits = Binomial::new(t.count as u64, 1.0 / levels as f64)
                        .expect("probability in range")
                        .sample(&mut rng);
                    correct += hits;
                    total += t.count as u64;
                }
                (correct, total, t_train.elapsed().as_secs_f64())
            }
            Method::NaiveBayes => {
                let nb = NbModel::train(&train_counts, tree, vocab, cfg.nb_smoothing)?;
                let train_elapsed = t_train.elapsed().as_secs_f64();
                let (c, n) = score(&test_triples, |tag, row| nb.classify_level(tag, row));
                (c, n, train_elapsed)
            }
            Method::HierTfIdf => {
                let ht = HtModel::train(&train_counts, tree, vocab)?;
                let train_elapsed = t_train.elapsed().as_secs_f64();
                let (c, n) = score(&test_triples, |tag, row| ht.classify_level(tag, row));
                (c, n, train_elapsed)
            }
            Method::Ghm => {
                let em = EmConfig {
                    seed: seeds[2],
                    ..cfg.em.clone()
                };
                let model = train_with(&train_counts, tree, vocab, &em, Execution::Sequential)?;
                let train_elapsed = t_train.elapsed().as_secs_f64();
                let (c, n) = score(&test_triples, |tag, row| model.classify_level(tag, row));
                (c, n, train_elapsed)
            }
        };
        accuracy.push(correct as f64 / total.max(1) as f64);
        train_secs.push(train_elapsed);
        classify_secs.push(t_train.elapsed().as_secs_f64() - train_elapsed);
    }
    Ok(TrialOutcome {
        accuracy,
        train_secs,
        classify_secs,
    })
}

/// Scores grouped (leaf, tag) runs of a sorted triple list against a
/// classifier.
fn score(sorted: &[LabeledTriple], classify: impl Fn(u32, usize) -> usize) -> (u64, u64) {
    let mut correct = 0u64;
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let (leaf, tag) = (sorted[i].leaf, sorted[i].tag);
        let predicted = classify(tag, leaf as usize);
        while i < sorted.len() && sorted[i].leaf == leaf && sorted[i].tag == tag {
            if sorted[i].level as usize == predicted {
                correct += sorted[i].count as u64;
            }
            total += sorted[i].count as u64;
            i += 1;
        }
    }
    (correct, total)
}
