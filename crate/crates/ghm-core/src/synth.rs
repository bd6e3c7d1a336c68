//! Seeded generator of labeled synthetic corpora.
//!
//! For every tree node a tag distribution is drawn from a symmetric
//! Dirichlet(alpha); for every leaf, mixture weights over its path levels
//! from a symmetric Dirichlet(beta). Each leaf then receives
//! `nu = floor(2 * 10^gamma)` tag instances, `gamma` uniform over a
//! configurable interval, each instance sampled by picking a level and then
//! a tag from that level's node. The generating level of every instance is
//! kept, so classification accuracy can be measured exactly.
//!
//! Instances are materialized as (leaf, level, tag) -> count triples rather
//! than rows; the per-level tag counts are drawn from the equivalent
//! multinomials directly, which keeps full-scale corpora (tens of millions
//! of instances) cheap. Corpora are bit-identical for a fixed seed: leaves
//! are generated from seeds derived up front, independent of scheduling.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::counts::CountMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geotree::GeoTree;

/// Generation hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of distinct tags.
    pub vocab_size: usize,
    /// Dirichlet concentration for node tag distributions (small favors
    /// sparse distributions).
    pub alpha: f64,
    /// Dirichlet concentration for leaf mixture weights.
    pub beta: f64,
    /// Interval the per-leaf order of magnitude is drawn from; a leaf gets
    /// `floor(2 * 10^gamma)` instances.
    pub gamma: (f64, f64),
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            vocab_size: 7936,
            alpha: 0.1,
            beta: 1.0,
            gamma: (3.0, 6.0),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::InvalidConfig("vocab_size must be >= 1".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidConfig("alpha and beta must be > 0".into()));
        }
        if !(self.gamma.0 >= 0.0) || !(self.gamma.1 >= self.gamma.0) {
            return Err(Error::InvalidConfig(
                "gamma interval must satisfy 0 <= lo <= hi".into(),
            ));
        }
        Ok(())
    }
}

/// One group of identical labeled instances: `count` occurrences of `tag`
/// in the leaf at row `leaf`, generated from 1-based path `level`
/// (1 = root).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub leaf: u32,
    pub tag: u32,
    pub level: u8,
    pub count: u32,
}

/// Generated counts plus the ground truth that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCorpus {
    pub config: GenConfig,
    /// Counts marginalized over levels; rows follow the tree's leaf rows.
    pub counts: CountMatrix,
    /// Sorted by (leaf, level, tag).
    pub triples: Vec<LabeledTriple>,
    /// Generating tag distribution per node.
    pub theta: Vec<Vec<f64>>,
    /// Generating level weights per leaf row, root first.
    pub mix: Vec<Vec<f64>>,
    /// Instances generated per leaf row.
    pub nu: Vec<u64>,
}

impl LabeledCorpus {
    pub fn total_instances(&self) -> u64 {
        self.nu.iter().sum()
    }
}

/// Expected total instance count for a tree/config pair, in closed form.
pub fn expected_instances(num_leaves: usize, cfg: &GenConfig) -> f64 {
    let (lo, hi) = cfg.gamma;
    let per_leaf = if hi > lo {
        2.0 * (10f64.powf(hi) - 10f64.powf(lo)) / ((hi - lo) * 10f64.ln())
    } else {
        2.0 * 10f64.powf(lo)
    };
    num_leaves as f64 * per_leaf
}

pub fn generate(tree: &GeoTree, cfg: &GenConfig) -> Result<LabeledCorpus> {
    generate_with(tree, cfg, Execution::default())
}

pub fn generate_with(tree: &GeoTree, cfg: &GenConfig, exec: Execution) -> Result<LabeledCorpus> {
    cfg.validate()?;
    let num_leaves = tree.num_leaves();
    let num_tags = cfg.vocab_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let theta: Vec<Vec<f64>> = (0..tree.num_nodes())
        .map(|_| sample_dirichlet(&mut rng, num_tags, cfg.alpha))
        .collect();
    let mix: Vec<Vec<f64>> = (0..num_leaves)
        .map(|row| sample_dirichlet(&mut rng, tree.path(row).len(), cfg.beta))
        .collect();
    let leaf_seeds: Vec<u64> = (0..num_leaves).map(|_| rng.random()).collect();

    // Cumulative tag distributions, shared by the low-count sampling path.
    let cdfs: Vec<Vec<f64>> = theta
        .iter()
        .map(|row| {
            let mut cum = 0.0;
            row.iter()
                .map(|&p| {
                    cum += p;
                    cum
                })
                .collect()
        })
        .collect();

    struct LeafGen {
        nu: u64,
        row: Vec<(u32, u32)>,
        triples: Vec<LabeledTriple>,
    }

    let per_leaf: Vec<LeafGen> = map_indexed(exec, num_leaves, |row| {
        let mut rng = ChaCha8Rng::seed_from_u64(leaf_seeds[row]);
        let (lo, hi) = cfg.gamma;
        let gamma: f64 = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let nu = (2.0 * 10f64.powf(gamma)).floor() as u64;
        let path = tree.path(row);

        let mut level_counts = vec![0u64; path.len()];
        multinomial(&mut rng, nu, &mix[row], |z, c| level_counts[z] = c);

        let mut triples = Vec::new();
        let mut dense: Vec<u32> = vec![0; num_tags];
        for (z, (&node, &m)) in path.iter().zip(&level_counts).enumerate() {
            if m == 0 {
                continue;
            }
            let before = triples.len();
            if m as usize * 4 >= num_tags {
                multinomial(&mut rng, m, &theta[node], |t, c| {
                    triples.push(LabeledTriple {
                        leaf: row as u32,
                        tag: t as u32,
                        level: (z + 1) as u8,
                        count: c as u32,
                    });
                });
            } else {
                // Few draws over a large vocabulary: invert the cdf per draw.
                let cdf = &cdfs[node];
                let total = *cdf.last().expect("vocab_size >= 1");
                let mut drawn: Vec<u32> = Vec::with_capacity(m as usize);
                for _ in 0..m {
                    let u: f64 = rng.random::<f64>() * total;
                    let t = cdf.partition_point(|&c| c <= u).min(num_tags - 1);
                    drawn.push(t as u32);
                }
                drawn.sort_unstable();
                let mut i = 0;
                while i < drawn.len() {
                    let t = drawn[i];
                    let mut c = 0u32;
                    while i < drawn.len() && drawn[i] == t {
                        c += 1;
                        i += 1;
                    }
                    triples.push(LabeledTriple {
                        leaf: row as u32,
                        tag: t,
                        level: (z + 1) as u8,
                        count: c,
                    });
                }
            }
            for t in &triples[before..] {
                dense[t.tag as usize] += t.count;
            }
        }
        let row_counts: Vec<(u32, u32)> = dense
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(t, &c)| (t as u32, c))
            .collect();
        LeafGen {
            nu,
            row: row_counts,
            triples,
        }
    });

    let mut triples = Vec::new();
    let mut rows = Vec::with_capacity(num_leaves);
    let mut nu = Vec::with_capacity(num_leaves);
    for leaf in per_leaf {
        triples.extend(leaf.triples);
        rows.push(leaf.row);
        nu.push(leaf.nu);
    }
    Ok(LabeledCorpus {
        config: cfg.clone(),
        counts: CountMatrix::from_rows(num_tags, rows)?,
        triples,
        theta,
        mix,
        nu,
    })
}

/// Normalized histogram of generating levels for the leaf, root first.
/// A leaf with no instances yields an all-zero vector.
pub fn empirical_label_distribution(
    corpus: &LabeledCorpus,
    tree: &GeoTree,
    leaf: &str,
) -> Result<Vec<f64>> {
    let row = tree
        .leaf_row(leaf)
        .map_err(|_| Error::UnknownLeaf(leaf.to_owned()))?;
    let levels = tree.path(row).len();
    let mut hist = vec![0u64; levels];
    for t in &corpus.triples {
        if t.leaf as usize == row {
            hist[t.level as usize - 1] += t.count as u64;
        }
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Ok(vec![0.0; levels]);
    }
    Ok(hist.iter().map(|&c| c as f64 / total as f64).collect())
}

fn sample_dirichlet(rng: &mut ChaCha8Rng, dim: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("validated concentration");
    let mut draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for d in &mut draws {
            *d /= sum;
        }
    } else {
        draws.fill(1.0 / dim as f64);
    }
    draws
}

/// Draws multinomial counts by a chain of binomials over suffix masses;
/// calls `out(index, count)` for every nonzero component in index order.
fn multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64], mut out: impl FnMut(usize, u64)) {
    let mut suffix: Vec<f64> = vec![0.0; probs.len()];
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate().rev() {
        acc += p;
        suffix[i] = acc;
    }
    let mut remaining = n;
    for i in 0..probs.len() {
        if remaining == 0 {
            break;
        }
        if i == probs.len() - 1 || suffix[i + 1] <= 0.0 {
            out(i, remaining);
            break;
        }
        let q = (probs[i] / suffix[i]).clamp(0.0, 1.0);
        let draw = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("q in [0, 1]")
                .sample(rng)
        };
        if draw > 0 {
            out(i, draw);
        }
        remaining -= draw;
    }
}

// ---------------------------------------------------------------------------
// Corpus dump: one JSON header line with the config, then one line per
// (leaf, tag, level) triple, sorted by leaf row, level, tag.

#[derive(Serialize, Deserialize)]
struct CorpusHeader {
    version: String,
    config: GenConfig,
}

#[derive(Serialize, Deserialize)]
struct TripleLine {
    leaf: String,
    tag: u32,
    level: u8,
    count: u32,
}

pub const CORPUS_VERSION: &str = "ghm-corpus/1";

pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, tree: &GeoTree, mut w: W) -> Result<()> {
    let header = CorpusHeader {
        version: CORPUS_VERSION.to_owned(),
        config: corpus.config.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in &corpus.triples {
        let line = TripleLine {
            leaf: tree.id(tree.leaf_node(t.leaf as usize)).as_str().to_owned(),
            tag: t.tag,
            level: t.level,
            count: t.count,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a corpus dump back into triples and marginal counts. The
/// generating parameters are not part of the dump.
pub fn read_corpus<R: BufRead>(
    r: R,
    tree: &GeoTree,
) -> Result<(GenConfig, Vec<LabeledTriple>, CountMatrix)> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::MalformedInput("empty corpus file".into()))??;
    let header: CorpusHeader = serde_json::from_str(&header_line)?;
    if header.version != CORPUS_VERSION {
        return Err(Error::MalformedInput(format!(
            "unsupported corpus version `{}`",
            header.version
        )));
    }
    let mut triples = Vec::new();
    let mut rows = vec![Vec::new(); tree.num_leaves()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TripleLine = serde_json::from_str(&line)?;
        let row = tree
            .leaf_row(&t.leaf)
            .map_err(|_| Error::UnknownLeaf(t.leaf.clone()))?;
        if t.tag as usize >= header.config.vocab_size {
            return Err(Error::UnknownTag(t.tag.to_string()));
        }
        triples.push(LabeledTriple {
            leaf: row as u32,
            tag: t.tag,
            level: t.level,
            count: t.count,
        });
        rows[row].push((t.tag, t.count));
    }
    let counts = CountMatrix::from_rows(header.config.vocab_size, rows)?;
    Ok((header.config, triples, counts))
}
