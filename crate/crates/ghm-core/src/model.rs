//! The hierarchical mixture model and its EM trainer.
//!
//! Each tree node `v` carries a multinomial `theta_v` over tags; each leaf
//! `n` carries mixture weights `pi_n` over the nodes of its root path. A tag
//! observed in leaf `n` is explained as: pick a path node with probability
//! `pi_n(v)`, then pick the tag with probability `theta_v(t)`, so
//!
//! ```text
//! p(t | n) = sum over v in path(n) of theta_v(t) * pi_n(v)
//! ```
//!
//! Training maximizes the smoothed (MAP) objective
//!
//! ```text
//! J = sum_{n,t} x_nt * ln p(t|n)
//!   + alpha * sum_{v,t} ln theta_v(t) + beta * sum_{n,v} ln pi_n(v)
//! ```
//!
//! by EM with pseudo-count updates. `J` is the quantity each iteration
//! provably does not decrease; it is what the trace records and what the
//! convergence test watches. The unpenalized data term is available
//! separately through [`GhmModel::log_likelihood`].
//!
//! The likelihood alone cannot decide how much of a leaf's data its own
//! component should explain (a leaf component can absorb any amount of its
//! ancestors' distributions), so attribution comes from the training
//! schedule: mixture weights start root-heavy, halving per level, which
//! routes shared tags to shared nodes first and leaves the leaf component
//! to pick up what the upper levels cannot explain.
//!
//! Levels are numbered from the root: level 1 is the root, level
//! `path_len` the leaf itself. The leaf-level mixture weight is the
//! region's uniqueness score.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counts::{CountMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geotree::{GeoTree, NodeId, NodeSpec};

/// EM training knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Hard cap on EM update steps.
    pub max_iters: usize,
    /// Relative objective improvement below which training stops.
    pub tol: f64,
    /// Dirichlet pseudo-count added to every tag of every node distribution.
    pub alpha_smooth: f64,
    /// Dirichlet pseudo-count added to every mixture component.
    pub beta_smooth: f64,
    /// Seed for the multiplicative initialization perturbation.
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 200,
            tol: 1e-6,
            alpha_smooth: 0.7,
            beta_smooth: 0.1,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be > 0".into()));
        }
        if !(self.alpha_smooth > 0.0) || !(self.beta_smooth > 0.0) {
            return Err(Error::InvalidConfig("pseudo-counts must be > 0".into()));
        }
        Ok(())
    }
}

/// What happened during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    /// Number of EM update steps applied.
    pub iterations: usize,
    pub converged: bool,
    /// Smoothed objective after 0, 1, ... update steps (non-decreasing).
    pub objective_trace: Vec<f64>,
    /// Unpenalized data log-likelihood of the final parameters.
    pub log_likelihood: f64,
}

/// Trained model. Immutable; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct GhmModel {
    tree: Arc<GeoTree>,
    vocab: Arc<Vocabulary>,
    /// Per node, a strictly positive distribution over tags.
    theta: Vec<Vec<f64>>,
    /// Per leaf row, mixture weights over its path, root first.
    pi: Vec<Vec<f64>>,
    config: EmConfig,
    info: TrainingInfo,
}

/// Posterior over the levels of a leaf's root path for one (tag, leaf)
/// pair. Index 0 is the root, the last index the leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPosterior {
    probs: Vec<f64>,
}

impl LevelPosterior {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// 1-based level with maximal posterior; ties go to the deepest level.
    pub fn best_level(&self) -> usize {
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (i, &p) in self.probs.iter().enumerate() {
            if p >= best_p {
                best_p = p;
                best = i;
            }
        }
        best + 1
    }
}

/// One entry of a ranked tag list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopTag {
    pub tag: u32,
    pub term: String,
    pub probability: f64,
    /// 1-based level the tag is assigned to (1 = root).
    pub level: usize,
    pub node: NodeId,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommonTag {
    pub term: String,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchedRegion {
    pub to: NodeId,
    pub similarity: f64,
    pub common_tags: Vec<CommonTag>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionMatch {
    pub from: NodeId,
    pub matches: Vec<MatchedRegion>,
}

/// Pools each leaf row's counts into every node on its path.
pub(crate) fn aggregate_node_counts(counts: &CountMatrix, tree: &GeoTree) -> Vec<Vec<f64>> {
    let mut agg = vec![vec![0.0f64; counts.num_tags()]; tree.num_nodes()];
    for row in 0..counts.num_rows() {
        for &node in tree.path(row) {
            for &(t, c) in counts.row(row) {
                agg[node][t as usize] += c as f64;
            }
        }
    }
    agg
}

/// Trains a model with the default execution strategy.
pub fn train(
    counts: &CountMatrix,
    tree: &Arc<GeoTree>,
    vocab: &Arc<Vocabulary>,
    cfg: &EmConfig,
) -> Result<GhmModel> {
    train_with(counts, tree, vocab, cfg, Execution::default())
}

struct LeafStats {
    /// Per path level, responsibility-weighted counts over all tags.
    contrib: Vec<Vec<f64>>,
    /// Per path level, total responsibility-weighted count.
    pi_acc: Vec<f64>,
    data_ll: f64,
}

/// Trains a model with an explicit execution strategy. For a fixed seed the
/// result is bit-identical across strategies and thread counts.
pub fn train_with(
    counts: &CountMatrix,
    tree: &Arc<GeoTree>,
    vocab: &Arc<Vocabulary>,
    cfg: &EmConfig,
    exec: Execution,
) -> Result<GhmModel> {
    cfg.validate()?;
    let num_leaves = tree.num_leaves();
    let num_tags = counts.num_tags();
    if counts.num_rows() != num_leaves {
        return Err(Error::LeafSetMismatch(format!(
            "counts have {} rows, tree has {} leaves",
            counts.num_rows(),
            num_leaves
        )));
    }
    if vocab.len() != num_tags {
        return Err(Error::VocabularyMismatch(format!(
            "vocabulary has {} terms, counts have {} tags",
            vocab.len(),
            num_tags
        )));
    }
    if num_tags == 0 || counts.total() == 0 {
        return Err(Error::EmptyCounts);
    }

    let mut theta = init_theta(counts, tree, cfg);
    let mut pi: Vec<Vec<f64>> = (0..num_leaves)
        .map(|row| init_pi(tree.path(row).len()))
        .collect();
    let row_totals: Vec<f64> = (0..num_leaves).map(|r| counts.row_total(r) as f64).collect();

    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;
    let data_ll;

    loop {
        let stats = e_step(exec, counts, tree, &theta, &pi);
        let step_ll: f64 = stats.iter().map(|s| s.data_ll).sum();
        let objective = step_ll + prior_term(&theta, &pi, cfg);
        if !objective.is_finite() {
            return Err(Error::NonFiniteLikelihood(iterations));
        }
        trace.push(objective);
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            let rel = (objective - prev) / prev.abs().max(f64::MIN_POSITIVE);
            if rel < cfg.tol {
                converged = true;
                data_ll = step_ll;
                break;
            }
        }
        if iterations == cfg.max_iters {
            data_ll = step_ll;
            break;
        }
        m_step(&mut theta, &mut pi, &stats, &row_totals, tree, cfg);
        iterations += 1;
    }
    log::debug!(
        "EM finished after {iterations} iterations (converged: {converged}, objective: {:.6})",
        trace.last().copied().unwrap_or(f64::NAN)
    );

    Ok(GhmModel {
        tree: Arc::clone(tree),
        vocab: Arc::clone(vocab),
        theta,
        pi,
        config: cfg.clone(),
        info: TrainingInfo {
            iterations,
            converged,
            objective_trace: trace,
            log_likelihood: data_ll,
        },
    })
}

/// Initial mixture weights: each level carries half its parent's weight
/// (root-heavy), so shared tags are attributed upward before the leaf
/// component claims anything.
fn init_pi(levels: usize) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..levels).map(|z| (1u64 << (levels - 1 - z)) as f64).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

fn init_theta(counts: &CountMatrix, tree: &GeoTree, cfg: &EmConfig) -> Vec<Vec<f64>> {
    let num_tags = counts.num_tags();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = aggregate_node_counts(counts, tree);
    for row in theta.iter_mut() {
        let total: f64 = row.iter().sum();
        let denom = total + num_tags as f64 * cfg.alpha_smooth;
        let mut sum = 0.0;
        for value in row.iter_mut() {
            let u: f64 = rng.random_range(-0.01..=0.01);
            *value = (*value + cfg.alpha_smooth) / denom * (1.0 + u);
            sum += *value;
        }
        for value in row.iter_mut() {
            *value /= sum;
        }
    }
    theta
}

fn e_step(
    exec: Execution,
    counts: &CountMatrix,
    tree: &GeoTree,
    theta: &[Vec<f64>],
    pi: &[Vec<f64>],
) -> Vec<LeafStats> {
    let num_tags = counts.num_tags();
    map_indexed(exec, counts.num_rows(), |row| {
        let path = tree.path(row);
        let levels = path.len();
        let pi_n = &pi[row];
        let mut contrib = vec![vec![0.0f64; num_tags]; levels];
        let mut pi_acc = vec![0.0f64; levels];
        let mut data_ll = 0.0;
        for &(t, x) in counts.row(row) {
            let ti = t as usize;
            let x = x as f64;
            let mut denom = 0.0;
            for z in 0..levels {
                denom += theta[path[z]][ti] * pi_n[z];
            }
            data_ll += x * denom.ln();
            let scale = x / denom;
            for z in 0..levels {
                let w = theta[path[z]][ti] * pi_n[z] * scale;
                contrib[z][ti] += w;
                pi_acc[z] += w;
            }
        }
        LeafStats {
            contrib,
            pi_acc,
            data_ll,
        }
    })
}

fn m_step(
    theta: &mut [Vec<f64>],
    pi: &mut [Vec<f64>],
    stats: &[LeafStats],
    row_totals: &[f64],
    tree: &GeoTree,
    cfg: &EmConfig,
) {
    let num_tags = theta[0].len();
    let mut acc = vec![vec![0.0f64; num_tags]; theta.len()];
    // Merge leaf partials in row order: the reduction order is fixed, so the
    // result does not depend on how the E-step was scheduled.
    for (row, s) in stats.iter().enumerate() {
        let path = tree.path(row);
        for (z, &node) in path.iter().enumerate() {
            let dst = &mut acc[node];
            for (d, &c) in dst.iter_mut().zip(&s.contrib[z]) {
                *d += c;
            }
        }
        let levels = path.len() as f64;
        let denom = row_totals[row] + levels * cfg.beta_smooth;
        for (z, p) in pi[row].iter_mut().enumerate() {
            *p = (s.pi_acc[z] + cfg.beta_smooth) / denom;
        }
    }
    for (node, row) in theta.iter_mut().enumerate() {
        let total: f64 = acc[node].iter().sum();
        let denom = total + num_tags as f64 * cfg.alpha_smooth;
        for (t, value) in row.iter_mut().enumerate() {
            *value = (acc[node][t] + cfg.alpha_smooth) / denom;
        }
    }
}

fn prior_term(theta: &[Vec<f64>], pi: &[Vec<f64>], cfg: &EmConfig) -> f64 {
    let theta_ln: f64 = theta
        .iter()
        .map(|row| row.iter().map(|&v| v.ln()).sum::<f64>())
        .sum();
    let pi_ln: f64 = pi
        .iter()
        .map(|row| row.iter().map(|&v| v.ln()).sum::<f64>())
        .sum();
    cfg.alpha_smooth * theta_ln + cfg.beta_smooth * pi_ln
}

impl GhmModel {
    /// Assembles a model from explicit parameters, validating the
    /// normalization invariants.
    pub fn from_parts(
        tree: Arc<GeoTree>,
        vocab: Arc<Vocabulary>,
        theta: Vec<Vec<f64>>,
        pi: Vec<Vec<f64>>,
        config: EmConfig,
    ) -> Result<GhmModel> {
        validate_params(&tree, vocab.len(), &theta, &pi)?;
        Ok(GhmModel {
            tree,
            vocab,
            theta,
            pi,
            config,
            info: TrainingInfo {
                iterations: 0,
                converged: false,
                objective_trace: Vec::new(),
                log_likelihood: f64::NAN,
            },
        })
    }

    pub fn tree(&self) -> &GeoTree {
        &self.tree
    }

    pub fn tree_arc(&self) -> Arc<GeoTree> {
        Arc::clone(&self.tree)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_tags(&self) -> usize {
        self.vocab.len()
    }

    pub fn config(&self) -> &EmConfig {
        &self.config
    }

    pub fn info(&self) -> &TrainingInfo {
        &self.info
    }

    /// Tag distribution of a node.
    pub fn theta(&self, node: usize) -> &[f64] {
        &self.theta[node]
    }

    /// Mixture weights of the leaf at `row`, root first.
    pub fn pi(&self, row: usize) -> &[f64] {
        &self.pi[row]
    }

    fn leaf_row_checked(&self, leaf: &str) -> Result<usize> {
        self.tree
            .leaf_row(leaf)
            .map_err(|_| Error::UnknownLeaf(leaf.to_owned()))
    }

    fn tag_checked(&self, tag: u32) -> Result<usize> {
        if (tag as usize) < self.num_tags() {
            Ok(tag as usize)
        } else {
            Err(Error::UnknownTag(tag.to_string()))
        }
    }

    /// Index of a tag term.
    pub fn tag_index(&self, term: &str) -> Result<u32> {
        self.vocab
            .index(term)
            .ok_or_else(|| Error::UnknownTag(term.to_owned()))
    }

    /// Mixture probability of observing `tag` in `leaf`.
    pub fn tag_probability(&self, tag: u32, leaf: &str) -> Result<f64> {
        let row = self.leaf_row_checked(leaf)?;
        let ti = self.tag_checked(tag)?;
        Ok(self.mixture_probability(row, ti))
    }

    fn mixture_probability(&self, row: usize, ti: usize) -> f64 {
        self.tree
            .path(row)
            .iter()
            .zip(&self.pi[row])
            .map(|(&node, &w)| self.theta[node][ti] * w)
            .sum()
    }

    /// Posterior over the path levels given that `tag` was observed in
    /// `leaf`.
    pub fn posterior(&self, tag: u32, leaf: &str) -> Result<LevelPosterior> {
        let row = self.leaf_row_checked(leaf)?;
        let ti = self.tag_checked(tag)?;
        Ok(self.posterior_for_row(ti, row))
    }

    fn posterior_for_row(&self, ti: usize, row: usize) -> LevelPosterior {
        let path = self.tree.path(row);
        let mut probs: Vec<f64> = path
            .iter()
            .zip(&self.pi[row])
            .map(|(&node, &w)| self.theta[node][ti] * w)
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        LevelPosterior { probs }
    }

    /// Most likely 1-based level for `tag` observed in the leaf at `row`;
    /// ties go to the deeper (more specific) level.
    pub fn classify_level(&self, tag: u32, row: usize) -> usize {
        self.posterior_for_row(tag as usize, row).best_level()
    }

    /// Node of the leaf's path that most likely generated `tag`.
    pub fn classify(&self, tag: u32, leaf: &str) -> Result<&NodeId> {
        let row = self.leaf_row_checked(leaf)?;
        let ti = self.tag_checked(tag)?;
        let level = self.posterior_for_row(ti, row).best_level();
        Ok(self.tree.id(self.tree.path(row)[level - 1]))
    }

    /// The `k` most probable tags of a leaf, each annotated with its
    /// assigned level. Ties are broken by tag index.
    pub fn top_tags(&self, leaf: &str, k: usize) -> Result<Vec<TopTag>> {
        let row = self.leaf_row_checked(leaf)?;
        let mut ranked: Vec<(usize, f64)> = (0..self.num_tags())
            .map(|ti| (ti, self.mixture_probability(row, ti)))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked
            .into_iter()
            .map(|(ti, p)| {
                let level = self.posterior_for_row(ti, row).best_level();
                let node = self.tree.path(row)[level - 1];
                TopTag {
                    tag: ti as u32,
                    term: self.vocab.term(ti as u32).unwrap_or_default().to_owned(),
                    probability: p,
                    level,
                    node: self.tree.id(node).clone(),
                }
            })
            .collect())
    }

    /// Leaf-level mixture weight: how often the region speaks with its own
    /// voice rather than inheriting from the hierarchy.
    pub fn uniqueness(&self, leaf: &str) -> Result<f64> {
        let row = self.leaf_row_checked(leaf)?;
        Ok(*self.pi[row].last().expect("path is never empty"))
    }

    /// Cosine similarity of two leaves' own tag distributions.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let ra = self.leaf_row_checked(a)?;
        let rb = self.leaf_row_checked(b)?;
        let ta = &self.theta[self.tree.leaf_node(ra)];
        let tb = &self.theta[self.tree.leaf_node(rb)];
        Ok(cosine(ta, tb))
    }

    /// For every leaf in `from`, the `k` most similar leaves in `to`,
    /// with the `common_k` strongest shared tags (ranked by the product of
    /// tag probabilities).
    pub fn map_regions(
        &self,
        from: &[&str],
        to: &[&str],
        k: usize,
        common_k: usize,
    ) -> Result<Vec<RegionMatch>> {
        if from.is_empty() || to.is_empty() {
            return Err(Error::EmptyLeafSet);
        }
        for f in from {
            if to.contains(f) {
                return Err(Error::InvalidConfig(format!(
                    "leaf sets must be disjoint; `{f}` appears in both"
                )));
            }
        }
        from.iter()
            .map(|&f| {
                let rf = self.leaf_row_checked(f)?;
                let tf = &self.theta[self.tree.leaf_node(rf)];
                let mut scored: Vec<(usize, f64)> = to
                    .iter()
                    .map(|&t| {
                        let rt = self.leaf_row_checked(t)?;
                        Ok((rt, cosine(tf, &self.theta[self.tree.leaf_node(rt)])))
                    })
                    .collect::<Result<_>>()?;
                scored.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1)
                        .unwrap()
                        .then_with(|| self.tree.id(self.tree.leaf_node(a.0)).cmp(self.tree.id(self.tree.leaf_node(b.0))))
                });
                scored.truncate(k);
                let matches = scored
                    .into_iter()
                    .map(|(rt, sim)| {
                        let tt = &self.theta[self.tree.leaf_node(rt)];
                        let mut common: Vec<(usize, f64)> = tf
                            .iter()
                            .zip(tt)
                            .enumerate()
                            .map(|(ti, (&a, &b))| (ti, a * b))
                            .collect();
                        common.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                        common.truncate(common_k);
                        MatchedRegion {
                            to: self.tree.id(self.tree.leaf_node(rt)).clone(),
                            similarity: sim,
                            common_tags: common
                                .into_iter()
                                .map(|(ti, score)| CommonTag {
                                    term: self
                                        .vocab
                                        .term(ti as u32)
                                        .unwrap_or_default()
                                        .to_owned(),
                                    score,
                                })
                                .collect(),
                        }
                    })
                    .collect();
                Ok(RegionMatch {
                    from: self.tree.id(self.tree.leaf_node(rf)).clone(),
                    matches,
                })
            })
            .collect()
    }

    /// Data log-likelihood of `counts` under this model (no smoothing
    /// terms). The counts may use a prefix of the model's vocabulary.
    pub fn log_likelihood(&self, counts: &CountMatrix) -> Result<f64> {
        if counts.num_rows() != self.tree.num_leaves() {
            return Err(Error::LeafSetMismatch(format!(
                "counts have {} rows, tree has {} leaves",
                counts.num_rows(),
                self.tree.num_leaves()
            )));
        }
        if counts.num_tags() > self.num_tags() {
            return Err(Error::VocabularyMismatch(format!(
                "counts have {} tags, model covers {}",
                counts.num_tags(),
                self.num_tags()
            )));
        }
        let mut total = 0.0;
        for row in 0..counts.num_rows() {
            for &(t, x) in counts.row(row) {
                total += x as f64 * self.mixture_probability(row, t as usize).ln();
            }
        }
        Ok(total)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn validate_params(
    tree: &GeoTree,
    num_tags: usize,
    theta: &[Vec<f64>],
    pi: &[Vec<f64>],
) -> Result<()> {
    if theta.len() != tree.num_nodes() {
        return Err(Error::MalformedInput(format!(
            "theta covers {} nodes, tree has {}",
            theta.len(),
            tree.num_nodes()
        )));
    }
    if pi.len() != tree.num_leaves() {
        return Err(Error::MalformedInput(format!(
            "pi covers {} leaves, tree has {}",
            pi.len(),
            tree.num_leaves()
        )));
    }
    for (node, row) in theta.iter().enumerate() {
        if row.len() != num_tags {
            return Err(Error::MalformedInput(format!(
                "theta[{node}] has {} entries, expected {num_tags}",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&v| !(v > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedInput(format!(
                "theta[{node}] is not a strictly positive distribution (sum {sum})"
            )));
        }
    }
    for (row, weights) in pi.iter().enumerate() {
        if weights.len() != tree.path(row).len() {
            return Err(Error::MalformedInput(format!(
                "pi[{row}] has {} entries, path has {}",
                weights.len(),
                tree.path(row).len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&v| !(v > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedInput(format!(
                "pi[{row}] is not a strictly positive distribution (sum {sum})"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Serialization: a single JSON document, version "ghm-model/1". Node
// distributions are stored sparsely: a per-node floor value plus the entries
// that differ from it.

#[derive(Serialize, Deserialize)]
pub(crate) struct SparseRowDoc {
    pub floor: f64,
    pub entries: Vec<(u32, f64)>,
}

pub(crate) fn to_sparse_rows(dense: &[Vec<f64>]) -> Vec<SparseRowDoc> {
    dense
        .iter()
        .map(|row| {
            let floor = row.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 0.0 };
            SparseRowDoc {
                floor,
                entries: row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v != floor)
                    .map(|(t, &v)| (t as u32, v))
                    .collect(),
            }
        })
        .collect()
}

pub(crate) fn from_sparse_rows(rows: &[SparseRowDoc], num_tags: usize) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|row| {
            let mut dense = vec![row.floor; num_tags];
            for &(t, v) in &row.entries {
                *dense
                    .get_mut(t as usize)
                    .ok_or_else(|| Error::MalformedInput(format!("tag index {t} out of range")))? = v;
            }
            Ok(dense)
        })
        .collect()
}

pub(crate) const MODEL_VERSION: &str = "ghm-model/1";

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: String,
    tree: Vec<NodeSpec>,
    vocabulary: Vec<String>,
    theta: Vec<SparseRowDoc>,
    pi: Vec<Vec<f64>>,
    config: EmConfig,
    metadata: TrainingInfo,
}

impl GhmModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_VERSION.to_owned(),
            tree: self.tree.to_specs(),
            vocabulary: self.vocab.terms().to_vec(),
            theta: to_sparse_rows(&self.theta),
            pi: self.pi.clone(),
            config: self.config.clone(),
            metadata: self.info.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<GhmModel> {
        let doc: ModelDoc = serde_json::from_str(json)?;
        if doc.version != MODEL_VERSION {
            return Err(Error::MalformedInput(format!(
                "unsupported model version `{}`",
                doc.version
            )));
        }
        let tree = Arc::new(GeoTree::build(&doc.tree)?);
        let vocab = Arc::new(Vocabulary::from_terms(doc.vocabulary)?);
        let theta = from_sparse_rows(&doc.theta, vocab.len())?;
        validate_params(&tree, vocab.len(), &theta, &doc.pi)?;
        Ok(GhmModel {
            tree,
            vocab,
            theta,
            pi: doc.pi,
            config: doc.config,
            info: doc.metadata,
        })
    }
}
