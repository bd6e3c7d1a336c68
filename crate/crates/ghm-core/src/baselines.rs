//! Reference classifiers the mixture model is compared against.
//!
//! Both assign a (tag, leaf) pair to a node on the leaf's root path:
//!
//! - **Naive Bayes**: every node pools the counts of its descendant leaves
//!   into an additively smoothed multinomial; the class prior over path
//!   nodes is uniform, so classification is an argmax of per-node tag
//!   frequencies.
//! - **Hierarchical tf-idf**: every node gets an L2-normalized weight
//!   vector `tf(t, v) * idf(t, v)` where tf is the tag's relative frequency
//!   in the node's pooled counts and `idf = ln((L + 1) / (df + 1)) + 1`
//!   over the `L` nodes sharing the node's depth, `df` of which contain the
//!   tag. Weights are compared across levels after normalization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counts::{CountMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::geotree::{GeoTree, NodeId, NodeSpec};
use crate::model::{aggregate_node_counts, from_sparse_rows, to_sparse_rows, SparseRowDoc};

fn check_dims(counts: &CountMatrix, tree: &GeoTree, vocab: &Vocabulary) -> Result<()> {
    if counts.num_rows() != tree.num_leaves() {
        return Err(Error::LeafSetMismatch(format!(
            "counts have {} rows, tree has {} leaves",
            counts.num_rows(),
            tree.num_leaves()
        )));
    }
    if counts.num_tags() != vocab.len() {
        return Err(Error::VocabularyMismatch(format!(
            "vocabulary has {} terms, counts have {} tags",
            vocab.len(),
            counts.num_tags()
        )));
    }
    Ok(())
}

/// Multinomial naive Bayes over the path nodes, uniform class prior.
#[derive(Clone, Debug)]
pub struct NbModel {
    tree: Arc<GeoTree>,
    vocab: Arc<Vocabulary>,
    /// Per node, additively smoothed tag frequencies.
    theta: Vec<Vec<f64>>,
    smoothing: f64,
}

impl NbModel {
    pub fn train(
        counts: &CountMatrix,
        tree: &Arc<GeoTree>,
        vocab: &Arc<Vocabulary>,
        smoothing: f64,
    ) -> Result<NbModel> {
        check_dims(counts, tree, vocab)?;
        if !(smoothing > 0.0) {
            return Err(Error::InvalidConfig("smoothing must be > 0".into()));
        }
        let num_tags = counts.num_tags();
        let mut theta = aggregate_node_counts(counts, tree);
        for row in theta.iter_mut() {
            let total: f64 = row.iter().sum();
            let denom = total + num_tags as f64 * smoothing;
            for v in row.iter_mut() {
                *v = (*v + smoothing) / denom;
            }
        }
        Ok(NbModel {
            tree: Arc::clone(tree),
            vocab: Arc::clone(vocab),
            theta,
            smoothing,
        })
    }

    pub fn tree(&self) -> &GeoTree {
        &self.tree
    }

    pub fn theta(&self, node: usize) -> &[f64] {
        &self.theta[node]
    }

    /// 1-based level maximizing the node frequency of `tag`; ties go deep.
    pub fn classify_level(&self, tag: u32, row: usize) -> usize {
        let path = self.tree.path(row);
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (z, &node) in path.iter().enumerate() {
            let p = self.theta[node][tag as usize];
            if p >= best_p {
                best_p = p;
                best = z;
            }
        }
        best + 1
    }

    pub fn classify(&self, tag: u32, leaf: &str) -> Result<&NodeId> {
        let row = self
            .tree
            .leaf_row(leaf)
            .map_err(|_| Error::UnknownLeaf(leaf.to_owned()))?;
        if tag as usize >= self.vocab.len() {
            return Err(Error::UnknownTag(tag.to_string()));
        }
        let level = self.classify_level(tag, row);
        Ok(self.tree.id(self.tree.path(row)[level - 1]))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = BaselineDoc {
            version: "nb-model/1".to_owned(),
            tree: self.tree.to_specs(),
            vocabulary: self.vocab.terms().to_vec(),
            rows: to_sparse_rows(&self.theta),
            smoothing: Some(self.smoothing),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<NbModel> {
        let doc: BaselineDoc = serde_json::from_str(json)?;
        if doc.version != "nb-model/1" {
            return Err(Error::MalformedInput(format!(
                "unsupported model version `{}`",
                doc.version
            )));
        }
        let tree = Arc::new(GeoTree::build(&doc.tree)?);
        let vocab = Arc::new(Vocabulary::from_terms(doc.vocabulary)?);
        let theta = from_sparse_rows(&doc.rows, vocab.len())?;
        if theta.len() != tree.num_nodes() {
            return Err(Error::MalformedInput("theta/tree size mismatch".into()));
        }
        Ok(NbModel {
            tree,
            vocab,
            theta,
            smoothing: doc.smoothing.unwrap_or(0.0),
        })
    }
}

/// Hierarchical tf-idf node weights.
#[derive(Clone, Debug)]
pub struct HtModel {
    tree: Arc<GeoTree>,
    vocab: Arc<Vocabulary>,
    /// Per node, L2-normalized tag weights (all-zero only for nodes with no
    /// counts at all).
    weights: Vec<Vec<f64>>,
}

/// Outcome of an HT classification. A zero `weight` means no path node had
/// any evidence for the tag and the leaf was chosen by the tie rule alone.
#[derive(Clone, Debug, PartialEq)]
pub struct HtDecision {
    pub node: NodeId,
    /// 1-based level (1 = root).
    pub level: usize,
    pub weight: f64,
}

impl HtModel {
    pub fn train(
        counts: &CountMatrix,
        tree: &Arc<GeoTree>,
        vocab: &Arc<Vocabulary>,
    ) -> Result<HtModel> {
        check_dims(counts, tree, vocab)?;
        let num_tags = counts.num_tags();
        let num_nodes = tree.num_nodes();
        let agg = aggregate_node_counts(counts, tree);

        // Document sets are the nodes at each depth.
        let depths: Vec<usize> = (0..num_nodes).map(|v| tree.depth_of(v)).collect();
        let max_depth = depths.iter().copied().max().unwrap_or(0);
        let mut level_size = vec![0u32; max_depth + 1];
        for &d in &depths {
            level_size[d] += 1;
        }
        let mut df = vec![vec![0u32; num_tags]; max_depth + 1];
        for (v, row) in agg.iter().enumerate() {
            let d = depths[v];
            for (t, &c) in row.iter().enumerate() {
                if c > 0.0 {
                    df[d][t] += 1;
                }
            }
        }

        let mut weights = agg;
        for (v, row) in weights.iter_mut().enumerate() {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                for w in row.iter_mut() {
                    *w = 0.0;
                }
                continue;
            }
            let d = depths[v];
            let level = level_size[d] as f64;
            for (t, w) in row.iter_mut().enumerate() {
                let tf = *w / total;
                let idf = ((level + 1.0) / (df[d][t] as f64 + 1.0)).ln() + 1.0;
                *w = tf * idf;
            }
            let norm: f64 = row.iter().map(|&w| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for w in row.iter_mut() {
                    *w /= norm;
                }
            }
        }
        Ok(HtModel {
            tree: Arc::clone(tree),
            vocab: Arc::clone(vocab),
            weights,
        })
    }

    pub fn tree(&self) -> &GeoTree {
        &self.tree
    }

    pub fn weights(&self, node: usize) -> &[f64] {
        &self.weights[node]
    }

    /// 1-based level with the largest normalized weight; ties go deep.
    pub fn classify_level(&self, tag: u32, row: usize) -> usize {
        let path = self.tree.path(row);
        let mut best = 0;
        let mut best_w = f64::NEG_INFINITY;
        for (z, &node) in path.iter().enumerate() {
            let w = self.weights[node][tag as usize];
            if w >= best_w {
                best_w = w;
                best = z;
            }
        }
        best + 1
    }

    pub fn classify(&self, tag: u32, leaf: &str) -> Result<HtDecision> {
        let row = self
            .tree
            .leaf_row(leaf)
            .map_err(|_| Error::UnknownLeaf(leaf.to_owned()))?;
        if tag as usize >= self.vocab.len() {
            return Err(Error::UnknownTag(tag.to_string()));
        }
        let level = self.classify_level(tag, row);
        let node = self.tree.path(row)[level - 1];
        Ok(HtDecision {
            node: self.tree.id(node).clone(),
            level,
            weight: self.weights[node][tag as usize],
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = BaselineDoc {
            version: "ht-model/1".to_owned(),
            tree: self.tree.to_specs(),
            vocabulary: self.vocab.terms().to_vec(),
            rows: to_sparse_rows(&self.weights),
            smoothing: None,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<HtModel> {
        let doc: BaselineDoc = serde_json::from_str(json)?;
        if doc.version != "ht-model/1" {
            return Err(Error::MalformedInput(format!(
                "unsupported model version `{}`",
                doc.version
            )));
        }
        let tree = Arc::new(GeoTree::build(&doc.tree)?);
        let vocab = Arc::new(Vocabulary::from_terms(doc.vocabulary)?);
        let weights = from_sparse_rows(&doc.rows, vocab.len())?;
        if weights.len() != tree.num_nodes() {
            return Err(Error::MalformedInput("weights/tree size mismatch".into()));
        }
        Ok(HtModel {
            tree,
            vocab,
            weights,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BaselineDoc {
    version: String,
    tree: Vec<NodeSpec>,
    vocabulary: Vec<String>,
    rows: Vec<SparseRowDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<f64>,
}
