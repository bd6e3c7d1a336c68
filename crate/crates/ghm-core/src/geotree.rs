//! The region hierarchy: a rooted tree whose leaves are the regions raw
//! observations land in (e.g. country -> city -> neighborhood).
//!
//! Node ids are opaque strings chosen by the caller; dense indices are
//! assigned in insertion order and used for all internal math. Trees may be
//! unbalanced: every operation works with the leaf's own root path rather
//! than a global depth.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque, caller-supplied identifier of a tree node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One node of a tree description. `parent` is `None` for the root.
///
/// This is also the on-disk schema: a tree file is a JSON array of
/// `{"id": ..., "name": ..., "parent": ...}` objects, field order free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
struct Node {
    id: NodeId,
    name: String,
    parent: Option<usize>,
}

/// Validated region hierarchy. Immutable after construction and safe to
/// share across threads.
#[derive(Clone, Debug)]
pub struct GeoTree {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    root: usize,
    children: Vec<Vec<usize>>,
    /// Node indices of the leaves, in insertion order. The position of a
    /// leaf in this list is its "row", the index used by count matrices.
    leaves: Vec<usize>,
    leaf_rows: HashMap<usize, usize>,
    /// Per leaf row, the node indices from the root down to the leaf.
    paths: Vec<Vec<usize>>,
}

impl PartialEq for GeoTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl GeoTree {
    /// Builds and validates a tree from node descriptions.
    ///
    /// Rejects duplicate ids, dangling parent references, multiple roots and
    /// parent cycles.
    pub fn build(specs: &[NodeSpec]) -> Result<GeoTree> {
        if specs.is_empty() {
            return Err(Error::EmptyTree);
        }
        let mut index = HashMap::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if index.insert(spec.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(spec.id.clone()));
            }
        }
        let mut nodes = Vec::with_capacity(specs.len());
        let mut root: Option<usize> = None;
        for spec in specs {
            let parent = match &spec.parent {
                Some(p) => Some(*index.get(p).ok_or_else(|| Error::UnknownParent {
                    node: spec.id.clone(),
                    parent: p.clone(),
                })?),
                None => {
                    if let Some(first) = root {
                        return Err(Error::MultipleRoots(
                            specs[first].id.clone(),
                            spec.id.clone(),
                        ));
                    }
                    root = Some(nodes.len());
                    None
                }
            };
            nodes.push(Node {
                id: NodeId::new(spec.id.clone()),
                name: spec.name.clone(),
                parent,
            });
        }

        // Walk parent chains with tri-state marks; a revisit of an
        // in-progress node is a cycle. A missing root implies one too, but
        // the walk below reports the offending node directly.
        let mut state = vec![0u8; nodes.len()]; // 0 unvisited, 1 in progress, 2 done
        for start in 0..nodes.len() {
            if state[start] == 2 {
                continue;
            }
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                match state[cur] {
                    2 => break,
                    1 => return Err(Error::CycleDetected(nodes[cur].id.as_str().to_owned())),
                    _ => {}
                }
                state[cur] = 1;
                chain.push(cur);
                match nodes[cur].parent {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            for n in chain {
                state[n] = 2;
            }
        }
        let root = root.expect("acyclic tree has a root");

        let mut children = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                children[p].push(i);
            }
        }
        let leaves: Vec<usize> = (0..nodes.len()).filter(|&i| children[i].is_empty()).collect();
        let leaf_rows = leaves.iter().enumerate().map(|(row, &n)| (n, row)).collect();
        let paths = leaves
            .iter()
            .map(|&leaf| {
                let mut path = Vec::new();
                let mut cur = leaf;
                loop {
                    path.push(cur);
                    match nodes[cur].parent {
                        Some(p) => cur = p,
                        None => break,
                    }
                }
                path.reverse();
                path
            })
            .collect();

        Ok(GeoTree {
            nodes,
            index,
            root,
            children,
            leaves,
            leaf_rows,
            paths,
        })
    }

    pub fn from_json(json: &str) -> Result<GeoTree> {
        let specs: Vec<NodeSpec> = serde_json::from_str(json)?;
        GeoTree::build(&specs)
    }

    /// Node descriptions in insertion order; building from them reproduces
    /// an identical tree.
    pub fn to_specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id.as_str().to_owned(),
                name: n.name.clone(),
                parent: n.parent.map(|p| self.nodes[p].id.as_str().to_owned()),
            })
            .collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Number of levels on the longest root path.
    pub fn depth(&self) -> usize {
        self.paths.iter().map(|p| p.len()).max().unwrap_or(0)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn id(&self, node: usize) -> &NodeId {
        &self.nodes[node].id
    }

    pub fn name(&self, node: usize) -> &str {
        &self.nodes[node].name
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Node indices of the leaves in insertion order.
    pub fn leaf_nodes(&self) -> &[usize] {
        &self.leaves
    }

    /// Row index of a leaf given its id.
    pub fn leaf_row(&self, id: &str) -> Result<usize> {
        let node = self
            .index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_owned()))?;
        self.leaf_rows
            .get(&node)
            .copied()
            .ok_or_else(|| Error::NotALeaf(id.to_owned()))
    }

    /// Node index of the leaf at `row`.
    pub fn leaf_node(&self, row: usize) -> usize {
        self.leaves[row]
    }

    /// Root path of the leaf at `row`, ordered root first. The last element
    /// is the leaf itself; the path length is the leaf's level count.
    pub fn path(&self, row: usize) -> &[usize] {
        &self.paths[row]
    }

    /// Ordered node ids from a leaf up to the root, both endpoints included.
    pub fn path_to_root(&self, leaf: &str) -> Result<Vec<NodeId>> {
        let row = self.leaf_row(leaf)?;
        Ok(self.paths[row]
            .iter()
            .rev()
            .map(|&n| self.nodes[n].id.clone())
            .collect())
    }

    /// Depth of a node (root = 0).
    pub fn depth_of(&self, node: usize) -> usize {
        let mut d = 0;
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Leaf rows of every leaf at or below `node`.
    pub fn descendant_leaf_rows(&self, node: usize) -> Vec<usize> {
        let mut rows = Vec::new();
        let mut stack = vec![node];
        while let Some(cur) = stack.pop() {
            if let Some(&row) = self.leaf_rows.get(&cur) {
                rows.push(row);
            }
            stack.extend(self.children[cur].iter().copied());
        }
        rows.sort_unstable();
        rows
    }
}
