//! On-disk documents the subcommands exchange, plus atomic writes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ghm_core::{CountMatrix, GeoTree, Vocabulary};

use crate::CliError;

pub const COUNTS_VERSION: &str = "ghm-counts/1";
pub const VOCAB_VERSION: &str = "ghm-vocab/1";

#[derive(Serialize, Deserialize)]
pub struct CountsDoc {
    pub version: String,
    /// Leaf ids in row order.
    pub leaves: Vec<String>,
    pub num_tags: usize,
    pub rows: Vec<Vec<(u32, u32)>>,
}

impl CountsDoc {
    pub fn new(counts: &CountMatrix, tree: &GeoTree) -> CountsDoc {
        CountsDoc {
            version: COUNTS_VERSION.to_owned(),
            leaves: (0..tree.num_leaves())
                .map(|row| tree.id(tree.leaf_node(row)).as_str().to_owned())
                .collect(),
            num_tags: counts.num_tags(),
            rows: (0..counts.num_rows()).map(|r| counts.row(r).to_vec()).collect(),
        }
    }

    /// Rebuilds the matrix, checking the rows line up with `tree`'s leaves.
    pub fn into_matrix(self, tree: &GeoTree) -> Result<CountMatrix, CliError> {
        if self.version != COUNTS_VERSION {
            return Err(CliError::input(format!(
                "unsupported counts version `{}`",
                self.version
            )));
        }
        if self.leaves.len() != tree.num_leaves() {
            return Err(CliError::input(format!(
                "counts cover {} leaves, tree has {}",
                self.leaves.len(),
                tree.num_leaves()
            )));
        }
        for (row, leaf) in self.leaves.iter().enumerate() {
            if tree.id(tree.leaf_node(row)).as_str() != leaf {
                return Err(CliError::input(format!(
                    "counts row {row} is `{leaf}`, tree leaf is `{}`",
                    tree.id(tree.leaf_node(row))
                )));
            }
        }
        Ok(CountMatrix::from_rows(self.num_tags, self.rows)?)
    }
}

#[derive(Serialize, Deserialize)]
pub struct VocabDoc {
    pub version: String,
    pub terms: Vec<String>,
}

impl VocabDoc {
    pub fn new(vocab: &Vocabulary) -> VocabDoc {
        VocabDoc {
            version: VOCAB_VERSION.to_owned(),
            terms: vocab.terms().to_vec(),
        }
    }

    pub fn into_vocabulary(self) -> Result<Vocabulary, CliError> {
        if self.version != VOCAB_VERSION {
            return Err(CliError::input(format!(
                "unsupported vocabulary version `{}`",
                self.version
            )));
        }
        Ok(Vocabulary::from_terms(self.terms)?)
    }
}

/// Requires the path to exist before any work starts.
pub fn require_path(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::unknown_path(path))
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    require_path(path)?;
    Ok(fs::read_to_string(path)?)
}

/// Writes via a temp file in the same directory plus a rename, so readers
/// never observe a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::input(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        "{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
