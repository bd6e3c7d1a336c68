//! Vocabulary and the sparse leaf-by-tag count matrix.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bidirectional map between tag terms and dense indices `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from terms; index equals position.
    pub fn from_terms(terms: Vec<String>) -> Result<Vocabulary> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, term) in terms.iter().enumerate() {
            if index.insert(term.clone(), i as u32).is_some() {
                return Err(Error::VocabularyMismatch(format!(
                    "duplicate term `{term}`"
                )));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    /// Synthetic vocabulary `t0..t{n-1}` for generated corpora.
    pub fn indexed(n: usize) -> Vocabulary {
        let terms: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        Vocabulary::from_terms(terms).expect("indexed terms are unique")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.terms.get(index as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Sparse nonnegative counts, one row per leaf (in leaf-row order of the
/// tree the counts were built against), one column per tag.
///
/// Immutable once built; rows are sorted by tag index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix {
    num_tags: usize,
    rows: Vec<Vec<(u32, u32)>>,
}

impl CountMatrix {
    pub fn zeros(num_rows: usize, num_tags: usize) -> CountMatrix {
        CountMatrix {
            num_tags,
            rows: vec![Vec::new(); num_rows],
        }
    }

    /// Builds from per-row sparse entries; entries are sorted and merged,
    /// zero counts dropped.
    pub fn from_rows(num_tags: usize, mut rows: Vec<Vec<(u32, u32)>>) -> Result<CountMatrix> {
        for row in &mut rows {
            for &(t, _) in row.iter() {
                if t as usize >= num_tags {
                    return Err(Error::UnknownTag(t.to_string()));
                }
            }
            row.sort_unstable_by_key(|&(t, _)| t);
            let mut merged: Vec<(u32, u32)> = Vec::with_capacity(row.len());
            for &(t, c) in row.iter() {
                if c == 0 {
                    continue;
                }
                match merged.last_mut() {
                    Some(last) if last.0 == t => last.1 += c,
                    _ => merged.push((t, c)),
                }
            }
            *row = merged;
        }
        Ok(CountMatrix { num_tags, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    /// Sparse row for a leaf, sorted by tag index.
    pub fn row(&self, row: usize) -> &[(u32, u32)] {
        &self.rows[row]
    }

    pub fn get(&self, row: usize, tag: u32) -> u32 {
        match self.rows[row].binary_search_by_key(&tag, |&(t, _)| t) {
            Ok(i) => self.rows[row][i].1,
            Err(_) => 0,
        }
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.rows[row].iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.rows.len()).map(|r| self.row_total(r)).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}
