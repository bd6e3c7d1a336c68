//! Pluggable tag normalization.

use std::collections::HashSet;

use unicode_normalization::UnicodeNormalization;

/// Maps raw tag text to its canonical form, or drops it.
pub trait TagNormalizer: Send + Sync {
    fn normalize(&self, raw: &str) -> Option<String>;
}

/// Trim, lowercase, Unicode NFC, then stoplist. Stemming is intentionally
/// not part of the default; callers with a stemmer plug it in through the
/// trait.
pub struct DefaultNormalizer {
    stoplist: HashSet<String>,
}

impl DefaultNormalizer {
    pub fn new(stoplist: impl IntoIterator<Item = String>) -> Self {
        let stoplist = stoplist
            .into_iter()
            .map(|t| t.trim().to_lowercase().nfc().collect())
            .filter(|t: &String| !t.is_empty())
            .collect();
        DefaultNormalizer { stoplist }
    }

    /// Parses a plain stoplist file: one term per line, blank lines ignored.
    pub fn from_stoplist_text(text: &str) -> Self {
        DefaultNormalizer::new(text.lines().map(str::to_owned))
    }
}

impl Default for DefaultNormalizer {
    fn default() -> Self {
        DefaultNormalizer::new(std::iter::empty())
    }
}

impl TagNormalizer for DefaultNormalizer {
    fn normalize(&self, raw: &str) -> Option<String> {
        let term: String = raw.trim().to_lowercase().nfc().collect();
        if term.is_empty() || self.stoplist.contains(&term) {
            None
        } else {
            Some(term)
        }
    }
}
