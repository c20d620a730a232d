//! Token vocabulary shared by the neural models.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::corpus::Document;
use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// Word-to-id map. Id 0 is always the unknown token.
#[derive(Debug, Clone)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK: usize = 0;

    /// Builds a vocabulary from documents, keeping words seen at least
    /// `min_count` times. Ordering is by descending count, then word, so the
    /// result is deterministic.
    pub fn build<'a>(docs: impl Iterator<Item = &'a Document>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for edu in &doc.edus {
                for tok in edu {
                    *counts.entry(tok.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut entries: Vec<(&str, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut words = Vec::with_capacity(entries.len() + 1);
        words.push(UNK_TOKEN.to_string());
        words.extend(entries.into_iter().map(|(w, _)| w.to_string()));
        Self::from_words(words)
    }

    /// Rebuilds a vocabulary from an id-ordered word list (checkpoint load).
    /// The first word must be the unknown token.
    pub fn from_words(words: Vec<String>) -> Self {
        assert_eq!(words.first().map(String::as_str), Some(UNK_TOKEN));
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab { words, index }
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(Self::UNK)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Overwrites rows of `embeddings` with vectors read from a text embedding
/// file (`word v1 v2 ... vd` per line). Rows for words absent from the file
/// keep their current (random) initialization. Returns the number of
/// vocabulary words that matched.
pub fn load_text_embeddings(path: &Path, vocab: &Vocab, embeddings: &mut Tensor) -> Result<usize> {
    assert_eq!(embeddings.n_rows(), vocab.len());
    let dim = embeddings.n_cols();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut matched = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let id = vocab.id(word);
        if id == Vocab::UNK && word != UNK_TOKEN {
            continue;
        }
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| Error::malformed(path, lineno, format!("bad float {p:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        embeddings.row_mut(id).copy_from_slice(&values);
        matched += 1;
    }
    Ok(matched)
}
