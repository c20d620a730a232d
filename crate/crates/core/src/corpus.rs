//! EDU-segmented sentiment corpora: loading, validation, splitting.
//!
//! The on-disk format is JSON-lines, one document per line:
//! `{"id": "d1", "label": 5, "edus": [["great", "food"], ["we", "came", "back"]]}`.
//! Labels are star ratings in 1..=5. EDU segmentation and tokenization happen
//! upstream; tokens are normalized to lowercase on load.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One review: a gold star label and a sequence of tokenized EDUs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub label: u8,
    pub edus: Vec<Vec<String>>,
}

impl Document {
    /// Star label mapped to a class index 0..=4.
    pub fn class_index(&self) -> usize {
        (self.label - 1) as usize
    }

    pub fn n_edus(&self) -> usize {
        self.edus.len()
    }
}

/// Total token count over all EDUs.
pub fn word_count(doc: &Document) -> usize {
    doc.edus.iter().map(Vec::len).sum()
}

/// Train/dev/test partition with pairwise-disjoint id sets.
#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

impl CorpusSplits {
    pub fn all(&self) -> impl Iterator<Item = &Document> {
        self.train.iter().chain(self.dev.iter()).chain(self.test.iter())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How to partition a corpus file into train/dev/test.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Seeded shuffle followed by a ratio cut. Ratios must sum to 1.
    Ratios {
        train: f64,
        dev: f64,
        test: f64,
        seed: u64,
    },
    /// Explicit id lists, one id per line. Every corpus id must appear in
    /// exactly one file.
    Files {
        train: PathBuf,
        dev: PathBuf,
        test: PathBuf,
    },
}

impl SplitSpec {
    /// The default 80/10/10 split.
    pub fn default_ratios(seed: u64) -> Self {
        SplitSpec::Ratios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
            seed,
        }
    }
}

fn validate_document(doc: &mut Document, path: &Path, line: usize) -> Result<()> {
    if doc.id.is_empty() {
        return Err(Error::malformed(path, line, "field `id` is empty"));
    }
    if !(1..=5).contains(&doc.label) {
        return Err(Error::malformed(
            path,
            line,
            format!("field `label` is {}, expected 1..=5", doc.label),
        ));
    }
    if doc.edus.is_empty() {
        return Err(Error::malformed(path, line, "field `edus` is empty"));
    }
    for (i, edu) in doc.edus.iter_mut().enumerate() {
        if edu.is_empty() {
            return Err(Error::malformed(path, line, format!("EDU {i} has no tokens")));
        }
        for tok in edu.iter_mut() {
            if tok.is_empty() {
                return Err(Error::malformed(path, line, format!("EDU {i} has an empty token")));
            }
            *tok = tok.to_lowercase();
        }
    }
    Ok(())
}

/// Reads and validates a JSONL corpus without splitting.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        validate_document(&mut doc, path, lineno)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId { id: doc.id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Serializes documents back to JSONL. Loading the written file yields the
/// same documents.
pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = Vec::new();
    for doc in docs {
        serde_json::to_writer(&mut out, doc).expect("document serialization");
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Loads, validates, and partitions a corpus file.
pub fn load_corpus(path: &Path, spec: &SplitSpec) -> Result<CorpusSplits> {
    let docs = load_documents(path)?;
    match spec {
        SplitSpec::Ratios { train, dev, test, seed } => {
            if (train + dev + test - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "split ratios {train}/{dev}/{test} do not sum to 1"
                )));
            }
            let mut order: Vec<usize> = (0..docs.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let n = docs.len();
            let n_train = (n as f64 * train).floor() as usize;
            let n_dev = (n as f64 * dev).floor() as usize;
            let mut docs: Vec<Option<Document>> = docs.into_iter().map(Some).collect();
            let take = |ix: &[usize], docs: &mut Vec<Option<Document>>| {
                ix.iter().map(|&i| docs[i].take().expect("index used once")).collect::<Vec<_>>()
            };
            Ok(CorpusSplits {
                train: take(&order[..n_train], &mut docs),
                dev: take(&order[n_train..n_train + n_dev], &mut docs),
                test: take(&order[n_train + n_dev..], &mut docs),
            })
        }
        SplitSpec::Files { train, dev, test } => {
            let lists = [
                ("train", read_id_list(train)?),
                ("dev", read_id_list(dev)?),
                ("test", read_id_list(test)?),
            ];
            let mut assignment = std::collections::BTreeMap::new();
            for (name, ids) in &lists {
                for id in ids {
                    if assignment.insert(id.clone(), *name).is_some() {
                        return Err(Error::InvalidArgument(format!(
                            "id {id:?} appears in more than one split file"
                        )));
                    }
                }
            }
            let mut splits = CorpusSplits { train: vec![], dev: vec![], test: vec![] };
            for doc in docs {
                match assignment.remove(&doc.id) {
                    Some("train") => splits.train.push(doc),
                    Some("dev") => splits.dev.push(doc),
                    Some("test") => splits.test.push(doc),
                    Some(_) => unreachable!(),
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "corpus id {:?} is not assigned to any split file",
                            doc.id
                        )))
                    }
                }
            }
            if let Some((id, name)) = assignment.into_iter().next() {
                return Err(Error::UnknownId {
                    id,
                    what: format!("{name} split file"),
                });
            }
            Ok(splits)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn parses_minimal_record() {
        let f = write_lines(&[r#"{"id":"d1","label":5,"edus":[["great","food"]]}"#]);
        let docs = load_documents(f.path()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].id, "d1");
        assert_eq!(docs[0].label, 5);
        assert_eq!(docs[0].edus, vec![vec!["great".to_string(), "food".to_string()]]);
        assert_eq!(word_count(&docs[0]), 2);
    }

    #[test]
    fn rejects_label_out_of_range_with_line_and_field() {
        let f = write_lines(&[
            r#"{"id":"d1","label":5,"edus":[["ok"]]}"#,
            r#"{"id":"d2","label":6,"edus":[["ok"]]}"#,
        ]);
        let err = load_documents(f.path()).unwrap_err().to_string();
        assert!(err.contains(":2:"), "error should name line 2: {err}");
        assert!(err.contains("label"), "error should name the field: {err}");
    }

    #[test]
    fn rejects_empty_edu() {
        let f = write_lines(&[r#"{"id":"d1","label":3,"edus":[["ok"],[]]}"#]);
        let err = load_documents(f.path()).unwrap_err().to_string();
        assert!(err.contains("EDU 1"), "{err}");
    }

    #[test]
    fn rejects_duplicate_id() {
        let f = write_lines(&[
            r#"{"id":"d1","label":3,"edus":[["ok"]]}"#,
            r#"{"id":"d1","label":4,"edus":[["ok"]]}"#,
        ]);
        assert!(matches!(load_documents(f.path()), Err(Error::DuplicateId { .. })));
    }

    #[test]
    fn lowercases_tokens() {
        let f = write_lines(&[r#"{"id":"d1","label":3,"edus":[["Great","FOOD"]]}"#]);
        let docs = load_documents(f.path()).unwrap();
        assert_eq!(docs[0].edus[0], vec!["great", "food"]);
    }

    #[test]
    fn ratio_split_is_deterministic_and_counts_match() {
        let lines: Vec<String> = (0..10)
            .map(|i| format!(r#"{{"id":"d{i}","label":{},"edus":[["w"]]}}"#, i % 5 + 1))
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_lines(&refs);
        let spec = SplitSpec::default_ratios(7);
        let a = load_corpus(f.path(), &spec).unwrap();
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (8, 1, 1));
        let b = load_corpus(f.path(), &spec).unwrap();
        let ids = |s: &[Document]| s.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.train), ids(&b.train));
        assert_eq!(ids(&a.dev), ids(&b.dev));
        assert_eq!(ids(&a.test), ids(&b.test));
    }

    #[test]
    fn word_count_sums_edu_lengths() {
        let doc = Document {
            id: "d".into(),
            label: 3,
            edus: vec![vec!["a".into(), "b".into()], vec!["c".into()]],
        };
        assert_eq!(word_count(&doc), 3);
        assert!(word_count(&doc) >= doc.n_edus());
    }

    #[test]
    fn word_count_thirteen_edu_review() {
        // 13-EDU review with whitespace-token counts 8,3,8,5,7,4,3,8,4,8,6,7,3
        // per EDU; hand-summed total is 74.
        let sizes = [8usize, 3, 8, 5, 7, 4, 3, 8, 4, 8, 6, 7, 3];
        let edus: Vec<Vec<String>> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| (0..n).map(|j| format!("w{i}_{j}")).collect())
            .collect();
        let doc = Document { id: "fig".into(), label: 2, edus };
        assert_eq!(doc.n_edus(), 13);
        assert_eq!(word_count(&doc), 74);
    }

    #[test]
    fn roundtrip_preserves_documents() {
        let f = write_lines(&[
            r#"{"id":"d1","label":5,"edus":[["Great","food"],["nice"]]}"#,
            r#"{"id":"d2","label":1,"edus":[["awful"]]}"#,
        ]);
        let docs = load_documents(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_documents(out.path(), &docs).unwrap();
        let reloaded = load_documents(out.path()).unwrap();
        assert_eq!(docs, reloaded);
    }

    #[test]
    fn split_files_cover_and_disjoint() {
        let corpus = write_lines(&[
            r#"{"id":"a","label":1,"edus":[["x"]]}"#,
            r#"{"id":"b","label":2,"edus":[["x"]]}"#,
            r#"{"id":"c","label":3,"edus":[["x"]]}"#,
        ]);
        let tr = write_lines(&["a"]);
        let dv = write_lines(&["b"]);
        let te = write_lines(&["c"]);
        let spec = SplitSpec::Files {
            train: tr.path().into(),
            dev: dv.path().into(),
            test: te.path().into(),
        };
        let splits = load_corpus(corpus.path(), &spec).unwrap();
        assert_eq!(splits.train[0].id, "a");
        assert_eq!(splits.dev[0].id, "b");
        assert_eq!(splits.test[0].id, "c");

        // unassigned id is an error
        let dv2 = write_lines(&[]);
        let spec = SplitSpec::Files {
            train: tr.path().into(),
            dev: dv2.path().into(),
            test: te.path().into(),
        };
        assert!(load_corpus(corpus.path(), &spec).is_err());
    }
}
