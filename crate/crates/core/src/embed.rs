//! Word vectors, averaged document embeddings, cosine relevance and nearest
//! domain-document classification.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::text::tokens;
use crate::{Error, Exec, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: IndexMap::new(),
        })
    }

    /// Adds a vector; returns `false` if the word was already present (first one wins).
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite component in vector for {word:?}"
            )));
        }
        if self.vectors.contains_key(word) {
            return Ok(false);
        }
        self.vectors.insert(word.to_owned(), vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// Sum of the vectors of covered tokens and how many tokens were covered.
    fn accumulate(&self, text: &str, sum: &mut [f64]) -> usize {
        let mut covered = 0;
        for token in tokens(text) {
            if let Some(v) = self.vectors.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                covered += 1;
            }
        }
        covered
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        writeln!(out, "{} {}", self.vectors.len(), self.dim).unwrap();
        for (w, v) in &self.vectors {
            write!(out, "{w}").unwrap();
            for x in v {
                write!(out, " {x}").unwrap();
            }
            out.push(b'\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Reads the word-vector text format: an optional `count dim` header, then one
/// `word v1 ... vdim` row per line.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = None;
    let mut header_dim = None;
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if table.is_none() && header_dim.is_none() && fields.len() == 2 {
            if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                header_dim = Some(dim);
                continue;
            }
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, line_no, format!("bad component: {e}")))?;
        let table = match &mut table {
            Some(t) => t,
            None => {
                let dim = header_dim.unwrap_or(values.len());
                table.insert(
                    EmbeddingTable::new(dim)
                        .map_err(|e| Error::parse(path, line_no, e.to_string()))?,
                )
            }
        };
        table
            .insert(fields[0], values)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
    }
    table.ok_or_else(|| Error::parse(path, 1, "no vectors found"))
}

/// Arithmetic mean of the vectors of in-vocabulary tokens; repeats count each time.
pub fn doc_embedding(table: &EmbeddingTable, text: &str) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; table.dim];
    let covered = table.accumulate(text, &mut sum);
    if covered == 0 {
        return Err(Error::NoCoveredTokens(text.to_owned()));
    }
    let n = covered as f64;
    Ok(sum.into_iter().map(|x| x / n).collect())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot / (na * nb))
}

/// Cosine between the text's averaged embedding and the domain centroid.
pub fn relevance(table: &EmbeddingTable, text: &str, centroid: &[f64]) -> Result<f64> {
    cosine(&doc_embedding(table, text)?, centroid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDocument {
    pub label: String,
    pub centroid: Vec<f64>,
    pub word_count: usize,
}

/// One centroid per label, equal to the embedding of all that label's texts
/// concatenated. Labels keep first-appearance order.
pub fn build_domain_documents<L, T>(
    table: &EmbeddingTable,
    labeled: impl IntoIterator<Item = (L, T)>,
) -> Result<Vec<DomainDocument>>
where
    L: AsRef<str>,
    T: AsRef<str>,
{
    let mut sums: IndexMap<String, (Vec<f64>, usize)> = IndexMap::new();
    for (label, text) in labeled {
        let (sum, count) = sums
            .entry(label.as_ref().to_owned())
            .or_insert_with(|| (vec![0.0; table.dim], 0));
        *count += table.accumulate(text.as_ref(), sum);
    }
    sums.into_iter()
        .map(|(label, (sum, count))| {
            if count == 0 {
                return Err(Error::NoCoveredTokens(format!("domain {label}")));
            }
            let n = count as f64;
            Ok(DomainDocument {
                label,
                centroid: sum.into_iter().map(|x| x / n).collect(),
                word_count: count,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub label: String,
    pub similarity: f64,
}

/// Label of the domain document closest by cosine; ties go to the earlier document.
pub fn classify(
    docs: &[DomainDocument],
    table: &EmbeddingTable,
    text: &str,
) -> Result<Classification> {
    if docs.is_empty() {
        return Err(Error::Config("no domain documents".into()));
    }
    let v = doc_embedding(table, text)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in docs.iter().enumerate() {
        let sim = cosine(&v, &d.centroid)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    let (i, similarity) = best.unwrap();
    Ok(Classification {
        label: docs[i].label.clone(),
        similarity,
    })
}

pub fn classify_batch<T: AsRef<str> + Sync>(
    exec: Exec,
    docs: &[DomainDocument],
    table: &EmbeddingTable,
    texts: &[T],
) -> Vec<Result<Classification>> {
    exec.map(texts, |t| classify(docs, table, t.as_ref()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub total: usize,
    /// Documents that could be classified (at least one covered token).
    pub predicted: usize,
    pub correct: usize,
}

impl Evaluation {
    /// Correct predictions over predictions made, as a percentage.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.predicted as f64
        }
    }
}

pub fn evaluate<L, T>(
    exec: Exec,
    docs: &[DomainDocument],
    table: &EmbeddingTable,
    test: &[(L, T)],
) -> Evaluation
where
    L: AsRef<str> + Sync,
    T: AsRef<str> + Sync,
{
    let outcomes = exec.map(test, |(label, text)| {
        classify(docs, table, text.as_ref())
            .ok()
            .map(|c| c.label == label.as_ref())
    });
    Evaluation {
        total: test.len(),
        predicted: outcomes.iter().filter(|o| o.is_some()).count(),
        correct: outcomes.iter().filter(|o| **o == Some(true)).count(),
    }
}

pub fn save_domain_documents(path: impl AsRef<Path>, docs: &[DomainDocument]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for d in docs {
        serde_json::to_writer(&mut out, d).unwrap();
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_domain_documents(path: impl AsRef<Path>) -> Result<Vec<DomainDocument>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}
