//! Knowledge bases as ordered lists of `<subject, predicate, object>` triples.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    /// Trims every field and rejects empty ones. Casing is kept as-is.
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self> {
        let (subject, predicate, object) = (subject.trim(), predicate.trim(), object.trim());
        for (name, value) in [
            ("subject", subject),
            ("predicate", predicate),
            ("object", object),
        ] {
            if value.is_empty() {
                return Err(Error::Config(format!("triple {name} is empty")));
            }
        }
        Ok(Triple {
            subject: subject.to_owned(),
            predicate: predicate.to_owned(),
            object: object.to_owned(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KbFormat {
    Tsv,
    Jsonl,
}

impl KbFormat {
    /// `.jsonl`/`.json` means JSON-lines, anything else TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => KbFormat::Jsonl,
            _ => KbFormat::Tsv,
        }
    }
}

impl std::str::FromStr for KbFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(KbFormat::Tsv),
            "jsonl" => Ok(KbFormat::Jsonl),
            other => Err(Error::Config(format!("unknown KB format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct KbStats {
    pub triple_count: usize,
    pub predicate_count: usize,
    pub subject_count: usize,
    pub object_count: usize,
}

/// Immutable after construction. Vocabularies keep first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    predicates: IndexSet<String>,
    subjects: IndexSet<String>,
    objects: IndexSet<String>,
    duplicates_dropped: usize,
}

impl KnowledgeBase {
    /// Builds a KB, silently dropping exact duplicates (first occurrence wins).
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut seen = IndexSet::new();
        let mut duplicates_dropped = 0;
        for triple in triples {
            if !seen.insert(triple) {
                duplicates_dropped += 1;
            }
        }
        let triples: Vec<Triple> = seen.into_iter().collect();
        let predicates = triples.iter().map(|t| t.predicate.clone()).collect();
        let subjects = triples.iter().map(|t| t.subject.clone()).collect();
        let objects = triples.iter().map(|t| t.object.clone()).collect();
        KnowledgeBase {
            triples,
            predicates,
            subjects,
            objects,
            duplicates_dropped,
        }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn predicates(&self) -> &IndexSet<String> {
        &self.predicates
    }

    pub fn subjects(&self) -> &IndexSet<String> {
        &self.subjects
    }

    pub fn objects(&self) -> &IndexSet<String> {
        &self.objects
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            triple_count: self.triples.len(),
            predicate_count: self.predicates.len(),
            subject_count: self.subjects.len(),
            object_count: self.objects.len(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: KbFormat) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for t in &self.triples {
            match format {
                KbFormat::Tsv => {
                    writeln!(out, "{}\t{}\t{}", t.subject, t.predicate, t.object).unwrap()
                }
                KbFormat::Jsonl => {
                    serde_json::to_writer(&mut out, t).unwrap();
                    out.push(b'\n');
                }
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn load_kb(path: impl AsRef<Path>, format: KbFormat) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let triple = match format {
            KbFormat::Tsv => {
                if raw.starts_with('#') {
                    continue;
                }
                let fields: Vec<&str> = raw.split('\t').collect();
                if fields.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected 3 tab-separated fields, found {}", fields.len()),
                    ));
                }
                Triple::new(fields[0], fields[1], fields[2])
            }
            KbFormat::Jsonl => {
                let row: Triple = serde_json::from_str(raw)
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                Triple::new(&row.subject, &row.predicate, &row.object)
            }
        }
        .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        triples.push(triple);
    }
    if triples.is_empty() {
        return Err(Error::EmptyKb { path: path.into() });
    }
    let kb = KnowledgeBase::from_triples(triples);
    if kb.duplicates_dropped() > 0 {
        log::warn!(
            "{}: dropped {} duplicate triples",
            path.display(),
            kb.duplicates_dropped()
        );
    }
    Ok(kb)
}
