//! Question templates, the `Question` record and seed generation.
//!
//! A template is a question pattern attached to one predicate. `#X#` stands for the
//! subject of a matching triple and `#Y#` for its object, e.g. `how to use #X#`
//! applied to `<jigsaw, performsActivity, CurveCut>` yields `how to use jigsaw`.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::kb::{KnowledgeBase, Triple};
use crate::text::normalize;
use crate::{Error, Exec, Result};

pub const SUBJECT_SLOT: &str = "#X#";
pub const OBJECT_SLOT: &str = "#Y#";

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[A-Za-z0-9_]+#").unwrap());
static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[XY]#").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub predicate: String,
    pub pattern: String,
}

impl QuestionTemplate {
    pub fn new(predicate: &str, pattern: &str) -> Result<Self> {
        let predicate = predicate.trim();
        let pattern = pattern.trim();
        if predicate.is_empty() {
            return Err(Error::Template("empty predicate".into()));
        }
        if pattern.is_empty() {
            return Err(Error::Template("empty pattern".into()));
        }
        let mut seen = HashSet::new();
        for m in PLACEHOLDER.find_iter(pattern) {
            let token = m.as_str();
            if token != SUBJECT_SLOT && token != OBJECT_SLOT {
                return Err(Error::Template(format!("unknown placeholder {token}")));
            }
            if !seen.insert(token) {
                return Err(Error::Template(format!("placeholder {token} repeated")));
            }
        }
        Ok(QuestionTemplate {
            predicate: predicate.to_owned(),
            pattern: pattern.to_owned(),
        })
    }

    pub fn has_subject_slot(&self) -> bool {
        self.pattern.contains(SUBJECT_SLOT)
    }

    pub fn has_object_slot(&self) -> bool {
        self.pattern.contains(OBJECT_SLOT)
    }

    /// Object-only templates are accepted but reported during loading.
    pub fn is_object_only(&self) -> bool {
        self.has_object_slot() && !self.has_subject_slot()
    }

    /// Substitutes the slots and normalizes the result.
    pub fn instantiate(&self, subject: &str, object: &str) -> String {
        let filled = SLOT.replace_all(&self.pattern, |caps: &regex::Captures| {
            if &caps[0] == SUBJECT_SLOT {
                subject.to_owned()
            } else {
                object.to_owned()
            }
        });
        normalize(&filled)
    }
}

fn is_comment(line: &str) -> bool {
    let mut chars = line.chars();
    match (chars.next(), chars.next()) {
        (Some('#'), None) => true,
        (Some('#'), Some(c)) => c == '#' || c.is_whitespace(),
        _ => false,
    }
}

/// Reads `predicate<TAB>pattern` rows in file order.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<QuestionTemplate>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut templates = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || is_comment(raw) {
            continue;
        }
        let (predicate, pattern) = raw
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected predicate<TAB>pattern"))?;
        let template = QuestionTemplate::new(predicate, pattern)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if template.is_object_only() {
            log::warn!(
                "{}:{line_no}: template {:?} uses only the object slot",
                path.display(),
                template.pattern
            );
        }
        templates.push(template);
    }
    Ok(templates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Expanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    /// The template and triple a seed was instantiated from.
    Template {
        predicate: String,
        pattern: String,
        subject: String,
        object: String,
    },
    /// The query whose suggestions contained an expanded question.
    Query { query: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    pub provenance: Provenance,
    pub generation: u32,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flu_score: Option<f64>,
}

impl Question {
    pub fn seed(template: &QuestionTemplate, triple: &Triple) -> Self {
        Question {
            text: template.instantiate(&triple.subject, &triple.object),
            provenance: Provenance::Seed,
            generation: 0,
            source: Source::Template {
                predicate: template.predicate.clone(),
                pattern: template.pattern.clone(),
                subject: triple.subject.clone(),
                object: triple.object.clone(),
            },
            rel_score: None,
            flu_score: None,
        }
    }

    /// `text` is normalized here; `generation` must be at least 1.
    pub fn expanded(text: &str, generation: u32, query: &str) -> Self {
        debug_assert!(generation >= 1);
        Question {
            text: normalize(text),
            provenance: Provenance::Expanded,
            generation,
            source: Source::Query {
                query: query.to_owned(),
            },
            rel_score: None,
            flu_score: None,
        }
    }

    pub fn is_seed(&self) -> bool {
        self.provenance == Provenance::Seed
    }
}

/// Instantiates every template against every triple sharing its predicate.
///
/// Triples are visited in KB order and, for each triple, its templates in file order.
/// Output is deduplicated by normalized text with the first occurrence kept.
pub fn generate_seeds(kb: &KnowledgeBase, templates: &[QuestionTemplate]) -> Vec<Question> {
    generate_seeds_with(Exec::default(), kb, templates)
}

pub fn generate_seeds_with(
    exec: Exec,
    kb: &KnowledgeBase,
    templates: &[QuestionTemplate],
) -> Vec<Question> {
    let mut by_predicate: IndexMap<&str, Vec<&QuestionTemplate>> = IndexMap::new();
    for t in templates {
        by_predicate
            .entry(t.predicate.as_str())
            .or_default()
            .push(t);
    }
    let per_triple = exec.map(kb.triples(), |triple| {
        by_predicate
            .get(triple.predicate.as_str())
            .map(|ts| {
                ts.iter()
                    .map(|t| Question::seed(t, triple))
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default()
    });
    let mut seen = HashSet::new();
    per_triple
        .into_iter()
        .flatten()
        .filter(|q| !q.text.is_empty() && seen.insert(q.text.clone()))
        .collect()
}

pub fn write_questions(path: impl AsRef<Path>, questions: &[Question]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_questions_to(&mut out, questions).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_questions_to(mut out: impl Write, questions: &[Question]) -> std::io::Result<()> {
    for q in questions {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_questions(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut questions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let q =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        questions.push(q);
    }
    Ok(questions)
}
