//! ARPA text format.
//!
//! ```text
//! \data\
//! ngram 1=4
//! ngram 2=5
//!
//! \1-grams:
//! -0.6020600<TAB>a<TAB>-0.3010300
//! ...
//! \end\
//! ```
//!
//! Fields are tab-separated; words inside an n-gram are separated by single spaces.
//! The highest order carries no backoff column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexSet;

use super::{NgramEntry, NgramModel, BOS, EOS};
use crate::{Error, Result};

pub fn export_arpa(model: &NgramModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_arpa(model, &mut file).map_err(|e| Error::io(path, e))
}

pub fn write_arpa(model: &NgramModel, mut out: impl Write) -> std::io::Result<()> {
    let entries = model.entries();
    let mut text = String::from("\n\\data\\\n");
    for (k, rows) in entries.iter().enumerate() {
        writeln!(text, "ngram {}={}", k + 1, rows.len()).unwrap();
    }
    for (k, rows) in entries.iter().enumerate() {
        let order = k + 1;
        writeln!(text, "\n\\{order}-grams:").unwrap();
        for (words, e) in rows {
            write!(text, "{:.7}\t{}", e.logprob, words.join(" ")).unwrap();
            if order < model.order() {
                write!(text, "\t{:.7}", e.backoff).unwrap();
            }
            text.push('\n');
        }
    }
    text.push_str("\n\\end\\\n");
    out.write_all(text.as_bytes())
}

enum Section {
    Preamble,
    Data,
    Grams(usize),
    End,
}

pub fn import_arpa(path: impl AsRef<Path>) -> Result<NgramModel> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::parse(path, line, msg);

    let mut declared: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<(Vec<String>, NgramEntry)>> = Vec::new();
    let mut section = Section::Preamble;

    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('\\') {
            section = match (line, &section) {
                ("\\data\\", Section::Preamble) => Section::Data,
                ("\\end\\", Section::Data | Section::Grams(_)) => Section::End,
                (_, Section::Data | Section::Grams(_)) => {
                    let order = line
                        .strip_prefix('\\')
                        .and_then(|l| l.strip_suffix("-grams:"))
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| {
                            err(line_no, format!("malformed section header {line:?}"))
                        })?;
                    if order != rows.len() + 1 || order > declared.len() {
                        return Err(err(line_no, format!("unexpected section {line:?}")));
                    }
                    rows.push(Vec::new());
                    Section::Grams(order)
                }
                _ => return Err(err(line_no, format!("unexpected header {line:?}"))),
            };
            continue;
        }
        match section {
            Section::Preamble | Section::End => continue,
            Section::Data => {
                let (k, n) = line
                    .strip_prefix("ngram ")
                    .and_then(|l| l.split_once('='))
                    .and_then(|(k, n)| {
                        Some((
                            k.trim().parse::<usize>().ok()?,
                            n.trim().parse::<usize>().ok()?,
                        ))
                    })
                    .ok_or_else(|| err(line_no, format!("malformed count line {line:?}")))?;
                if k != declared.len() + 1 {
                    return Err(err(line_no, format!("count for order {k} out of sequence")));
                }
                declared.push(n);
            }
            Section::Grams(order) => {
                let row = parse_row(line, order, order == declared.len())
                    .ok_or_else(|| err(line_no, format!("malformed {order}-gram line {line:?}")))?;
                rows[order - 1].push(row);
            }
        }
    }

    if !matches!(section, Section::End) {
        return Err(err(
            content.lines().count(),
            "missing \\end\\ marker".into(),
        ));
    }
    if declared.is_empty() {
        return Err(err(1, "no \\data\\ counts".into()));
    }
    if rows.len() != declared.len() {
        return Err(err(
            content.lines().count(),
            format!("declared {} orders, found {}", declared.len(), rows.len()),
        ));
    }
    for (k, (found, want)) in rows.iter().map(Vec::len).zip(&declared).enumerate() {
        if found != *want {
            return Err(err(
                1,
                format!("{}-grams: declared {want}, found {found}", k + 1),
            ));
        }
    }

    let mut vocab = IndexSet::new();
    for (words, _) in &rows[0] {
        vocab.insert(words[0].clone());
    }
    for reserved in [BOS, EOS] {
        if !vocab.contains(reserved) {
            return Err(err(1, format!("unigram section lacks {reserved}")));
        }
    }
    let order = declared.len();
    let mut levels: Vec<HashMap<Vec<u32>, NgramEntry>> = vec![HashMap::new(); order];
    for (k, level_rows) in rows.into_iter().enumerate() {
        for (words, entry) in level_rows {
            let ids: Option<Vec<u32>> = words
                .iter()
                .map(|w| vocab.get_index_of(w.as_str()).map(|i| i as u32))
                .collect();
            let ids = ids.ok_or_else(|| {
                err(
                    1,
                    format!(
                        "{}-gram {words:?} uses a word missing from the unigrams",
                        k + 1
                    ),
                )
            })?;
            levels[k].insert(ids, entry);
        }
    }
    Ok(NgramModel::from_parts(order, vocab, levels))
}

fn parse_row(line: &str, order: usize, highest: bool) -> Option<(Vec<String>, NgramEntry)> {
    let fields: Vec<&str> = line.split('\t').collect();
    let (logprob, words, backoff) = if fields.len() >= 2 {
        let words: Vec<&str> = fields[1].split_whitespace().collect();
        (fields[0], words, fields.get(2).copied())
    } else {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < order + 1 {
            return None;
        }
        (
            parts[0],
            parts[1..=order].to_vec(),
            parts.get(order + 1).copied(),
        )
    };
    if words.len() != order || fields.len() > 3 {
        return None;
    }
    let logprob: f64 = logprob.trim().parse().ok()?;
    let backoff: f64 = match backoff {
        Some(b) if !highest => b.trim().parse().ok()?,
        Some(_) => return None,
        None => 0.0,
    };
    if !logprob.is_finite() || !backoff.is_finite() {
        return None;
    }
    Some((
        words.into_iter().map(str::to_owned).collect(),
        NgramEntry { logprob, backoff },
    ))
}
