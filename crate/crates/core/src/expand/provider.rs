use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::text::{normalize, tokens};
use crate::{Error, Exec, Result};

/// Maps a query to an ordered list of related questions.
///
/// Implementations must be deterministic for a fixed state. Recoverable failures are
/// reported as [`Error::Transport`]; the expansion loop skips those queries.
pub trait SuggestionProvider {
    fn suggest(&self, query: &str) -> Result<Vec<String>>;
}

impl<P: SuggestionProvider + ?Sized> SuggestionProvider for &P {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        (**self).suggest(query)
    }
}

impl<P: SuggestionProvider + ?Sized> SuggestionProvider for Box<P> {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        (**self).suggest(query)
    }
}

/// Fixed query → suggestions map. Unknown queries yield no suggestions.
#[derive(Debug, Clone, Default)]
pub struct StaticProvider {
    map: HashMap<String, Vec<String>>,
}

impl StaticProvider {
    pub fn new(map: HashMap<String, Vec<String>>) -> Self {
        StaticProvider { map }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>) -> Self {
        let map = pairs
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v.iter().map(|s| (*s).to_owned()).collect()))
            .collect();
        StaticProvider { map }
    }
}

impl SuggestionProvider for StaticProvider {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        Ok(self.map.get(query).cloned().unwrap_or_default())
    }
}

/// Fails every query with a transport error. Backs cache-only replay.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingProvider;

impl SuggestionProvider for FailingProvider {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        Err(Error::Transport {
            query: query.to_owned(),
            message: "no live provider configured".into(),
        })
    }
}

/// Offline provider over a corpus of questions, one per line.
///
/// A query returns the `k` corpus lines with the highest Jaccard similarity between
/// token sets, skipping lines with no shared token and the query itself. Ties keep
/// corpus order.
#[derive(Debug, Clone)]
pub struct CorpusProvider {
    lines: Vec<(String, HashSet<String>)>,
    k: usize,
    exec: Exec,
}

impl CorpusProvider {
    pub fn from_file(path: impl AsRef<Path>, k: usize) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_lines(content.lines(), k)
    }

    pub fn from_lines<S: AsRef<str>>(lines: impl IntoIterator<Item = S>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("corpus provider needs k >= 1".into()));
        }
        let mut seen = HashSet::new();
        let lines = lines
            .into_iter()
            .map(|l| normalize(l.as_ref()))
            .filter(|l| !l.is_empty() && seen.insert(l.clone()))
            .map(|l| {
                let toks = tokens(&l).into_iter().collect();
                (l, toks)
            })
            .collect();
        Ok(CorpusProvider {
            lines,
            k,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.iter().filter(|t| b.contains(*t)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

impl SuggestionProvider for CorpusProvider {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        let query = normalize(query);
        let query_tokens: HashSet<String> = tokens(&query).into_iter().collect();
        let scores = self.exec.map(&self.lines, |(text, toks)| {
            if *text == query {
                0.0
            } else {
                jaccard(&query_tokens, toks)
            }
        });
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked
            .into_iter()
            .take(self.k)
            .map(|(i, _)| self.lines[i].0.clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_ranking() {
        let p = CorpusProvider::from_lines(["how to use jigsaw", "how to change jigsaw blade"], 5)
            .unwrap();
        assert_eq!(
            p.suggest("how to use jigsaw").unwrap(),
            ["how to change jigsaw blade"]
        );
        let a: HashSet<String> = tokens("how to use jigsaw").into_iter().collect();
        let b: HashSet<String> = tokens("how to change jigsaw blade").into_iter().collect();
        assert_eq!(jaccard(&a, &b), 0.5);
    }

    #[test]
    fn disjoint_query_gets_nothing() {
        let p = CorpusProvider::from_lines(["how to use jigsaw"], 5).unwrap();
        assert!(p.suggest("banana bread recipe").unwrap().is_empty());
    }

    #[test]
    fn ties_keep_corpus_order() {
        let p = CorpusProvider::from_lines(["drill bits cheap", "drill press cheap", "saw"], 1)
            .unwrap();
        assert_eq!(p.suggest("drill cheap x").unwrap(), ["drill bits cheap"]);
        let seq = p.clone().with_exec(Exec::Sequential);
        assert_eq!(
            seq.suggest("drill cheap x").unwrap(),
            p.suggest("drill cheap x").unwrap()
        );
    }

    #[test]
    fn empty_corpus() {
        let p = CorpusProvider::from_lines(Vec::<String>::new(), 3).unwrap();
        assert!(p.is_empty());
        assert!(p.suggest("anything").unwrap().is_empty());
    }
}
