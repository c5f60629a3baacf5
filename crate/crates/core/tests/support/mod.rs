//! Independent reference implementations shared by the integration tests and the
//! acceptance suite. Nothing here calls into the code under test except for
//! constructing inputs.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

// ---------------------------------------------------------------------------
// Interpolated Kneser-Ney, evaluated straight from the counting definitions.
// ---------------------------------------------------------------------------

/// Brute-force Kneser-Ney: every count is recomputed by scanning the padded
/// sentences, and probabilities come from the recursive interpolation formula.
pub struct KnOracle {
    order: usize,
    padded: Vec<Vec<String>>,
    /// Predictable vocabulary: every kept word plus `<unk>` and `</s>`.
    pub vocab: Vec<String>,
    discounts: Vec<f64>,
    /// Memo of `adjusted`; the counts themselves are still found by scanning.
    memo: RefCell<HashMap<Vec<String>, u64>>,
}

impl KnOracle {
    pub fn new(sentences: &[&str], order: usize, min_count: u64) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for w in s.split_whitespace() {
                *freq.entry(w).or_default() += 1;
            }
        }
        let keep = |w: &str| freq.get(w).is_some_and(|c| *c >= min_count);
        let padded: Vec<Vec<String>> = sentences
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                let mut v = vec![BOS.to_string()];
                v.extend(s.split_whitespace().map(|w| {
                    if keep(w) {
                        w.to_string()
                    } else {
                        UNK.to_string()
                    }
                }));
                v.push(EOS.to_string());
                v
            })
            .collect();
        let mut vocab: BTreeSet<String> = [UNK, EOS].iter().map(|s| s.to_string()).collect();
        vocab.extend(freq.keys().filter(|w| keep(w)).map(|w| w.to_string()));
        let mut oracle = KnOracle {
            order,
            padded,
            vocab: vocab.into_iter().collect(),
            discounts: Vec::new(),
            memo: RefCell::new(HashMap::new()),
        };
        oracle.discounts = (1..=order).map(|k| oracle.discount_of(k)).collect();
        oracle
    }

    /// Occurrences of `gram` ending at a position after `<s>`.
    fn raw(&self, gram: &[String]) -> u64 {
        let n = gram.len();
        let mut c = 0;
        for s in &self.padded {
            for end in 1..s.len() {
                if end + 1 >= n && s[end + 1 - n..=end] == *gram {
                    c += 1;
                }
            }
        }
        c
    }

    /// Every distinct k-gram seen ending after `<s>`.
    fn grams(&self, k: usize) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        for s in &self.padded {
            for end in 1..s.len() {
                if end + 1 >= k {
                    out.insert(s[end + 1 - k..=end].to_vec());
                }
            }
        }
        out
    }

    /// Raw count at the top order or for `<s>`-initial grams, otherwise the number
    /// of distinct words seen immediately to the left.
    fn adjusted(&self, gram: &[String]) -> u64 {
        if let Some(c) = self.memo.borrow().get(gram) {
            return *c;
        }
        let c = self.scan_adjusted(gram);
        self.memo.borrow_mut().insert(gram.to_vec(), c);
        c
    }

    fn scan_adjusted(&self, gram: &[String]) -> u64 {
        if gram.len() == self.order || gram[0] == BOS {
            return self.raw(gram);
        }
        let mut left: HashSet<&str> = HashSet::new();
        for s in &self.padded {
            for start in 1..s.len() {
                if start + gram.len() <= s.len() && s[start..start + gram.len()] == *gram {
                    left.insert(&s[start - 1]);
                }
            }
        }
        left.len() as u64
    }

    fn discount_of(&self, k: usize) -> f64 {
        let counts: Vec<u64> = self.grams(k).iter().map(|g| self.adjusted(g)).collect();
        let n1 = counts.iter().filter(|c| **c == 1).count() as f64;
        let n2 = counts.iter().filter(|c| **c == 2).count() as f64;
        if n1 == 0.0 {
            0.5
        } else {
            n1 / (n1 + 2.0 * n2)
        }
    }

    pub fn discount(&self, k: usize) -> f64 {
        self.discounts[k - 1]
    }

    fn map_word(&self, w: &str) -> String {
        if w == BOS || self.vocab.iter().any(|v| v == w) {
            w.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// P(word | context), context oldest-first.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let keep = context.len().min(self.order - 1);
        let ctx: Vec<String> = context[context.len() - keep..]
            .iter()
            .map(|w| self.map_word(w))
            .collect();
        self.interpolated(&ctx, &self.map_word(word))
    }

    fn interpolated(&self, ctx: &[String], word: &str) -> f64 {
        let k = ctx.len() + 1;
        let d = self.discount(k);
        if ctx.is_empty() {
            let total: u64 = self
                .vocab
                .iter()
                .map(|v| self.adjusted(std::slice::from_ref(v)))
                .sum();
            let types = self
                .vocab
                .iter()
                .filter(|v| self.adjusted(&[(*v).clone()]) > 0)
                .count();
            let c = self.adjusted(&[word.to_string()]) as f64;
            let gamma = d * types as f64 / total as f64;
            return (c - d).max(0.0) / total as f64 + gamma / self.vocab.len() as f64;
        }
        let extend = |w: &str| {
            let mut g = ctx.to_vec();
            g.push(w.to_string());
            self.adjusted(&g)
        };
        let total: u64 = self.vocab.iter().map(|v| extend(v)).sum();
        let lower = self.interpolated(&ctx[1..], word);
        if total == 0 {
            return lower;
        }
        let types = self.vocab.iter().filter(|v| extend(v) > 0).count();
        let gamma = d * types as f64 / total as f64;
        (extend(word) as f64 - d).max(0.0) / total as f64 + gamma * lower
    }

    /// Every context of length < order that occurs in the padded corpus.
    pub fn contexts(&self) -> Vec<Vec<String>> {
        let mut out = BTreeSet::new();
        out.insert(Vec::new());
        for s in &self.padded {
            for end in 0..s.len() - 1 {
                for len in 1..self.order {
                    if end + 1 >= len {
                        out.insert(s[end + 1 - len..=end].to_vec());
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// log10 probability of a sentence padded with `<s>` and `</s>`.
    pub fn sentence_log10(&self, sentence: &str) -> f64 {
        let mut seq = vec![BOS.to_string()];
        seq.extend(sentence.split_whitespace().map(str::to_string));
        seq.push(EOS.to_string());
        (1..seq.len())
            .map(|i| {
                let ctx: Vec<&str> = seq[..i].iter().map(String::as_str).collect();
                self.prob(&ctx, &seq[i]).log10()
            })
            .sum()
    }
}

/// Small random corpus: `total` tokens or fewer over a vocabulary of `vocab` words.
pub fn random_corpus(rng: &mut ChaCha8Rng, vocab: usize, total: usize) -> Vec<String> {
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    let mut out = Vec::new();
    let mut used = 0;
    while used < total {
        let len = rng.random_range(1..=6).min(total - used);
        out.push(
            (0..len)
                .map(|_| words.choose(rng).unwrap().as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
        used += len;
    }
    out
}

// ---------------------------------------------------------------------------
// Suggestion graphs.
// ---------------------------------------------------------------------------

pub struct SuggestionGraph {
    pub nodes: Vec<String>,
    pub edges: HashMap<String, Vec<String>>,
    pub seeds: Vec<String>,
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> SuggestionGraph {
    let n = rng.random_range(1..=50);
    let nodes: Vec<String> = (0..n).map(|i| format!("question {i}")).collect();
    let density = rng.random_range(0.0..0.12);
    let mut edges = HashMap::new();
    for a in &nodes {
        let out: Vec<String> = nodes
            .iter()
            .filter(|_| rng.random_bool(density))
            .cloned()
            .collect();
        edges.insert(a.clone(), out);
    }
    let seed_count = rng.random_range(1..=n.min(5));
    let mut seeds: Vec<String> = nodes.choose_multiple(rng, seed_count).cloned().collect();
    seeds.sort();
    SuggestionGraph {
        nodes,
        edges,
        seeds,
    }
}

/// Nodes reachable from any seed (seeds included).
pub fn reachable(graph: &SuggestionGraph) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = graph.seeds.iter().cloned().collect();
    let mut stack: Vec<&String> = graph.seeds.iter().collect();
    while let Some(node) = stack.pop() {
        for next in graph.edges.get(node).into_iter().flatten() {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    seen
}

/// Breadth-first order starting from the seeds, matching a FIFO frontier.
pub fn bfs_order(graph: &SuggestionGraph) -> Vec<String> {
    let mut seen: HashSet<&String> = graph.seeds.iter().collect();
    let mut order: Vec<String> = graph.seeds.clone();
    let mut queue: VecDeque<&String> = graph.seeds.iter().collect();
    while let Some(node) = queue.pop_front() {
        for next in graph.edges.get(node).into_iter().flatten() {
            if seen.insert(next) {
                order.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    order
}

// ---------------------------------------------------------------------------
// Vectors.
// ---------------------------------------------------------------------------

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Mean of the vectors of the in-vocabulary tokens, plus how many there were.
pub fn oracle_mean(
    vectors: &HashMap<String, Vec<f64>>,
    dim: usize,
    text: &str,
) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; dim];
    let mut n = 0;
    for w in text.to_lowercase().split_whitespace() {
        if let Some(v) = vectors.get(w) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    (sum, n)
}

/// Synthetic labelled corpus whose domains use disjoint word sets clustered around
/// separate centres, with a few shared function words as noise.
pub struct SyntheticDomains {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    pub train: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
}

pub fn synthetic_domains(
    rng: &mut ChaCha8Rng,
    labels: &[&str],
    words_per_domain: usize,
    train_docs: usize,
    test_docs: usize,
) -> SyntheticDomains {
    let dim = 30;
    let mut vectors = HashMap::new();
    let mut domain_words: Vec<Vec<String>> = Vec::new();
    for label in labels {
        let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let words: Vec<String> = (0..words_per_domain)
            .map(|i| format!("{label}{i}"))
            .collect();
        for w in &words {
            let v = centre
                .iter()
                .map(|c| c + rng.random_range(-0.4..0.4))
                .collect();
            vectors.insert(w.clone(), v);
        }
        domain_words.push(words);
    }
    let shared: Vec<String> = ["the", "a", "of", "and", "to"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for w in &shared {
        vectors.insert(
            w.clone(),
            (0..dim).map(|_| rng.random_range(-0.2..0.2)).collect(),
        );
    }
    let doc = |rng: &mut ChaCha8Rng, d: usize| {
        let len = rng.random_range(4..12);
        (0..len)
            .map(|_| {
                if rng.random_bool(0.25) {
                    shared.choose(rng).unwrap().clone()
                } else {
                    domain_words[d].choose(rng).unwrap().clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let make = |n: usize, rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|i| {
                let d = i % labels.len();
                (labels[d].to_string(), doc(rng, d))
            })
            .collect::<Vec<_>>()
    };
    let train = make(train_docs, rng);
    let test = make(test_docs, rng);
    SyntheticDomains {
        dim,
        vectors,
        train,
        test,
    }
}

/// Exhaustive nearest-centroid labels: centroids are token-weighted means of all
/// training tokens per label, and each test text goes to the highest cosine.
pub fn nearest_centroid_labels(d: &SyntheticDomains) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    let mut sums: HashMap<String, (Vec<f64>, usize)> = HashMap::new();
    for (label, text) in &d.train {
        if !labels.contains(label) {
            labels.push(label.clone());
        }
        let (mean, n) = oracle_mean(&d.vectors, d.dim, text);
        let e = sums
            .entry(label.clone())
            .or_insert_with(|| (vec![0.0; d.dim], 0));
        for (s, m) in e.0.iter_mut().zip(&mean) {
            *s += m * n as f64;
        }
        e.1 += n;
    }
    d.test
        .iter()
        .map(|(_, text)| {
            let (v, _) = oracle_mean(&d.vectors, d.dim, text);
            let mut best = (String::new(), f64::NEG_INFINITY);
            for label in &labels {
                let (sum, n) = &sums[label];
                let centroid: Vec<f64> = sum.iter().map(|x| x / *n as f64).collect();
                let sim = oracle_cosine(&v, &centroid);
                if sim > best.1 {
                    best = (label.clone(), sim);
                }
            }
            best.0
        })
        .collect()
}

/// Plain-text vectors read without the library loader: an optional
/// `count dim` header, then `word v1 ... vd` per line.
pub fn read_vectors(path: &std::path::Path) -> (usize, HashMap<String, Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut map = HashMap::new();
    let mut dim = 0;
    for line in text.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let v: Vec<f64> = fields[1..].iter().map(|x| x.parse().unwrap()).collect();
        dim = v.len();
        map.entry(fields[0].to_string()).or_insert(v);
    }
    (dim, map)
}

/// Pipeline configuration over the bundled toy data, writing to `dir/run`.
pub fn toy_config(dir: &std::path::Path) -> qgen::pipeline::PipelineConfig {
    let toy = toy_dir();
    qgen::pipeline::PipelineConfig {
        kb: toy.join("kb.tsv"),
        templates: toy.join("templates.tsv"),
        lm: toy.join("lm_corpus.txt"),
        embeddings: toy.join("embeddings.txt"),
        corpus: Some(toy.join("suggestions.txt")),
        out_dir: dir.join("run"),
        ..Default::default()
    }
}
