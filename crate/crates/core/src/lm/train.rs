use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::{IndexMap, IndexSet};

use super::{NgramEntry, NgramModel, BOS, EOS, LOG10_ZERO, UNK};
use crate::{Error, Result};

/// Discount used for an order whose adjusted counts contain no singletons.
pub(crate) const FALLBACK_DISCOUNT: f64 = 0.5;

/// Trains on a file with one pre-normalized sentence per line.
pub fn train_ngram(path: impl AsRef<Path>, order: usize, min_count: u64) -> Result<NgramModel> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    train(content.lines(), order, min_count).map_err(|e| match e {
        Error::EmptyCorpus { .. } => Error::EmptyCorpus { path: path.into() },
        other => other,
    })
}

pub fn train_ngram_from_sentences<S: AsRef<str>>(
    sentences: impl IntoIterator<Item = S>,
    order: usize,
    min_count: u64,
) -> Result<NgramModel> {
    train(sentences, order, min_count)
}

/// Absolute discount `n1 / (n1 + 2 n2)` from a count-of-counts histogram.
pub(crate) fn discount(counts: impl Iterator<Item = u64>) -> f64 {
    let (mut n1, mut n2) = (0u64, 0u64);
    for c in counts {
        match c {
            1 => n1 += 1,
            2 => n2 += 1,
            _ => {}
        }
    }
    if n1 == 0 {
        FALLBACK_DISCOUNT
    } else {
        n1 as f64 / (n1 + 2 * n2) as f64
    }
}

fn train<S: AsRef<str>>(
    sentences: impl IntoIterator<Item = S>,
    order: usize,
    min_count: u64,
) -> Result<NgramModel> {
    if !(1..=5).contains(&order) {
        return Err(Error::Config(format!(
            "n-gram order must be in 1..=5, got {order}"
        )));
    }
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let owned: Vec<S> = sentences.into_iter().collect();
    let sentences: Vec<Vec<&str>> = owned
        .iter()
        .map(|s| s.as_ref().split_whitespace().collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus {
            path: "<memory>".into(),
        });
    }
    let longest = sentences.iter().map(Vec::len).max().unwrap_or(0);
    if order > longest + 1 {
        log::warn!("order {order} exceeds the longest sentence ({longest} tokens) plus one");
    }

    let mut word_counts: IndexMap<&str, u64> = IndexMap::new();
    for s in &sentences {
        for w in s {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut vocab: IndexSet<String> = [UNK, BOS, EOS].iter().map(|s| s.to_string()).collect();
    for (w, c) in &word_counts {
        if *c >= min_count {
            vocab.insert((*w).to_owned());
        }
    }
    let id = |w: &str| vocab.get_index_of(w).unwrap_or(0) as u32;
    let bos = id(BOS);
    let eos = id(EOS);

    // raw[k - 1]: k-grams ending at a predicted position.
    let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    for s in &sentences {
        let mut seq = Vec::with_capacity(s.len() + 2);
        seq.push(bos);
        seq.extend(s.iter().map(|w| id(w)));
        seq.push(eos);
        for j in 1..seq.len() {
            for k in 1..=order.min(j + 1) {
                *raw[k - 1].entry(seq[j + 1 - k..=j].to_vec()).or_default() += 1;
            }
        }
    }

    // Highest order and <s>-initial n-grams keep raw counts; everything else uses the
    // number of distinct left extensions.
    let mut adjusted: Vec<HashMap<Vec<u32>, u64>> = Vec::with_capacity(order);
    for k in 1..=order {
        let level = if k == order {
            raw[k - 1].clone()
        } else {
            let mut level: HashMap<Vec<u32>, u64> = raw[k - 1]
                .iter()
                .filter(|(g, _)| g[0] == bos)
                .map(|(g, c)| (g.clone(), *c))
                .collect();
            for g in raw[k].keys() {
                if g[1] != bos {
                    *level.entry(g[1..].to_vec()).or_default() += 1;
                }
            }
            level
        };
        adjusted.push(level);
    }

    let discounts: Vec<f64> = adjusted
        .iter()
        .map(|l| discount(l.values().copied()))
        .collect();
    let mut levels: Vec<HashMap<Vec<u32>, NgramEntry>> = vec![HashMap::new(); order];
    let mut linear: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); order];

    // Unigrams interpolate with the uniform distribution over predictable words.
    let d = discounts[0];
    let total: u64 = adjusted[0].values().sum();
    let gamma = d * adjusted[0].len() as f64 / total as f64;
    let uniform = 1.0 / (vocab.len() - 1) as f64;
    for w in 0..vocab.len() as u32 {
        if w == bos {
            continue;
        }
        let c = adjusted[0].get(&vec![w]).copied().unwrap_or(0) as f64;
        let p = (c - d).max(0.0) / total as f64 + gamma * uniform;
        linear[0].insert(vec![w], p);
    }

    for k in 2..=order {
        let d = discounts[k - 1];
        let mut per_context: HashMap<&[u32], (u64, u64)> = HashMap::new();
        for (g, c) in &adjusted[k - 1] {
            let e = per_context.entry(&g[..k - 1]).or_default();
            e.0 += c;
            e.1 += 1;
        }
        for (g, c) in &adjusted[k - 1] {
            let (total, types) = per_context[&g[..k - 1]];
            let gamma = d * types as f64 / total as f64;
            let lower = linear[k - 2][&g[1..]];
            let p = (*c as f64 - d) / total as f64 + gamma * lower;
            linear[k - 1].insert(g.clone(), p);
        }
        for (ctx, (total, types)) in per_context {
            let gamma = d * types as f64 / total as f64;
            let entry = levels[k - 2].entry(ctx.to_vec()).or_insert(NgramEntry {
                logprob: LOG10_ZERO,
                backoff: 0.0,
            });
            entry.backoff = gamma.log10();
        }
    }

    for (k, probs) in linear.into_iter().enumerate() {
        for (g, p) in probs {
            levels[k]
                .entry(g)
                .or_insert(NgramEntry {
                    logprob: 0.0,
                    backoff: 0.0,
                })
                .logprob = p.log10();
        }
    }
    // <s> is never predicted but must exist as a unigram.
    levels[0].entry(vec![bos]).or_insert(NgramEntry {
        logprob: LOG10_ZERO,
        backoff: 0.0,
    });

    Ok(NgramModel::from_parts(order, vocab, levels))
}
