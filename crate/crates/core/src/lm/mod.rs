//! Interpolated Kneser-Ney n-gram language model and the averaged fluency score.
//!
//! Models are stored in backoff form: every observed n-gram carries its full
//! interpolated log10 probability and every context its log10 interpolation weight.
//! This is exactly the ARPA representation, so [`export_arpa`] and [`import_arpa`]
//! lose nothing beyond textual precision.

mod arpa;
mod train;

use std::collections::HashMap;

use indexmap::IndexSet;
use serde::Serialize;

pub use arpa::{export_arpa, import_arpa, write_arpa};
pub use train::{train_ngram, train_ngram_from_sentences};

use crate::template::Question;
use crate::text::normalize;
use crate::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// log10 probability ARPA files use for events that cannot occur, such as `<s>`.
pub const LOG10_ZERO: f64 = -99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    pub logprob: f64,
    /// Weight applied when this n-gram is used as a context and the extension is unseen.
    pub backoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    vocab: IndexSet<String>,
    /// `levels[k - 1]` holds the k-grams, keyed by word ids.
    levels: Vec<HashMap<Vec<u32>, NgramEntry>>,
}

/// Length-normalised sentence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluencyScore {
    /// log10 probability of the sentence including the end-of-sentence event.
    pub logprob: f64,
    /// Word count, excluding `<s>` and `</s>`.
    pub length: usize,
    pub avg: f64,
}

impl FluencyScore {
    fn new(logprob: f64, length: usize) -> Self {
        FluencyScore {
            logprob,
            length,
            avg: logprob / length as f64,
        }
    }
}

impl NgramModel {
    pub(crate) fn from_parts(
        order: usize,
        vocab: IndexSet<String>,
        levels: Vec<HashMap<Vec<u32>, NgramEntry>>,
    ) -> Self {
        debug_assert_eq!(levels.len(), order);
        NgramModel {
            order,
            vocab,
            levels,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &IndexSet<String> {
        &self.vocab
    }

    pub fn ngram_count(&self, k: usize) -> usize {
        self.levels.get(k - 1).map_or(0, HashMap::len)
    }

    /// Stored entry for an n-gram given as words.
    pub fn entry(&self, words: &[&str]) -> Option<NgramEntry> {
        let ids: Option<Vec<u32>> = words.iter().map(|w| self.id(w)).collect();
        let ids = ids?;
        self.levels
            .get(ids.len().checked_sub(1)?)?
            .get(&ids)
            .copied()
    }

    /// Every stored n-gram with its entry, grouped by order and sorted by word ids.
    pub fn entries(&self) -> Vec<Vec<(Vec<&str>, NgramEntry)>> {
        self.levels
            .iter()
            .map(|level| {
                let mut rows: Vec<(&Vec<u32>, &NgramEntry)> = level.iter().collect();
                rows.sort_by(|a, b| a.0.cmp(b.0));
                rows.into_iter()
                    .map(|(ids, e)| (ids.iter().map(|&i| self.word(i)).collect(), *e))
                    .collect()
            })
            .collect()
    }

    fn id(&self, word: &str) -> Option<u32> {
        self.vocab.get_index_of(word).map(|i| i as u32)
    }

    fn word(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    fn id_or_unk(&self, word: &str) -> Result<u32> {
        self.id(word)
            .or_else(|| self.id(UNK))
            .ok_or_else(|| Error::Oov(word.to_owned()))
    }

    /// Words that can be predicted: the vocabulary minus `<s>`.
    pub fn predictable_words(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str).filter(|w| *w != BOS)
    }

    /// Contexts observed in the model: the empty context plus every prefix of a stored
    /// n-gram of order two or more. Sorted by word ids within each order.
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new()];
        for level in self.levels.iter().skip(1) {
            let mut prefixes: Vec<&[u32]> = level.keys().map(|k| &k[..k.len() - 1]).collect();
            prefixes.sort();
            prefixes.dedup();
            out.extend(
                prefixes
                    .into_iter()
                    .map(|p| p.iter().map(|&i| self.word(i)).collect()),
            );
        }
        out
    }

    fn cond_log10_ids(&self, history: &[u32], word: u32) -> f64 {
        let keep = history.len().min(self.order - 1);
        let history = &history[history.len() - keep..];
        let mut backoff = 0.0;
        let mut key = Vec::with_capacity(keep + 1);
        for start in 0..=history.len() {
            let ctx = &history[start..];
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.levels[ctx.len()].get(&key) {
                return backoff + e.logprob;
            }
            if !ctx.is_empty() {
                if let Some(c) = self.levels[ctx.len() - 1].get(ctx) {
                    backoff += c.backoff;
                }
            }
        }
        backoff + LOG10_ZERO
    }

    /// log10 P(word | context); `context` is oldest-first. Unknown words map to `<unk>`.
    pub fn log10_prob(&self, context: &[&str], word: &str) -> Result<f64> {
        let history = context
            .iter()
            .map(|w| self.id_or_unk(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.cond_log10_ids(&history, self.id_or_unk(word)?))
    }

    pub fn prob(&self, context: &[&str], word: &str) -> Result<f64> {
        Ok(10f64.powf(self.log10_prob(context, word)?))
    }

    /// Scores the normalized, space-tokenized text padded with `<s>` and `</s>`.
    pub fn score(&self, text: &str) -> Result<FluencyScore> {
        let text = normalize(text);
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        let bos = self.id(BOS).ok_or_else(|| Error::Oov(BOS.into()))?;
        let eos = self.id(EOS).ok_or_else(|| Error::Oov(EOS.into()))?;
        let mut ids = vec![bos];
        for token in text.split(' ') {
            ids.push(self.id_or_unk(token)?);
        }
        let length = ids.len() - 1;
        ids.push(eos);
        let logprob = (1..ids.len())
            .map(|i| self.cond_log10_ids(&ids[..i], ids[i]))
            .sum();
        Ok(FluencyScore::new(logprob, length))
    }
}

pub fn sentence_logprob(model: &NgramModel, question: &Question) -> Result<FluencyScore> {
    model.score(&question.text)
}
