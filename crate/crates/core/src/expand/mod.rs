//! Iterative question expansion through a suggestion provider.
//!
//! Starting from the seed set, the loop pops one question at a time, submits it as a
//! query and appends every suggestion not already collected. Collected suggestions are
//! queued in turn. The loop stops when the queue is empty or `max_iterations` queries
//! have been issued.

mod cache;
mod http;
mod provider;

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use cache::CachedProvider;
pub use http::{HttpProvider, ResponseFormat};
pub use provider::{CorpusProvider, FailingProvider, StaticProvider, SuggestionProvider};

use crate::template::Question;
use crate::text::normalize;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueDiscipline {
    #[default]
    Fifo,
    Lifo,
}

impl std::str::FromStr for QueueDiscipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fifo" => Ok(QueueDiscipline::Fifo),
            "lifo" => Ok(QueueDiscipline::Lifo),
            other => Err(Error::Config(format!("unknown queue discipline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Cap on queries issued, counting failed ones.
    pub max_iterations: usize,
    pub queue_discipline: QueueDiscipline,
    pub per_query_limit: usize,
    /// Minimum delay between live provider calls.
    pub rate_limit_ms: u64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            max_iterations: 1000,
            queue_discipline: QueueDiscipline::Fifo,
            per_query_limit: 10,
            rate_limit_ms: 0,
        }
    }
}

impl ExpansionConfig {
    pub fn unlimited() -> Self {
        ExpansionConfig {
            max_iterations: usize::MAX,
            per_query_limit: usize::MAX,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.per_query_limit == 0 {
            return Err(Error::Config("per_query_limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one expansion run. `questions` starts with the seeds, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub questions: Vec<Question>,
    pub queries_issued: usize,
    pub failed_queries: usize,
}

impl Expansion {
    pub fn new_questions(&self) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(|q| !q.is_seed())
    }

    /// Every issued query failed, so nothing beyond the seeds was collected.
    pub fn all_failed(&self) -> bool {
        self.queries_issued > 0 && self.failed_queries == self.queries_issued
    }
}

/// The live state of the loop: collected set, frontier and iteration counter.
struct ExpansionState {
    expanded: Vec<Question>,
    keys: HashSet<String>,
    frontier: VecDeque<usize>,
    iterations_done: usize,
}

impl ExpansionState {
    fn new(seeds: &[Question]) -> Self {
        let mut state = ExpansionState {
            expanded: Vec::with_capacity(seeds.len()),
            keys: HashSet::with_capacity(seeds.len()),
            frontier: VecDeque::with_capacity(seeds.len()),
            iterations_done: 0,
        };
        for seed in seeds {
            if !state.keys.insert(seed.text.clone()) {
                log::warn!("duplicate seed {:?} ignored", seed.text);
                continue;
            }
            state.frontier.push_back(state.expanded.len());
            state.expanded.push(seed.clone());
        }
        state
    }

    fn pop(&mut self, discipline: QueueDiscipline) -> Option<usize> {
        match discipline {
            QueueDiscipline::Fifo => self.frontier.pop_front(),
            QueueDiscipline::Lifo => self.frontier.pop_back(),
        }
    }
}

pub fn expand(
    seeds: &[Question],
    provider: &dyn SuggestionProvider,
    config: &ExpansionConfig,
) -> Result<Expansion> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("expansion needs at least one seed".into()));
    }
    let mut state = ExpansionState::new(seeds);
    let mut failed = 0;

    while state.iterations_done < config.max_iterations {
        let Some(current) = state.pop(config.queue_discipline) else {
            break;
        };
        state.iterations_done += 1;
        let query = state.expanded[current].text.clone();
        let generation = state.expanded[current].generation + 1;

        let suggestions = match provider.suggest(&query) {
            Ok(s) => s,
            Err(e) if e.is_transport() => {
                log::warn!("skipping query {query:?}: {e}");
                failed += 1;
                continue;
            }
            Err(e) => return Err(e),
        };

        let fresh = suggestions
            .iter()
            .map(|s| normalize(s))
            .filter(|s| !s.is_empty())
            .take(config.per_query_limit);
        for text in fresh {
            if state.keys.contains(&text) {
                continue;
            }
            state.keys.insert(text.clone());
            state.frontier.push_back(state.expanded.len());
            state
                .expanded
                .push(Question::expanded(&text, generation, &query));
        }
    }

    let expansion = Expansion {
        questions: state.expanded,
        queries_issued: state.iterations_done,
        failed_queries: failed,
    };
    if expansion.all_failed() {
        log::warn!(
            "all {} provider queries failed; returning the seed set",
            expansion.queries_issued
        );
    }
    Ok(expansion)
}
