use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::SuggestionProvider;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    query: String,
    suggestions: Vec<String>,
}

struct CacheState {
    records: IndexMap<String, Vec<String>>,
    file: Option<File>,
}

/// Replay layer over another provider, persisted as an append-only JSON-lines file.
///
/// Hits are answered from the file; misses go to the inner provider and successful
/// answers are appended. Inner failures are not cached.
pub struct CachedProvider<P> {
    inner: P,
    path: PathBuf,
    state: Mutex<CacheState>,
    live_calls: AtomicUsize,
}

impl<P: SuggestionProvider> CachedProvider<P> {
    pub fn open(inner: P, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = IndexMap::new();
        if path.exists() {
            let content = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (idx, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(line).map_err(|e| {
                    Error::parse(&path, idx + 1, format!("corrupted cache record: {e}"))
                })?;
                records.entry(record.query).or_insert(record.suggestions);
            }
        }
        Ok(CachedProvider {
            inner,
            path,
            state: Mutex::new(CacheState {
                records,
                file: None,
            }),
            live_calls: AtomicUsize::new(0),
        })
    }

    /// Number of queries forwarded to the inner provider since opening.
    pub fn live_calls(&self) -> usize {
        self.live_calls.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_inner(self) -> P {
        self.inner
    }

    fn append(&self, state: &mut CacheState, record: &CacheRecord) -> Result<()> {
        if state.file.is_none() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            state.file = Some(file);
        }
        let mut line = serde_json::to_vec(record).expect("cache record serializes");
        line.push(b'\n');
        let file = state.file.as_mut().unwrap();
        file.write_all(&line)
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

impl<P: SuggestionProvider> SuggestionProvider for CachedProvider<P> {
    fn suggest(&self, query: &str) -> Result<Vec<String>> {
        if let Some(hit) = self.state.lock().unwrap().records.get(query) {
            return Ok(hit.clone());
        }
        self.live_calls.fetch_add(1, Ordering::Relaxed);
        let suggestions = self.inner.suggest(query)?;
        let record = CacheRecord {
            query: query.to_owned(),
            suggestions,
        };
        let mut state = self.state.lock().unwrap();
        self.append(&mut state, &record)?;
        state
            .records
            .insert(record.query, record.suggestions.clone());
        Ok(record.suggestions)
    }
}
