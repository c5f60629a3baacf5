//! End-to-end run: seeds, expansion, scoring, threshold filtering and top-k selection.
//!
//! A run directory receives `seeds.jsonl`, `expanded.jsonl`, `scored.jsonl`,
//! `selected.jsonl`, a `config.toml` snapshot and `run.log`. None of them carry
//! timestamps, so a replay over a warm suggestion cache is byte-identical.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embed::{build_domain_documents, load_embeddings, relevance, EmbeddingTable};
use crate::expand::{
    expand, CachedProvider, CorpusProvider, ExpansionConfig, FailingProvider, HttpProvider,
    QueueDiscipline, ResponseFormat, SuggestionProvider,
};
use crate::kb::{load_kb, KbFormat};
use crate::lm::{import_arpa, train_ngram, NgramModel, LOG10_ZERO};
use crate::template::{generate_seeds, load_templates, write_questions, Question};
use crate::{Error, Exec, Result};

/// rel_score given to questions without any covered token.
pub const NO_COVERAGE_REL: f64 = -1.0;

/// Percentile of the seed scores used when a threshold is not configured.
pub const DEFAULT_THRESHOLD_PERCENTILE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    LoadKb,
    LoadTemplates,
    GenerateSeeds,
    LoadEmbeddings,
    DomainCentroid,
    Expand,
    LoadLm,
    Score,
    Select,
}

impl Stage {
    /// Process exit code reported when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::LoadKb => 10,
            Stage::LoadTemplates => 11,
            Stage::GenerateSeeds => 12,
            Stage::LoadEmbeddings => 13,
            Stage::DomainCentroid => 14,
            Stage::Expand => 15,
            Stage::LoadLm => 16,
            Stage::Score => 17,
            Stage::Select => 18,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::LoadKb => "load_kb",
            Stage::LoadTemplates => "load_templates",
            Stage::GenerateSeeds => "generate_seeds",
            Stage::LoadEmbeddings => "load_embeddings",
            Stage::DomainCentroid => "domain_centroid",
            Stage::Expand => "expand",
            Stage::LoadLm => "load_lm",
            Stage::Score => "score",
            Stage::Select => "select",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Offline similarity search over a question corpus.
    #[default]
    Mock,
    Http,
    /// Replay from the cache file only; misses count as failed queries.
    Cached,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "http" => Ok(ProviderKind::Http),
            "cached" => Ok(ProviderKind::Cached),
            other => Err(Error::Config(format!("unknown provider {other:?}"))),
        }
    }
}

/// Flat run configuration; the TOML file form uses the same keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kb: PathBuf,
    pub kb_format: Option<KbFormat>,
    pub templates: PathBuf,
    /// Training corpus, or an ARPA file (`.arpa` extension or `\data\` header).
    pub lm: PathBuf,
    pub lm_order: usize,
    pub lm_min_count: u64,
    pub embeddings: PathBuf,
    pub provider: ProviderKind,
    /// Question corpus for the mock provider.
    pub corpus: Option<PathBuf>,
    pub corpus_k: usize,
    pub endpoint: Option<String>,
    pub response_format: ResponseFormat,
    pub cache: Option<PathBuf>,
    pub t_rel: Option<f64>,
    pub t_flu: Option<f64>,
    pub top_k: usize,
    pub max_iter: usize,
    pub seed_order: QueueDiscipline,
    pub per_query_limit: usize,
    pub rate_limit_ms: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let expansion = ExpansionConfig::default();
        PipelineConfig {
            kb: PathBuf::new(),
            kb_format: None,
            templates: PathBuf::new(),
            lm: PathBuf::new(),
            lm_order: 4,
            lm_min_count: 1,
            embeddings: PathBuf::new(),
            provider: ProviderKind::Mock,
            corpus: None,
            corpus_k: 10,
            endpoint: None,
            response_format: ResponseFormat::default(),
            cache: None,
            t_rel: None,
            t_flu: None,
            top_k: 500,
            max_iter: expansion.max_iterations,
            seed_order: expansion.queue_discipline,
            per_query_limit: expansion.per_query_limit,
            rate_limit_ms: expansion.rate_limit_ms,
            out_dir: PathBuf::from("run"),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig {
            max_iterations: self.max_iter,
            queue_discipline: self.seed_order,
            per_query_limit: self.per_query_limit,
            rate_limit_ms: self.rate_limit_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        self.expansion().validate()?;
        let mut required = vec![
            ("kb", &self.kb),
            ("templates", &self.templates),
            ("lm", &self.lm),
            ("embeddings", &self.embeddings),
        ];
        match self.provider {
            ProviderKind::Mock => match &self.corpus {
                Some(c) => required.push(("corpus", c)),
                None => return Err(Error::Config("mock provider needs a corpus".into())),
            },
            ProviderKind::Http => {
                if self.endpoint.is_none() {
                    return Err(Error::Config("http provider needs an endpoint".into()));
                }
            }
            ProviderKind::Cached => match &self.cache {
                Some(c) => required.push(("cache", c)),
                None => return Err(Error::Config("cached provider needs a cache file".into())),
            },
        }
        for (name, path) in required {
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("{name} path is not set")));
            }
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} path {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn build_provider(&self) -> Result<Box<dyn SuggestionProvider>> {
        let base: Box<dyn SuggestionProvider> = match self.provider {
            ProviderKind::Mock => {
                let corpus = self
                    .corpus
                    .as_ref()
                    .ok_or_else(|| Error::Config("mock provider needs a corpus".into()))?;
                Box::new(CorpusProvider::from_file(corpus, self.corpus_k)?)
            }
            ProviderKind::Http => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::Config("http provider needs an endpoint".into()))?;
                Box::new(HttpProvider::new(
                    endpoint,
                    self.response_format,
                    Duration::from_millis(self.rate_limit_ms),
                )?)
            }
            ProviderKind::Cached => Box::new(FailingProvider),
        };
        Ok(match &self.cache {
            Some(path) => Box::new(CachedProvider::open(base, path)?),
            None => base,
        })
    }

    pub fn load_lm(&self) -> Result<NgramModel> {
        load_lm(&self.lm, self.lm_order, self.lm_min_count)
    }
}

/// Imports ARPA files and trains on anything else.
pub fn load_lm(path: &Path, order: usize, min_count: u64) -> Result<NgramModel> {
    let is_arpa = path.extension().is_some_and(|e| e == "arpa")
        || fs::read_to_string(path)
            .map(|t| t.trim_start().starts_with("\\data\\"))
            .unwrap_or(false);
    if is_arpa {
        import_arpa(path)
    } else {
        train_ngram(path, order, min_count)
    }
}

/// Fills in rel_score (cosine to the centroid) and flu_score (averaged log10 LM score).
pub fn score_all(
    questions: &[Question],
    model: &NgramModel,
    table: &EmbeddingTable,
    centroid: &[f64],
) -> Vec<Question> {
    score_all_with(Exec::default(), questions, model, table, centroid)
}

pub fn score_all_with(
    exec: Exec,
    questions: &[Question],
    model: &NgramModel,
    table: &EmbeddingTable,
    centroid: &[f64],
) -> Vec<Question> {
    exec.map(questions, |q| {
        let rel = relevance(table, &q.text, centroid).unwrap_or_else(|e| {
            log::warn!("relevance of {:?}: {e}; using {NO_COVERAGE_REL}", q.text);
            NO_COVERAGE_REL
        });
        let flu = model.score(&q.text).map(|s| s.avg).unwrap_or_else(|e| {
            log::warn!("fluency of {:?}: {e}; using {LOG10_ZERO}", q.text);
            LOG10_ZERO
        });
        Question {
            rel_score: Some(rel),
            flu_score: Some(flu),
            ..q.clone()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub t_rel: f64,
    pub t_flu: f64,
    pub top_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ProvenanceCounts {
    pub seeds: usize,
    pub expanded: usize,
    pub filtered_rel: usize,
    pub filtered_flu: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredQuestionSet {
    pub questions: Vec<Question>,
    pub counts: ProvenanceCounts,
}

/// Drops questions below either threshold, orders the rest by fluency (then
/// relevance, then input order) and keeps the first `top_k`.
pub fn filter_and_select(scored: &[Question], selection: &Selection) -> ScoredQuestionSet {
    let rel = |q: &Question| q.rel_score.unwrap_or(f64::NEG_INFINITY);
    let flu = |q: &Question| q.flu_score.unwrap_or(f64::NEG_INFINITY);
    let mut counts = ProvenanceCounts {
        seeds: scored.iter().filter(|q| q.is_seed()).count(),
        expanded: scored.iter().filter(|q| !q.is_seed()).count(),
        ..Default::default()
    };
    let relevant: Vec<&Question> = scored
        .iter()
        .filter(|q| rel(q) >= selection.t_rel)
        .collect();
    counts.filtered_rel = scored.len() - relevant.len();
    let mut fluent: Vec<&Question> = relevant
        .into_iter()
        .filter(|q| flu(q) >= selection.t_flu)
        .collect();
    counts.filtered_flu = scored.len() - counts.filtered_rel - fluent.len();
    fluent.sort_by(|a, b| flu(b).total_cmp(&flu(a)).then(rel(b).total_cmp(&rel(a))));
    if fluent.len() < selection.top_k {
        log::info!(
            "{} questions survive the thresholds (top_k = {})",
            fluent.len(),
            selection.top_k
        );
    }
    let questions: Vec<Question> = fluent.into_iter().take(selection.top_k).cloned().collect();
    counts.selected = questions.len();
    ScoredQuestionSet { questions, counts }
}

/// Nearest-rank percentile (`p` in 0..=100) of `values`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub selected: ScoredQuestionSet,
    pub t_rel: f64,
    pub t_flu: f64,
    pub queries_issued: usize,
    pub failed_queries: usize,
    pub out_dir: PathBuf,
}

/// Exclusive ownership of a run directory for the lifetime of the guard.
struct RunDirLock {
    path: PathBuf,
}

impl RunDirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(".lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => Error::Config(format!(
                    "run directory {} is in use (remove {} if no run is active)",
                    dir.display(),
                    path.display()
                )),
                _ => Error::io(&path, e),
            })?;
        Ok(RunDirLock { path })
    }
}

impl Drop for RunDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

struct RunLog {
    lines: Vec<String>,
}

impl RunLog {
    fn note(&mut self, line: String) {
        log::info!("{line}");
        self.lines.push(line);
    }

    fn flush(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.log");
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate().stage(Stage::Config)?;
    let out = config.out_dir.clone();
    let _lock = RunDirLock::acquire(&out).stage(Stage::Config)?;
    let mut log = RunLog { lines: Vec::new() };
    let result = run_stages(config, &out, &mut log);
    if let Err(e) = &result {
        log.note(format!("aborted: {e}"));
    }
    log.flush(&out)?;
    result
}

fn persist(dir: &Path, name: &str, questions: &[Question], log: &mut RunLog) -> Result<()> {
    write_questions(dir.join(name), questions)?;
    log.note(format!("wrote {name} ({} questions)", questions.len()));
    Ok(())
}

fn run_stages(config: &PipelineConfig, out: &Path, log: &mut RunLog) -> Result<PipelineRun> {
    let snapshot = out.join("config.toml");
    fs::write(&snapshot, config.to_toml())
        .map_err(|e| Error::io(&snapshot, e))
        .stage(Stage::Config)?;

    let format = config
        .kb_format
        .unwrap_or_else(|| KbFormat::from_path(&config.kb));
    let kb = load_kb(&config.kb, format).stage(Stage::LoadKb)?;
    let stats = kb.stats();
    log.note(format!(
        "kb: {} triples, {} predicates, {} subjects, {} objects",
        stats.triple_count, stats.predicate_count, stats.subject_count, stats.object_count
    ));

    let templates = load_templates(&config.templates).stage(Stage::LoadTemplates)?;
    log.note(format!("templates: {}", templates.len()));

    let seeds = generate_seeds(&kb, &templates);
    if seeds.is_empty() {
        return Err(Error::Config("no template matched any triple".into()))
            .stage(Stage::GenerateSeeds);
    }
    persist(out, "seeds.jsonl", &seeds, log).stage(Stage::GenerateSeeds)?;

    let table = load_embeddings(&config.embeddings).stage(Stage::LoadEmbeddings)?;
    log.note(format!(
        "embeddings: {} words, dim {}",
        table.len(),
        table.dim()
    ));
    let domain =
        build_domain_documents(&table, seeds.iter().map(|q| ("in-domain", q.text.as_str())))
            .stage(Stage::DomainCentroid)?;
    let centroid = &domain[0].centroid;
    log.note(format!(
        "domain centroid over {} covered tokens",
        domain[0].word_count
    ));

    let provider = config.build_provider().stage(Stage::Expand)?;
    let expansion = expand(&seeds, provider.as_ref(), &config.expansion()).stage(Stage::Expand)?;
    let expanded: Vec<Question> = expansion.new_questions().cloned().collect();
    log.note(format!(
        "expansion: {} queries issued, {} failed, {} new questions",
        expansion.queries_issued,
        expansion.failed_queries,
        expanded.len()
    ));
    if expansion.all_failed() {
        log.note("warning: every provider query failed".into());
    }
    persist(out, "expanded.jsonl", &expanded, log).stage(Stage::Expand)?;

    let model = config.load_lm().stage(Stage::LoadLm)?;
    log.note(format!(
        "lm: order {}, vocabulary {}",
        model.order(),
        model.vocab().len()
    ));

    let scored = score_all(&expansion.questions, &model, &table, centroid);
    persist(out, "scored.jsonl", &scored, log).stage(Stage::Score)?;

    let seed_rel: Vec<f64> = scored
        .iter()
        .filter(|q| q.is_seed())
        .filter_map(|q| q.rel_score)
        .collect();
    let seed_flu: Vec<f64> = scored
        .iter()
        .filter(|q| q.is_seed())
        .filter_map(|q| q.flu_score)
        .collect();
    let t_rel = match config.t_rel {
        Some(t) => t,
        None => percentile(&seed_rel, DEFAULT_THRESHOLD_PERCENTILE).unwrap_or(f64::NEG_INFINITY),
    };
    let t_flu = match config.t_flu {
        Some(t) => t,
        None => percentile(&seed_flu, DEFAULT_THRESHOLD_PERCENTILE).unwrap_or(f64::NEG_INFINITY),
    };
    log.note(format!(
        "thresholds: t_rel = {t_rel}, t_flu = {t_flu}, top_k = {}",
        config.top_k
    ));

    let selected = filter_and_select(
        &scored,
        &Selection {
            t_rel,
            t_flu,
            top_k: config.top_k,
        },
    );
    let c = selected.counts;
    log.note(format!(
        "selection: {} seeds + {} expanded, {} below t_rel, {} below t_flu, {} selected",
        c.seeds, c.expanded, c.filtered_rel, c.filtered_flu, c.selected
    ));
    persist(out, "selected.jsonl", &selected.questions, log).stage(Stage::Select)?;

    Ok(PipelineRun {
        selected,
        t_rel,
        t_flu,
        queries_issued: expansion.queries_issued,
        failed_queries: expansion.failed_queries,
        out_dir: out.to_path_buf(),
    })
}
