use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qgen::embed::{
    build_domain_documents, classify, evaluate, load_embeddings, save_domain_documents,
};
use qgen::expand::{expand, QueueDiscipline, ResponseFormat};
use qgen::kb::{load_kb, KbFormat};
use qgen::lm::export_arpa;
use qgen::pipeline::{
    filter_and_select, load_lm, percentile, run_pipeline, score_all, PipelineConfig, ProviderKind,
    Selection, Stage, DEFAULT_THRESHOLD_PERCENTILE,
};
use qgen::template::{generate_seeds, load_templates, read_questions, write_questions, Question};
use qgen::{Error, Exec};

#[derive(Parser)]
#[command(
    name = "qgen",
    version,
    about = "Generate questions from knowledge-base triples"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instantiate templates against the KB and write seeds.jsonl.
    Seeds {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print triple, predicate, subject and object counts of a KB.
    Stats {
        #[command(flatten)]
        kb: KbArgs,
    },
    /// Expand a seed file through a suggestion provider and write expanded.jsonl.
    Expand {
        #[arg(long)]
        seeds: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Attach relevance and fluency scores and write scored.jsonl.
    Score {
        /// Question files to score, in order.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Seed file defining the in-domain centroid.
        #[arg(long)]
        seeds: PathBuf,
        #[command(flatten)]
        lm: LmArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Threshold and rank scored questions and write selected.jsonl.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Nearest domain-document classification.
    Classify {
        #[arg(long)]
        embeddings: PathBuf,
        /// Labelled training documents.
        #[arg(long)]
        train: PathBuf,
        /// Labelled test documents; prints precision.
        #[arg(long, conflicts_with = "text")]
        test: Option<PathBuf>,
        /// A single text to classify.
        #[arg(long)]
        text: Option<String>,
        #[arg(long, value_enum, default_value_t = LabelFormat::Tsv)]
        format: LabelFormat,
        /// Save the domain documents as JSON-lines.
        #[arg(long)]
        save_domains: Option<PathBuf>,
    },
    /// Train an n-gram model on a corpus and export it as ARPA.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and persist the artifacts into the run directory.
    Pipeline(Box<PipelineArgs>),
}

#[derive(Args)]
struct KbArgs {
    #[arg(long)]
    kb: PathBuf,
    /// Defaults to jsonl for .jsonl files and tsv otherwise.
    #[arg(long)]
    kb_format: Option<KbFormatArg>,
}

impl KbArgs {
    fn format(&self) -> KbFormat {
        match self.kb_format {
            Some(KbFormatArg::Tsv) => KbFormat::Tsv,
            Some(KbFormatArg::Jsonl) => KbFormat::Jsonl,
            None => KbFormat::from_path(&self.kb),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KbFormatArg {
    Tsv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    Http,
    Cached,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Fifo,
    Lifo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResponseFormatArg {
    JsonStringArray,
    JsonNestedArray,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelFormat {
    /// `label<TAB>text`
    Tsv,
    /// Text tokens followed by the label as the last token.
    LabelLast,
}

#[derive(Args, Default)]
struct ProviderArgs {
    #[arg(long)]
    provider: Option<ProviderArg>,
    /// Question corpus backing the mock provider.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Suggestions returned per query by the mock provider.
    #[arg(long)]
    corpus_k: Option<usize>,
    /// URL with a {query} slot for the http provider.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    response_format: Option<ResponseFormatArg>,
    /// JSON-lines replay cache; wraps the chosen provider.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed_order: Option<OrderArg>,
    #[arg(long)]
    per_query_limit: Option<usize>,
    #[arg(long)]
    rate_limit_ms: Option<u64>,
}

impl ProviderArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(p) = self.provider {
            c.provider = match p {
                ProviderArg::Mock => ProviderKind::Mock,
                ProviderArg::Http => ProviderKind::Http,
                ProviderArg::Cached => ProviderKind::Cached,
            };
        }
        if let Some(v) = &self.corpus {
            c.corpus = Some(v.clone());
        }
        if let Some(v) = self.corpus_k {
            c.corpus_k = v;
        }
        if let Some(v) = &self.endpoint {
            c.endpoint = Some(v.clone());
        }
        if let Some(f) = self.response_format {
            c.response_format = match f {
                ResponseFormatArg::JsonStringArray => ResponseFormat::JsonStringArray,
                ResponseFormatArg::JsonNestedArray => ResponseFormat::JsonNestedArray,
            };
        }
        if let Some(v) = &self.cache {
            c.cache = Some(v.clone());
        }
        if let Some(v) = self.max_iter {
            c.max_iter = v;
        }
        if let Some(o) = self.seed_order {
            c.seed_order = match o {
                OrderArg::Fifo => QueueDiscipline::Fifo,
                OrderArg::Lifo => QueueDiscipline::Lifo,
            };
        }
        if let Some(v) = self.per_query_limit {
            c.per_query_limit = v;
        }
        if let Some(v) = self.rate_limit_ms {
            c.rate_limit_ms = v;
        }
    }
}

#[derive(Args)]
struct LmArgs {
    /// Training corpus or ARPA file.
    #[arg(long)]
    lm: PathBuf,
    #[arg(long, default_value_t = 4)]
    lm_order: usize,
    #[arg(long, default_value_t = 1)]
    lm_min_count: u64,
}

#[derive(Args, Default)]
struct SelectionArgs {
    /// Relevance threshold; defaults to the 5th percentile over seeds. Accepts -inf.
    #[arg(long, allow_hyphen_values = true)]
    t_rel: Option<f64>,
    /// Fluency threshold; defaults to the 5th percentile over seeds. Accepts -inf.
    #[arg(long, allow_hyphen_values = true)]
    t_flu: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    lm_order: Option<usize>,
    #[arg(long)]
    lm_min_count: Option<u64>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.kb {
            c.kb = v.clone();
        }
        if let Some(v) = &self.templates {
            c.templates = v.clone();
        }
        if let Some(v) = &self.lm {
            c.lm = v.clone();
        }
        if let Some(v) = self.lm_order {
            c.lm_order = v;
        }
        if let Some(v) = self.lm_min_count {
            c.lm_min_count = v;
        }
        if let Some(v) = &self.embeddings {
            c.embeddings = v.clone();
        }
        self.provider.apply(&mut c);
        if self.selection.t_rel.is_some() {
            c.t_rel = self.selection.t_rel;
        }
        if self.selection.t_flu.is_some() {
            c.t_flu = self.selection.t_flu;
        }
        if let Some(v) = self.selection.top_k {
            c.top_k = v;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        Ok(c)
    }
}

/// Error tagged with the stage whose exit code it maps to.
struct Failure {
    stage: Stage,
    error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, Failure>;
}

impl<T> AtStage<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, Failure> {
        self.map_err(|error| match error {
            Error::Stage { stage, source } => Failure {
                stage,
                error: *source,
            },
            error => Failure { stage, error },
        })
    }
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    Ok(dir.join(name))
}

fn read_labeled(path: &Path, format: LabelFormat) -> Result<Vec<(String, String)>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = match format {
            LabelFormat::Tsv => line.split_once('\t').map(|(l, t)| (l.trim(), t)),
            LabelFormat::LabelLast => line
                .trim_end()
                .rsplit_once(char::is_whitespace)
                .map(|(t, l)| (l, t)),
        };
        let (label, text) = row.ok_or_else(|| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: "expected a label and a text".into(),
        })?;
        rows.push((label.to_owned(), text.to_owned()));
    }
    Ok(rows)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Seeds {
            kb,
            templates,
            out_dir,
        } => {
            let kb = load_kb(&kb.kb, kb.format()).at(Stage::LoadKb)?;
            let templates = load_templates(&templates).at(Stage::LoadTemplates)?;
            let seeds = generate_seeds(&kb, &templates);
            let path = out_file(&out_dir, "seeds.jsonl").at(Stage::GenerateSeeds)?;
            write_questions(&path, &seeds).at(Stage::GenerateSeeds)?;
            println!("{} seeds -> {}", seeds.len(), path.display());
        }
        Command::Stats { kb } => {
            let kb = load_kb(&kb.kb, kb.format()).at(Stage::LoadKb)?;
            let s = kb.stats();
            println!(
                "triples\t{}\npredicates\t{}\nsubjects\t{}\nobjects\t{}\nduplicates_dropped\t{}",
                s.triple_count,
                s.predicate_count,
                s.subject_count,
                s.object_count,
                kb.duplicates_dropped()
            );
        }
        Command::Expand {
            seeds,
            provider,
            out_dir,
        } => {
            let seeds = read_questions(&seeds).at(Stage::Expand)?;
            let mut config = PipelineConfig::default();
            provider.apply(&mut config);
            let p = config.build_provider().at(Stage::Expand)?;
            let expansion = expand(&seeds, p.as_ref(), &config.expansion()).at(Stage::Expand)?;
            let new: Vec<Question> = expansion.new_questions().cloned().collect();
            let path = out_file(&out_dir, "expanded.jsonl").at(Stage::Expand)?;
            write_questions(&path, &new).at(Stage::Expand)?;
            println!(
                "{} queries ({} failed), {} new questions -> {}",
                expansion.queries_issued,
                expansion.failed_queries,
                new.len(),
                path.display()
            );
            if expansion.all_failed() {
                eprintln!("warning: every provider query failed");
            }
        }
        Command::Score {
            input,
            seeds,
            lm,
            embeddings,
            out_dir,
        } => {
            let seeds = read_questions(&seeds).at(Stage::Score)?;
            let mut questions = Vec::new();
            for path in &input {
                questions.extend(read_questions(path).at(Stage::Score)?);
            }
            let table = load_embeddings(&embeddings).at(Stage::LoadEmbeddings)?;
            let domain = build_domain_documents(
                &table,
                seeds.iter().map(|q| ("in-domain", q.text.as_str())),
            )
            .at(Stage::DomainCentroid)?;
            let model = load_lm(&lm.lm, lm.lm_order, lm.lm_min_count).at(Stage::LoadLm)?;
            let scored = score_all(&questions, &model, &table, &domain[0].centroid);
            let path = out_file(&out_dir, "scored.jsonl").at(Stage::Score)?;
            write_questions(&path, &scored).at(Stage::Score)?;
            println!("{} scored -> {}", scored.len(), path.display());
        }
        Command::Select {
            input,
            selection,
            out_dir,
        } => {
            let scored = read_questions(&input).at(Stage::Select)?;
            let seed_scores = |f: fn(&Question) -> Option<f64>| -> Vec<f64> {
                scored
                    .iter()
                    .filter(|q| q.is_seed())
                    .filter_map(f)
                    .collect()
            };
            let t_rel = selection.t_rel.unwrap_or_else(|| {
                percentile(&seed_scores(|q| q.rel_score), DEFAULT_THRESHOLD_PERCENTILE)
                    .unwrap_or(f64::NEG_INFINITY)
            });
            let t_flu = selection.t_flu.unwrap_or_else(|| {
                percentile(&seed_scores(|q| q.flu_score), DEFAULT_THRESHOLD_PERCENTILE)
                    .unwrap_or(f64::NEG_INFINITY)
            });
            let top_k = selection.top_k.unwrap_or(PipelineConfig::default().top_k);
            let set = filter_and_select(
                &scored,
                &Selection {
                    t_rel,
                    t_flu,
                    top_k,
                },
            );
            let path = out_file(&out_dir, "selected.jsonl").at(Stage::Select)?;
            write_questions(&path, &set.questions).at(Stage::Select)?;
            let c = set.counts;
            println!(
                "t_rel {t_rel}, t_flu {t_flu}: {} below t_rel, {} below t_flu, {} selected -> {}",
                c.filtered_rel,
                c.filtered_flu,
                c.selected,
                path.display()
            );
        }
        Command::Classify {
            embeddings,
            train,
            test,
            text,
            format,
            save_domains,
        } => {
            let table = load_embeddings(&embeddings).at(Stage::LoadEmbeddings)?;
            let train = read_labeled(&train, format).at(Stage::DomainCentroid)?;
            let docs = build_domain_documents(&table, train.iter().map(|(l, t)| (l, t)))
                .at(Stage::DomainCentroid)?;
            if let Some(path) = save_domains {
                save_domain_documents(&path, &docs).at(Stage::DomainCentroid)?;
            }
            if let Some(text) = text {
                let c = classify(&docs, &table, &text).at(Stage::Score)?;
                println!("{}\t{:.6}", c.label, c.similarity);
            }
            if let Some(test) = test {
                let test = read_labeled(&test, format).at(Stage::Score)?;
                let e = evaluate(Exec::default(), &docs, &table, &test);
                println!(
                    "documents\t{}\npredicted\t{}\ncorrect\t{}\nprecision\t{:.2}",
                    e.total,
                    e.predicted,
                    e.correct,
                    e.precision()
                );
            }
        }
        Command::TrainLm {
            corpus,
            order,
            min_count,
            out,
        } => {
            let model = qgen::lm::train_ngram(&corpus, order, min_count).at(Stage::LoadLm)?;
            export_arpa(&model, &out).at(Stage::LoadLm)?;
            println!(
                "order {order}, vocabulary {} -> {}",
                model.vocab().len(),
                out.display()
            );
        }
        Command::Pipeline(args) => {
            let config = args.config().at(Stage::Config)?;
            let run = run_pipeline(&config).at(Stage::Config)?;
            let c = run.selected.counts;
            println!(
                "{} seeds + {} expanded; t_rel {:.4}, t_flu {:.4}; {} selected -> {}",
                c.seeds,
                c.expanded,
                run.t_rel,
                run.t_flu,
                c.selected,
                run.out_dir.join("selected.jsonl").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { stage, error }) => {
            eprintln!("error [{stage}]: {error}");
            ExitCode::from(stage.exit_code() as u8)
        }
    }
}
