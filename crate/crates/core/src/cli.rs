//! Command-line driver and run configuration.
//!
//! A run is described by one TOML file. Relative paths resolve against the
//! directory of that file. Any key can be overridden on the command line as
//! `--section.key=value` (the value is parsed as a TOML literal, falling back
//! to a bare string), and `PQGCN_OUTPUT_DIR` replaces `output_dir`.
//!
//! ```toml
//! output_dir = "out"
//!
//! [corpus]
//! train = "train.tsv"       # required
//! test = "test.tsv"         # optional fixed test file; otherwise split train
//! format = "tsv"            # tsv | trec-coarse | trec-fine
//! test_fraction = 0.3
//! split_seed = 13
//!
//! [nlp]
//! patterns = "patterns.tsv" # optional, default noun/verb phrase patterns
//! pretagged = "tags.txt"    # optional token/TAG lines
//! lexicon = "entities.txt"  # optional entity surface forms
//!
//! [embeddings]
//! word = "words.vec"        # all optional, text or .gz
//! phrase = "phrases.vec"
//! entity = "entities.vec"
//!
//! [windows]
//! word = 5                  # a width or "whole"
//! word_pos = "whole"
//! phrase = "whole"
//! phrase_pos = "whole"
//!
//! [model]
//! enabled_views = ["word", "word_pos", "phrase", "phrase_pos", "entity"]
//! hidden_dim = 200
//! threshold = 0.5
//! dropout = 0.5
//! lr = 0.001
//! weight_decay = 0.0005
//! max_epochs = 1000
//! patience = 100
//! seed = 42
//! validation_fraction = 0.1
//! view_depth = 1
//! # final_hidden = 64
//! ```

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus_into, missing_train_classes, split_corpus, CorpusFormat, DatasetSplit, LabelVocab};
use crate::embeddings::{load_vectors, EmbeddingKind, EmbeddingTable};
use crate::eval::{write_report, MetricsReport, ReportFormat};
use crate::graphs::{
    analyze_questions, build_view, load_bundle, save_bundle, GraphBundle, QuestionRecord, Split, ViewData, ViewKind,
    ViewResources,
};
use crate::model::{
    ablate, ablation_to_tsv, init_params, load_checkpoint, model_gradient_check, predict, save_checkpoint, train,
    AblationRow, Checkpoint, ModelConfig, ModelInputs, TrainReport,
};
use crate::nlp::{EntityLexicon, HeuristicTagger, PatternSet, PreTaggedTagger, Tagger};
use crate::nn::io::fmt_real;
use crate::nn::GradCheckReport;
use crate::stats::Window;
use crate::{Error, Result};

pub const OUTPUT_DIR_ENV: &str = "PQGCN_OUTPUT_DIR";
/// Failure threshold of `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Tsv
}

fn default_test_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlpSection {
    pub patterns: Option<PathBuf>,
    pub pretagged: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub word: Option<PathBuf>,
    pub phrase: Option<PathBuf>,
    pub entity: Option<PathBuf>,
}

/// A window width or `"whole"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSetting {
    Width(usize),
    Named(String),
}

impl WindowSetting {
    pub fn to_window(&self) -> Result<Window> {
        match self {
            WindowSetting::Width(0) => Err(Error::Validation("window width must be positive".into())),
            WindowSetting::Width(n) => Ok(Window::Sliding(*n)),
            WindowSetting::Named(s) if s == "whole" => Ok(Window::Whole),
            WindowSetting::Named(s) => Err(Error::Validation(format!("window must be a width or \"whole\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub word: WindowSetting,
    pub word_pos: WindowSetting,
    pub phrase: WindowSetting,
    pub phrase_pos: WindowSetting,
}

impl Default for WindowSection {
    fn default() -> Self {
        let whole = || WindowSetting::Named("whole".into());
        WindowSection {
            word: WindowSetting::Width(5),
            word_pos: whole(),
            phrase: whole(),
            phrase_pos: whole(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub nlp: NlpSection,
    #[serde(default)]
    pub embeddings: EmbeddingSection,
    #[serde(default)]
    pub windows: WindowSection,
    #[serde(default)]
    pub model: ModelConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Set `dotted.key` in a TOML table, creating intermediate tables.
fn set_path(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key {key:?}")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: {p} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parse TOML text with `(key, value)` overrides applied. Paths stay as written.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for (k, v) in overrides {
            set_path(&mut table, k, v)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    /// Load, apply the environment and command-line overrides, resolve
    /// relative paths against the file's directory, and validate.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut overrides = overrides.to_vec();
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !overrides.iter().any(|(k, _)| k == "output_dir") {
                overrides.insert(0, ("output_dir".into(), toml::Value::String(dir).to_string()));
            }
        }
        let mut cfg = Self::parse(&text, &overrides)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config: "))))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        resolve(base, &mut self.corpus.train);
        for p in [
            &mut self.corpus.test,
            &mut self.nlp.patterns,
            &mut self.nlp.pretagged,
            &mut self.nlp.lexicon,
            &mut self.embeddings.word,
            &mut self.embeddings.phrase,
            &mut self.embeddings.entity,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
    }

    fn input_files(&self) -> Vec<&PathBuf> {
        let mut files = vec![&self.corpus.train];
        files.extend(
            [
                &self.corpus.test,
                &self.nlp.patterns,
                &self.nlp.pretagged,
                &self.nlp.lexicon,
                &self.embeddings.word,
                &self.embeddings.phrase,
                &self.embeddings.entity,
            ]
            .into_iter()
            .flatten(),
        );
        files
    }

    /// Referenced files exist and every setting is in range.
    pub fn validate(&self) -> Result<()> {
        for f in self.input_files() {
            if !f.is_file() {
                return Err(Error::Validation(format!("referenced file {} does not exist", f.display())));
            }
        }
        if self.corpus.test.is_none() && !(self.corpus.test_fraction > 0.0 && self.corpus.test_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.corpus.test_fraction
            )));
        }
        for w in [&self.windows.word, &self.windows.word_pos, &self.windows.phrase, &self.windows.phrase_pos] {
            w.to_window()?;
        }
        if self.model.enabled_views.contains(&ViewKind::Entity) && self.embeddings.entity.is_none() {
            return Err(Error::Validation(
                "the entity view needs embeddings.entity; disable it in model.enabled_views".into(),
            ));
        }
        if self.model.enabled_views.contains(&ViewKind::Entity) && self.nlp.lexicon.is_none() {
            log::warn!("no entity lexicon given; entities are matched against the entity vector keys");
        }
        self.model.validate()
    }

    /// Digest of everything that shapes the bundle: the data-side settings
    /// and the contents of every input file. Model settings are excluded so
    /// one bundle serves many training configurations.
    pub fn config_hash(&self) -> Result<String> {
        let mut files = serde_json::Map::new();
        for f in self.input_files() {
            let bytes = std::fs::read(f).map_err(|e| Error::io(f, e))?;
            let key = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            files.insert(key, hex::encode(Sha256::digest(&bytes)).into());
        }
        let canonical = serde_json::json!({
            "format": self.corpus.format,
            "test_fraction": self.corpus.test_fraction,
            "split_seed": self.corpus.split_seed,
            "fixed_test": self.corpus.test.is_some(),
            "windows": self.windows,
            "views": self.model.views(),
            "files": files,
        });
        Ok(hex::encode(Sha256::digest(canonical.to_string().as_bytes())))
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.output_dir.join("bundle")
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output_dir.join("checkpoint")
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// corpus -> nlp -> stats -> graphs; writes the bundle and returns its directory.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<PathBuf> {
    let mut labels = LabelVocab::default();
    let mut questions = load_corpus_into(&cfg.corpus.train, cfg.corpus.format, &mut labels, 0)?;
    let split = match &cfg.corpus.test {
        Some(test) => {
            let first = questions.len();
            let tests = load_corpus_into(test, cfg.corpus.format, &mut labels, first)?;
            let test_ids = (first..first + tests.len()).collect();
            questions.extend(tests);
            DatasetSplit::from_sets((0..first).collect(), test_ids, cfg.corpus.split_seed)?
        }
        None => split_corpus(&questions, cfg.corpus.test_fraction, cfg.corpus.split_seed)?,
    };
    let missing = missing_train_classes(&questions, &split, labels.len());
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().filter_map(|&c| labels.name(c)).collect();
        log::warn!("classes without training questions: {}", names.join(", "));
    }

    let tagger: Box<dyn Tagger> = match &cfg.nlp.pretagged {
        Some(p) => Box::new(PreTaggedTagger::load(p)?),
        None => Box::new(HeuristicTagger::new()),
    };
    let patterns = match &cfg.nlp.patterns {
        Some(p) => PatternSet::load(p)?,
        None => PatternSet::default(),
    };
    let load = |p: &Option<PathBuf>, kind| p.as_deref().map(|p| load_vectors(p, kind)).transpose();
    let word: Option<EmbeddingTable> = load(&cfg.embeddings.word, EmbeddingKind::Word)?;
    let phrase = load(&cfg.embeddings.phrase, EmbeddingKind::Phrase)?;
    let entity = load(&cfg.embeddings.entity, EmbeddingKind::Entity)?;
    let lexicon = match (&cfg.nlp.lexicon, &entity) {
        (Some(p), _) => Some(EntityLexicon::load(p)?),
        (None, Some(t)) => Some(EntityLexicon::new(t.keys())),
        (None, None) => None,
    };

    let analyzed = analyze_questions(&questions, tagger.as_ref(), &patterns, lexicon.as_ref());
    let res = ViewResources {
        word_table: word.as_ref(),
        phrase_table: phrase.as_ref(),
        entity_table: entity.as_ref(),
        word_window: cfg.windows.word.to_window()?,
        word_pos_window: cfg.windows.word_pos.to_window()?,
        phrase_window: cfg.windows.phrase.to_window()?,
        phrase_pos_window: cfg.windows.phrase_pos.to_window()?,
    };
    let mut views = Vec::new();
    for kind in cfg.model.views() {
        let (graph, incidence) = build_view(kind, &analyzed, &res)?;
        log::info!("{kind}: {} nodes, {} edges", graph.vocab.len(), graph.edges.len());
        eprintln!("{kind}\tnodes {}\tedges {}", graph.vocab.len(), graph.edges.len());
        views.push(ViewData { graph, incidence });
    }
    let bundle = GraphBundle {
        views,
        questions: questions
            .iter()
            .map(|q| QuestionRecord {
                id: q.id,
                label: q.label,
                split: if split.is_train(q.id) { Split::Train } else { Split::Test },
            })
            .collect(),
        labels,
        config_hash: cfg.config_hash()?,
    };
    bundle.validate()?;
    let dir = cfg.bundle_dir();
    // Drop stale view directories from an earlier prepare with other views.
    if dir.join("manifest.json").is_file() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    save_bundle(&bundle, &dir)?;
    Ok(dir)
}

/// Train on a bundle; writes the checkpoint and `train_report.tsv`.
pub fn cmd_train(cfg: &RunConfig, bundle_dir: &Path) -> Result<TrainReport> {
    let bundle = load_bundle(bundle_dir)?;
    let (params, report) = train(&bundle, &cfg.model)?;
    create_dir(&cfg.output_dir)?;
    save_checkpoint(
        &Checkpoint {
            params,
            config: cfg.model.clone(),
            bundle_hash: bundle.config_hash.clone(),
            best_epoch: report.best_epoch,
            epochs_run: report.epochs_run(),
        },
        &cfg.checkpoint_dir(),
    )?;
    write_file(&cfg.output_dir.join("train_report.tsv"), &report.to_tsv())?;
    Ok(report)
}

fn checked_pair(checkpoint_dir: &Path, bundle_dir: &Path) -> Result<(Checkpoint, GraphBundle)> {
    let ckpt = load_checkpoint(checkpoint_dir)?;
    let bundle = load_bundle(bundle_dir)?;
    if ckpt.bundle_hash != bundle.config_hash {
        return Err(Error::Validation(format!(
            "config hash mismatch: checkpoint {} was trained on bundle {}, not {}",
            checkpoint_dir.display(),
            ckpt.bundle_hash,
            bundle.config_hash
        )));
    }
    Ok((ckpt, bundle))
}

/// Test-split metrics; writes `metrics.tsv` and `metrics.md` into `out_dir`.
pub fn cmd_eval(checkpoint_dir: &Path, bundle_dir: &Path, out_dir: &Path) -> Result<MetricsReport> {
    let (ckpt, bundle) = checked_pair(checkpoint_dir, bundle_dir)?;
    let pred = predict(&ckpt.params, &ckpt.bundle_hash, &bundle, &ckpt.config, None)?;
    let (mut gold, mut guess) = (Vec::new(), Vec::new());
    for (&id, &p) in pred.ids.iter().zip(&pred.labels) {
        if let Some(l) = bundle.questions[id].label {
            gold.push(l);
            guess.push(p);
        }
    }
    if gold.is_empty() {
        return Err(Error::Validation("no labelled test questions to evaluate".into()));
    }
    let report = crate::eval::macro_prf(&gold, &guess, bundle.num_classes())?.with_class_names(bundle.labels.names());
    create_dir(out_dir)?;
    write_report(&report, &out_dir.join("metrics.tsv"), ReportFormat::Tsv)?;
    write_report(&report, &out_dir.join("metrics.md"), ReportFormat::Markdown)?;
    Ok(report)
}

/// `id<TAB>label<TAB>p_0 .. p_{C-1}` for every test question.
pub fn cmd_predict(checkpoint_dir: &Path, bundle_dir: &Path, out: &Path) -> Result<()> {
    let (ckpt, bundle) = checked_pair(checkpoint_dir, bundle_dir)?;
    let pred = predict(&ckpt.params, &ckpt.bundle_hash, &bundle, &ckpt.config, None)?;
    let mut text = String::from("id\tlabel");
    for c in 0..bundle.num_classes() {
        text.push_str(&format!("\tp_{c}"));
    }
    text.push('\n');
    for (row, (&id, &label)) in pred.ids.iter().zip(&pred.labels).enumerate() {
        text.push_str(&format!("{id}\t{}", bundle.labels.name(label).unwrap_or("?")));
        for &p in pred.probabilities.row(row) {
            text.push('\t');
            text.push_str(&fmt_real(p));
        }
        text.push('\n');
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out, &text)
}

/// Finite-difference check of the full model at its seeded initialization.
pub fn cmd_gradcheck(cfg: &RunConfig, bundle_dir: &Path) -> Result<GradCheckReport> {
    let bundle = load_bundle(bundle_dir)?;
    let inputs = ModelInputs::new(&bundle, &cfg.model)?;
    let params = init_params(&inputs, &cfg.model);
    let report = model_gradient_check(&bundle, &cfg.model, &params, 1e-5, 50)?;
    let (p, c) = report.worst;
    log::info!(
        "gradcheck: max relative error {:.3e} over {} coordinates (worst: {} [{c}])",
        report.max_rel_error,
        report.coords_checked,
        params.names[p]
    );
    Ok(report)
}

/// Parse `word,phrase;word` style subset lists.
pub fn parse_subsets(text: &str) -> Result<Vec<Vec<ViewKind>>> {
    text.split(';')
        .map(|s| {
            s.split(',')
                .map(|v| v.trim().parse::<ViewKind>())
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Run every subset and write `ablation.tsv`.
pub fn cmd_ablate(cfg: &RunConfig, bundle_dir: &Path, subsets: &[Vec<ViewKind>], jobs: usize) -> Result<Vec<AblationRow>> {
    let bundle = load_bundle(bundle_dir)?;
    let rows = ablate(&bundle, &cfg.model, subsets, jobs)?;
    create_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("ablation.tsv"), &ablation_to_tsv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Parser)]
#[command(
    name = "pqgcn",
    version,
    about = "Multi-view graph convolutional question classifier",
    after_help = "Config keys may be overridden with --section.key=value, e.g. --model.hidden_dim=64.\n\
                  PQGCN_OUTPUT_DIR replaces output_dir. See the crate docs of `pqgcn::cli` for the full schema.\n\
                  Exit codes: 0 success, 1 validation failure, 2 runtime failure."
)]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the view graphs and write a bundle.
    Prepare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and write a checkpoint plus per-epoch report.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to <output_dir>/bundle.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Write test-split metrics (TSV and markdown).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Defaults to $PQGCN_OUTPUT_DIR, else the checkpoint's parent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write labels and class probabilities of test questions.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients; exits 1 at >= 1e-4.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Train one model per view subset and write ablation.tsv.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Semicolon-separated subsets of comma-separated views.
        #[arg(long, default_value = "word;word,word_pos,phrase,phrase_pos,entity")]
        subsets: String,
        /// Concurrent subset runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Split `--a.b=v` config overrides from the remaining arguments.
pub fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, v)) if k.contains('.') || k == "output_dir" => overrides.push((k.to_string(), v.to_string())),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Config(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli, overrides: &[(String, String)]) -> Result<i32> {
    let load = |p: &Path| RunConfig::load(p, overrides);
    let bundle_or = |b: Option<PathBuf>, cfg: &RunConfig| b.unwrap_or_else(|| cfg.bundle_dir());
    match cli.command {
        Command::Prepare { config } => {
            let dir = cmd_prepare(&load(&config)?)?;
            log::info!("bundle written to {}", dir.display());
        }
        Command::Train { config, bundle } => {
            let cfg = load(&config)?;
            let report = cmd_train(&cfg, &bundle_or(bundle, &cfg))?;
            if let Some(m) = &report.test_metrics {
                log::info!("test macro F1 {:.4} P {:.4} R {:.4}", m.macro_f1, m.macro_precision, m.macro_recall);
            }
        }
        Command::Eval { checkpoint, bundle, out } => {
            let out = out
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf());
            let m = cmd_eval(&checkpoint, &bundle, &out)?;
            log::info!("macro F1 {:.4} P {:.4} R {:.4}", m.macro_f1, m.macro_precision, m.macro_recall);
        }
        Command::Predict { checkpoint, bundle, out } => cmd_predict(&checkpoint, &bundle, &out)?,
        Command::Gradcheck { config, bundle } => {
            let cfg = load(&config)?;
            let report = cmd_gradcheck(&cfg, &bundle_or(bundle, &cfg))?;
            println!("max_rel_error\t{:.6e}", report.max_rel_error);
            if !(report.max_rel_error < GRADCHECK_TOLERANCE) {
                log::error!("gradient check failed: {:.3e} >= {GRADCHECK_TOLERANCE:e}", report.max_rel_error);
                return Ok(1);
            }
        }
        Command::Ablate { config, bundle, subsets, jobs } => {
            let cfg = load(&config)?;
            let subsets = parse_subsets(&subsets).map_err(|e| Error::Validation(e.to_string()))?;
            cmd_ablate(&cfg, &bundle_or(bundle, &cfg), &subsets, jobs)?;
        }
    }
    Ok(0)
}

/// Entry point: parse `args` (program name first) and return the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let (args, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    match dispatch(cli, &overrides) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            let _ = std::io::stderr().flush();
            exit_code(&e)
        }
    }
}
