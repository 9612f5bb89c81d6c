//! Run configuration: a flat JSON object whose keys are the fields below plus
//! every training hyperparameter. Command-line flags override file values.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use suicide_risk::corpus::DatasetFormat;
use suicide_risk::eval::DEFAULT_FOLDS;
use suicide_risk::lexicon::DEFAULT_THRESHOLD;
use suicide_risk::models::{Method, TrainConfig};

use crate::failure::{CliResult, Failure};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CSSRS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "srisk-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: Option<DatasetFormat>,
    pub embeddings: Option<PathBuf>,
    /// Normalization lexicons applied before modeling.
    pub lexicons: Vec<PathBuf>,
    pub threshold: f64,
    pub method: Method,
    pub folds: usize,
    pub output_dir: Option<PathBuf>,
    /// `rng_seed` inside is the master seed.
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            format: None,
            embeddings: None,
            lexicons: Vec::new(),
            threshold: DEFAULT_THRESHOLD,
            method: Method::Tvarm,
            folds: DEFAULT_FOLDS,
            output_dir: None,
            train: TrainConfig::default(),
        }
    }
}

/// Flags shared by the data-driven subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat JSON run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dataset in JSONL or CSV form.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Dataset format; guessed from the extension when absent.
    #[arg(long)]
    pub format: Option<DatasetFormat>,
    /// Word-vector file (`token v1 .. vd` per line).
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Normalization lexicon CSV; repeatable.
    #[arg(long = "lexicon", value_name = "FILE")]
    pub lexicons: Vec<PathBuf>,
    /// Cosine similarity threshold for normalization.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory; defaults to $CSSRS_OUTPUT_DIR, then `srisk-out`.
    #[arg(long, short = 'o', value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Master seed for every derived random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Classify raw post text even when normalized text is available.
    #[arg(long)]
    pub raw_text: bool,
}

fn resolve_against(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl RunConfig {
    /// Parses a config, rejecting keys that are neither run nor training
    /// settings.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let obj = value.as_object().ok_or("config must be a JSON object")?;
        let known = serde_json::to_value(RunConfig::default()).expect("config serializes");
        let known = known.as_object().expect("object");
        if let Some(key) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(format!("unknown config key `{key}`"));
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    /// Reads the config file (if any), resolves its relative paths against the
    /// file's directory, then applies the flags.
    pub fn resolve(args: &CommonArgs) -> CliResult<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
                let mut cfg = RunConfig::from_json(&text)
                    .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
                let base = path.parent().filter(|p| !p.as_os_str().is_empty());
                cfg.dataset = cfg.dataset.map(|p| resolve_against(base, p));
                cfg.embeddings = cfg.embeddings.map(|p| resolve_against(base, p));
                cfg.lexicons = cfg.lexicons.into_iter().map(|p| resolve_against(base, p)).collect();
                cfg.output_dir = cfg.output_dir.map(|p| resolve_against(base, p));
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &args.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = args.format {
            cfg.format = Some(v);
        }
        if let Some(v) = &args.embeddings {
            cfg.embeddings = Some(v.clone());
        }
        if !args.lexicons.is_empty() {
            cfg.lexicons = args.lexicons.clone();
        }
        if let Some(v) = args.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = args.method {
            cfg.method = v;
        }
        if let Some(v) = args.folds {
            cfg.folds = v;
        }
        if let Some(v) = &args.output_dir {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = args.seed {
            cfg.train.rng_seed = v;
        }
        if let Some(v) = args.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = args.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = args.batch_size {
            cfg.train.batch_size = v;
        }
        if args.raw_text {
            cfg.train.use_normalized_text = false;
        }
        if cfg.output_dir.is_none() {
            cfg.output_dir = Some(
                std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            );
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Input paths must exist and scalar settings must be usable before any
    /// compute starts.
    fn check(&self) -> CliResult<()> {
        let inputs = self.dataset.iter().chain(&self.embeddings).chain(&self.lexicons);
        for p in inputs {
            if !p.is_file() {
                return Err(Failure::usage(format!("input file not found: {}", p.display())));
            }
        }
        if !self.lexicons.is_empty() && self.embeddings.is_none() {
            return Err(Failure::usage("--lexicon requires --embeddings"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Failure::usage(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.folds < 2 {
            return Err(Failure::usage(format!("folds must be at least 2, got {}", self.folds)));
        }
        self.train.validate().map_err(|e| Failure::usage(e.to_string()))
    }

    pub fn dataset(&self) -> CliResult<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Failure::usage("a dataset is required (--dataset or `dataset` in the config)"))
    }

    pub fn dataset_format(&self) -> DatasetFormat {
        match (self.format, &self.dataset) {
            (Some(f), _) => f,
            (None, Some(p)) => DatasetFormat::from_path(p),
            (None, None) => DatasetFormat::Jsonl,
        }
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("set by resolve")
    }
}
