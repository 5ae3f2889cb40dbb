//! Resolved pipeline configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::DEFAULT_MIN_PROCS;
use crate::dac::{DacConfig, DEFAULT_MIN_SAMPLES};
use crate::distance::DEFAULT_COOC_WINDOW;
use crate::embedding::{EmbeddingConfig, Learner};
use crate::error::{Error, Result};
use crate::mining::DEFAULT_K;
use crate::sampling::{SamplerConfig, SamplerKind, DEFAULT_SAMPLES};
use crate::seed::stage_seed;

/// Every setting of a pipeline run. Keys in the config file are the long
/// flag names of the command line tool.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub out: PathBuf,
    /// Root seed; every stage derives its own.
    pub seed: u64,
    pub min_procs: usize,
    pub sampler: SamplerKind,
    pub samples: usize,
    pub learner: Learner,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub cooc_window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub min_samples: usize,
    pub k: usize,
    pub dedup_ktails: bool,
    pub dedup_markov: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let emb = EmbeddingConfig::default();
        let dac = DacConfig::default();
        PipelineConfig {
            corpus: None,
            gold: None,
            out: PathBuf::from("out"),
            seed: 0,
            min_procs: DEFAULT_MIN_PROCS,
            sampler: SamplerKind::Diversity,
            samples: DEFAULT_SAMPLES,
            learner: Learner::Subword,
            dim: emb.dim,
            window: emb.window,
            negatives: emb.negatives,
            epochs: emb.epochs,
            learning_rate: emb.learning_rate,
            ngram_min: emb.ngram_min,
            ngram_max: emb.ngram_max,
            cooc_window: DEFAULT_COOC_WINDOW,
            alpha: dac.alpha,
            beta: dac.beta,
            epsilon: dac.epsilon,
            min_samples: DEFAULT_MIN_SAMPLES,
            k: DEFAULT_K,
            dedup_ktails: true,
            dedup_markov: false,
        }
    }
}

/// Config keys in the order they are echoed.
pub const KEYS: &[&str] = &[
    "corpus",
    "gold",
    "out",
    "seed",
    "min-procs",
    "sampler",
    "samples",
    "learner",
    "dim",
    "window",
    "negatives",
    "epochs",
    "learning-rate",
    "ngram-min",
    "ngram-max",
    "cooc-window",
    "alpha",
    "beta",
    "epsilon",
    "min-samples",
    "k",
    "dedup-ktails",
    "dedup-markov",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "corpus" => self.corpus = path_or_none(v),
            "gold" => self.gold = path_or_none(v),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "min-procs" => self.min_procs = parse(key, v)?,
            "sampler" => self.sampler = v.parse()?,
            "samples" => self.samples = parse(key, v)?,
            "learner" => self.learner = v.parse()?,
            "dim" => self.dim = parse(key, v)?,
            "window" => self.window = parse(key, v)?,
            "negatives" => self.negatives = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "learning-rate" => self.learning_rate = parse(key, v)?,
            "ngram-min" => self.ngram_min = parse(key, v)?,
            "ngram-max" => self.ngram_max = parse(key, v)?,
            "cooc-window" => self.cooc_window = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "min-samples" => self.min_samples = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "dedup-ktails" => self.dedup_ktails = parse(key, v)?,
            "dedup-markov" => self.dedup_markov = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        Some(match key {
            "corpus" => path(&self.corpus),
            "gold" => path(&self.gold),
            "out" => self.out.display().to_string(),
            "seed" => self.seed.to_string(),
            "min-procs" => self.min_procs.to_string(),
            "sampler" => self.sampler.to_string(),
            "samples" => self.samples.to_string(),
            "learner" => self.learner.to_string(),
            "dim" => self.dim.to_string(),
            "window" => self.window.to_string(),
            "negatives" => self.negatives.to_string(),
            "epochs" => self.epochs.to_string(),
            "learning-rate" => format!("{:?}", self.learning_rate),
            "ngram-min" => self.ngram_min.to_string(),
            "ngram-max" => self.ngram_max.to_string(),
            "cooc-window" => self.cooc_window.to_string(),
            "alpha" => format!("{:?}", self.alpha),
            "beta" => format!("{:?}", self.beta),
            "epsilon" => format!("{:?}", self.epsilon),
            "min-samples" => self.min_samples.to_string(),
            "k" => self.k.to_string(),
            "dedup-ktails" => self.dedup_ktails.to_string(),
            "dedup-markov" => self.dedup_markov.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// The fully resolved configuration in config-file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            writeln!(out, "{key} = {}", self.get(key).unwrap()).unwrap();
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_procs == 0 {
            return Err(Error::Config("min-procs must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.cooc_window == 0 {
            return Err(Error::Config("cooc-window must be at least 1".into()));
        }
        self.sampler_config().validate()?;
        self.embedding_config().validate()?;
        self.dac_config().validate()
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            kind: self.sampler,
            samples_per_procedure: self.samples,
            seed: stage_seed(self.seed, "sample"),
        }
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        self.embedding_config_for(self.learner)
    }

    pub fn embedding_config_for(&self, learner: Learner) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            subword: learner == Learner::Subword,
            ngram_min: self.ngram_min,
            ngram_max: self.ngram_max,
            seed: stage_seed(self.seed, "embed"),
        }
    }

    pub fn dac_config(&self) -> DacConfig {
        DacConfig {
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
            min_samples: self.min_samples,
        }
    }

    /// Resolves a path relative to the output directory.
    pub fn out_path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out.join(name)
    }
}
