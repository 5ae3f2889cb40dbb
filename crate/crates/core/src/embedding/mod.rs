//! Skip-gram word vectors with negative sampling, optionally composed from
//! character n-grams, and the cosine distance matrix built from them.

mod model;
mod text;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Token};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

pub use model::{char_ngrams, Gradient, SkipGram};

/// Which flavour of skip-gram learner to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    /// Word vectors composed with character n-gram vectors.
    Subword,
    /// One vector per word.
    Plain,
}

impl Learner {
    pub const ALL: [Learner; 2] = [Learner::Subword, Learner::Plain];

    pub fn as_str(self) -> &'static str {
        match self {
            Learner::Subword => "subword",
            Learner::Plain => "plain",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "subword" | "fasttext" => Ok(Learner::Subword),
            "plain" | "word2vec" => Ok(Learner::Plain),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly towards zero over training.
    pub learning_rate: f64,
    pub subword: bool,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.05,
            subword: true,
            ngram_min: 3,
            ngram_max: 6,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim < 2 {
            return bad("embedding dim must be at least 2");
        }
        if self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return bad("window, negatives and epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return bad("n-gram range must satisfy 1 <= ngram-min <= ngram-max");
        }
        Ok(())
    }

    pub fn learner(&self) -> Learner {
        if self.subword {
            Learner::Subword
        } else {
            Learner::Plain
        }
    }
}

/// Trained vectors, one per vocabulary token.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    vectors: BTreeMap<Token, Vec<f64>>,
    /// N-gram vectors kept for composing tokens not seen in training.
    ngrams: HashMap<String, Vec<f64>>,
    config: EmbeddingConfig,
}

impl Embedding {
    pub fn from_vectors(
        vectors: BTreeMap<Token, Vec<f64>>,
        config: EmbeddingConfig,
    ) -> Result<Self> {
        if let Some((t, v)) = vectors.iter().find(|(_, v)| v.len() != config.dim) {
            return Err(Error::Format(format!(
                "vector for {t} has length {}, expected {}",
                v.len(),
                config.dim
            )));
        }
        Ok(Embedding {
            vectors,
            ngrams: HashMap::new(),
            config,
        })
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &BTreeMap<Token, Vec<f64>> {
        &self.vectors
    }

    pub fn get(&self, token: &Token) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Vector for any token: trained tokens directly, unseen tokens as the
    /// mean of their known character n-grams (subword models only).
    pub fn lookup(&self, token: &Token) -> Option<Vec<f64>> {
        if let Some(v) = self.vectors.get(token) {
            return Some(v.clone());
        }
        if self.ngrams.is_empty() {
            return None;
        }
        let grams = char_ngrams(token, self.config.ngram_min, self.config.ngram_max);
        let mut acc = vec![0.0; self.config.dim];
        let mut n = 0usize;
        for g in grams {
            if let Some(v) = self.ngrams.get(&g) {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        Some(acc)
    }

    pub fn cosine_similarity(&self, a: &Token, b: &Token) -> Option<f64> {
        Some(cosine(self.get(a)?, self.get(b)?))
    }
}

/// Trains skip-gram vectors over every trace of `corpus`, one trace per sentence.
pub fn train(corpus: &Corpus, cfg: &EmbeddingConfig) -> Result<Embedding> {
    cfg.validate()?;
    let mut model = SkipGram::new(corpus, cfg)?;
    model.train(corpus, cfg);
    Ok(model.into_embedding(cfg.clone()))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// `(1 - cos(u, v)) / 2` for every pair of `vocab`, with a zero diagonal.
pub fn embedding_distance_matrix(embedding: &Embedding, vocab: &[Token]) -> Result<DistanceMatrix> {
    let mut unit = Vec::with_capacity(vocab.len());
    for t in vocab {
        let v = embedding
            .lookup(t)
            .ok_or_else(|| Error::MissingToken(t.to_string()))?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroNorm(t.to_string()));
        }
        unit.push(v.into_iter().map(|x| x / norm).collect::<Vec<f64>>());
    }
    let n = vocab.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let cos: f64 = unit[i].iter().zip(&unit[j]).map(|(x, y)| x * y).sum();
            let d = ((1.0 - cos) / 2.0).clamp(0.0, 1.0);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix::from_dense(vocab.to_vec(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Trace;

    fn tok(s: &str) -> Token {
        Token::parse(s).unwrap()
    }

    fn embedding(pairs: &[(&str, Vec<f64>)]) -> Embedding {
        let cfg = EmbeddingConfig {
            dim: pairs[0].1.len(),
            ..Default::default()
        };
        Embedding::from_vectors(
            pairs.iter().map(|(t, v)| (tok(t), v.clone())).collect(),
            cfg,
        )
        .unwrap()
    }

    #[test]
    fn distance_extremes() {
        let e = embedding(&[
            ("a", vec![1.0, 0.0]),
            ("b", vec![2.0, 0.0]),
            ("c", vec![-1.0, 0.0]),
            ("d", vec![0.0, 3.0]),
        ]);
        let vocab: Vec<Token> = ["a", "b", "c", "d"].iter().map(|s| tok(s)).collect();
        let m = embedding_distance_matrix(&e, &vocab).unwrap();
        assert!(m.get(0, 1).abs() < 1e-15);
        assert!((m.get(0, 2) - 1.0).abs() < 1e-15);
        assert!((m.get(0, 3) - 0.5).abs() < 1e-15);
        assert_eq!(m.get(2, 2), 0.0);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let e = embedding(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 0.0])]);
        let vocab = vec![tok("a"), tok("b")];
        assert!(matches!(
            embedding_distance_matrix(&e, &vocab),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn tiny_vocabulary_is_rejected() {
        let c = Corpus::from_traces(vec![Trace::parse("p", &["a", "a"]).unwrap()]);
        assert!(matches!(
            train(&c, &EmbeddingConfig::default()),
            Err(Error::VocabularyTooSmall(1))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = EmbeddingConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.ngram_min = 7;
        assert!(cfg.validate().is_err());
        cfg = EmbeddingConfig {
            dim: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
