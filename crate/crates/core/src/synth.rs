//! Synthetic corpora with planted usage patterns and their gold clusters.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Token, Trace};
use crate::dac::{clusters_to_text, TermCluster};
use crate::error::{Error, Result};
use crate::evaluation::GoldBenchmark;
use crate::seed::{derive_seed, stage_seed};

/// One element of a pattern template. Terms are indices into the pattern's
/// term list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Term(usize),
    /// Exactly one of the listed terms.
    OneOf(Vec<usize>),
    /// The body repeated between `min` and `max` times inclusive.
    Repeat {
        body: Vec<Step>,
        min: usize,
        max: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub terms: Vec<String>,
    /// Emission template; when absent the terms are emitted in list order.
    #[serde(default)]
    pub template: Option<Vec<Step>>,
}

impl PatternSpec {
    pub fn sequence<S: Into<String>>(terms: impl IntoIterator<Item = S>) -> PatternSpec {
        PatternSpec {
            terms: terms.into_iter().map(Into::into).collect(),
            template: None,
        }
    }

    pub fn with_template(mut self, template: Vec<Step>) -> PatternSpec {
        self.template = Some(template);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub patterns: Vec<PatternSpec>,
    pub noise_vocab_size: usize,
    /// Upper bound on noise tokens per trace; the count is uniform in `0..=max`.
    #[serde(default = "default_noise_per_trace")]
    pub max_noise_per_trace: usize,
    pub traces_per_procedure: usize,
    pub procedures: usize,
    /// Probability that a procedure uses each pattern besides its primary one.
    pub interleave_rate: f64,
    pub seed: u64,
    /// Explicit noise names; generated when absent.
    #[serde(default)]
    pub noise_names: Option<Vec<String>>,
}

fn default_noise_per_trace() -> usize {
    6
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patterns.is_empty() {
            return Err(Error::Config("synthetic spec has no patterns".into()));
        }
        if self.procedures == 0 || self.traces_per_procedure == 0 {
            return Err(Error::Config(
                "procedures and traces_per_procedure must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.interleave_rate) {
            return Err(Error::Config(format!(
                "interleave_rate {} outside [0, 1]",
                self.interleave_rate
            )));
        }
        for (p, pattern) in self.patterns.iter().enumerate() {
            let distinct: BTreeSet<&String> = pattern.terms.iter().collect();
            if distinct.len() < 2 || distinct.len() != pattern.terms.len() {
                return Err(Error::Config(format!(
                    "pattern {p} needs at least two distinct terms"
                )));
            }
            if let Some(template) = &pattern.template {
                check_steps(template, pattern.terms.len(), p)?;
            }
        }
        if let Some(names) = &self.noise_names {
            if names.len() != self.noise_vocab_size {
                return Err(Error::Config(
                    "noise_names length differs from noise_vocab_size".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<SynthSpec> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("synthetic spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

fn check_steps(steps: &[Step], n: usize, p: usize) -> Result<()> {
    let bad = || Error::Config(format!("pattern {p} template refers to a missing term"));
    for step in steps {
        match step {
            Step::Term(i) if *i >= n => return Err(bad()),
            Step::OneOf(options) if options.is_empty() || options.iter().any(|i| *i >= n) => {
                return Err(bad())
            }
            Step::Repeat { body, min, max } => {
                if min > max {
                    return Err(Error::Config(format!("pattern {p} repeat has min > max")));
                }
                check_steps(body, n, p)?;
            }
            _ => {}
        }
    }
    Ok(())
}

fn emit(steps: &[Step], terms: &[Token], rng: &mut ChaCha8Rng, out: &mut Vec<Token>) {
    for step in steps {
        match step {
            Step::Term(i) => out.push(terms[*i].clone()),
            Step::OneOf(options) => {
                out.push(terms[options[rng.random_range(0..options.len())]].clone())
            }
            Step::Repeat { body, min, max } => {
                for _ in 0..rng.random_range(*min..=*max) {
                    emit(body, terms, rng, out);
                }
            }
        }
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Distinct pronounceable call names with no shared structure.
fn noise_names(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut names = Vec::with_capacity(count);
    while names.len() < count {
        let syllables = rng.random_range(3..=4);
        let mut name = String::new();
        for _ in 0..syllables {
            name.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            name.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }
    names
}

/// Generates the corpus and the planted gold clusters.
///
/// Procedure `p` always uses pattern `p mod |patterns|` and each other pattern
/// with probability `interleave_rate`. Every trace of a procedure holds one
/// instance of each of its patterns, placed as a block at a uniform position
/// among the trace's noise tokens.
pub fn generate(spec: &SynthSpec) -> Result<(Corpus, GoldBenchmark)> {
    spec.validate()?;
    let patterns: Vec<Vec<Token>> = spec
        .patterns
        .iter()
        .map(|p| p.terms.iter().map(|t| Token::parse(t)).collect())
        .collect::<Result<_>>()?;
    let noise: Vec<Token> = match &spec.noise_names {
        Some(names) => names
            .iter()
            .map(|t| Token::parse(t))
            .collect::<Result<_>>()?,
        None => noise_names(spec.noise_vocab_size, stage_seed(spec.seed, "noise"))
            .iter()
            .map(|t| Token::parse(t))
            .collect::<Result<_>>()?,
    };
    let pattern_terms: HashSet<&Token> = patterns.iter().flatten().collect();
    if let Some(clash) = noise.iter().find(|t| pattern_terms.contains(t)) {
        return Err(Error::VocabularyCollision(clash.to_string()));
    }

    let mut corpus = Corpus::new();
    for p in 0..spec.procedures {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, p as u64));
        let primary = p % patterns.len();
        let used: Vec<usize> = (0..patterns.len())
            .filter(|&q| q == primary || rng.random_bool(spec.interleave_rate))
            .collect();
        let procedure = format!("proc{p:03}");
        for _ in 0..spec.traces_per_procedure {
            let mut body: Vec<Token> = Vec::new();
            if !noise.is_empty() {
                for _ in 0..rng.random_range(0..=spec.max_noise_per_trace) {
                    body.push(noise[rng.random_range(0..noise.len())].clone());
                }
            }
            for &q in &used {
                let mut block = Vec::new();
                let pattern = &spec.patterns[q];
                match &pattern.template {
                    Some(template) => emit(template, &patterns[q], &mut rng, &mut block),
                    None => block.extend(patterns[q].iter().cloned()),
                }
                let at = rng.random_range(0..=body.len());
                body.splice(at..at, block);
            }
            let mut tokens = Vec::with_capacity(body.len() + 2);
            tokens.push(Token::start());
            tokens.extend(body);
            tokens.push(Token::end());
            corpus.push(Trace::new(procedure.clone(), tokens)?);
        }
    }

    let clusters = patterns
        .into_iter()
        .map(|terms| TermCluster::new(terms.into_iter().collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((corpus, GoldBenchmark::new("synth", clusters)?))
}

/// Writes the corpus and gold files produced by [`generate`].
pub fn write(
    corpus: &Corpus,
    gold: &GoldBenchmark,
    corpus_path: &Path,
    gold_path: &Path,
) -> Result<()> {
    corpus.write(corpus_path)?;
    fs::write(gold_path, clusters_to_text(&gold.clusters)).map_err(|e| Error::io(gold_path, e))
}

/// Five API-like patterns of sizes 3 to 8 with loops and branch checks.
pub fn planted(seed: u64) -> SynthSpec {
    use Step::*;
    let patterns = vec![
        PatternSpec::sequence(["lockAcquire", "counterBump", "lockRelease"]),
        PatternSpec::sequence(["sockOpen", "sockOpen == 0", "sockWrite", "sockShutdown"])
            .with_template(vec![
                Term(0),
                Term(1),
                Repeat {
                    body: vec![Term(2)],
                    min: 1,
                    max: 2,
                },
                Term(3),
            ]),
        PatternSpec::sequence([
            "parserNew",
            "parserFeed",
            "parserFeed != 0",
            "parserResult",
            "parserFree",
        ])
        .with_template(vec![
            Term(0),
            Repeat {
                body: vec![Term(1), Term(2)],
                min: 1,
                max: 3,
            },
            Term(3),
            Term(4),
        ]),
        PatternSpec::sequence([
            "listCreate",
            "listAppend",
            "listLength",
            "listLength > 0",
            "listPop",
            "listDestroy",
        ])
        .with_template(vec![
            Term(0),
            Repeat {
                body: vec![Term(1)],
                min: 1,
                max: 3,
            },
            Term(2),
            Term(3),
            Term(4),
            Term(5),
        ]),
        PatternSpec::sequence([
            "dictGetIterator",
            "dictNext",
            "dictNext != 0",
            "dictNext == 0",
            "dictGetKey",
            "dictGetVal",
            "sdsfree",
            "dictReleaseIterator",
        ])
        .with_template(vec![
            Term(0),
            Repeat {
                body: vec![Term(1), Term(2), Term(4), Term(5), Term(6)],
                min: 0,
                max: 2,
            },
            Term(1),
            Term(3),
            Term(7),
        ]),
    ];
    SynthSpec {
        patterns,
        noise_vocab_size: 20,
        max_noise_per_trace: 6,
        traces_per_procedure: 20,
        procedures: 40,
        interleave_rate: 0.5,
        seed,
        noise_names: None,
    }
}

/// Patterns whose terms share a name stem within each pattern.
pub fn stems(seed: u64) -> SynthSpec {
    let stem =
        |s: &str, parts: &[&str]| PatternSpec::sequence(parts.iter().map(|p| format!("{s}{p}")));
    let patterns = vec![
        stem("foo", &["Init", "Next", "Free"]),
        stem("bar", &["Open", "Read", "Seek", "Close"]),
        stem("qux", &["Create", "Push", "Peek", "Pop", "Destroy"]),
        stem("zap", &["Begin", "Load", "Check", "Commit", "Log", "End"]),
    ];
    SynthSpec {
        patterns,
        noise_vocab_size: 20,
        max_noise_per_trace: 8,
        traces_per_procedure: 8,
        procedures: 24,
        interleave_rate: 0.5,
        seed,
        noise_names: None,
    }
}
