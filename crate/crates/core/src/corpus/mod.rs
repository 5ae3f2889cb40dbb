//! Trace corpora: the token grammar, the line-delimited corpus format and
//! procedure-level (hierarchical) vocabulary thresholding.

mod token;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::Deserialize;

use crate::error::{Error, Result};

pub use token::{escape, unescape, CompareOp, Token, TokenKind, END, START};

/// Default minimum number of distinct procedures a token must occur in.
pub const DEFAULT_MIN_PROCS: usize = 2;

/// An intraprocedural trace: an ordered, non-empty token sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    procedure: String,
    tokens: Vec<Token>,
}

impl Trace {
    pub fn new(procedure: impl Into<String>, tokens: Vec<Token>) -> Result<Trace> {
        if tokens.is_empty() {
            return Err(Error::Trace("trace has no tokens".into()));
        }
        let last = tokens.len() - 1;
        for (i, t) in tokens.iter().enumerate() {
            if t.is_start() && i != 0 {
                return Err(Error::Trace(format!("$START at position {i}")));
            }
            if t.is_end() && i != last {
                return Err(Error::Trace(format!("$END at position {i}")));
            }
        }
        Ok(Trace {
            procedure: procedure.into(),
            tokens,
        })
    }

    /// Builds a trace from raw token strings.
    pub fn parse<S: AsRef<str>>(procedure: impl Into<String>, raw: &[S]) -> Result<Trace> {
        let tokens = raw
            .iter()
            .map(|r| Token::parse(r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Trace::new(procedure, tokens)
    }

    pub fn procedure(&self) -> &str {
        &self.procedure
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unique_tokens(&self) -> BTreeSet<&Token> {
        self.tokens.iter().collect()
    }

    /// True when every token is `$START` or `$END`.
    pub fn is_sentinel_only(&self) -> bool {
        self.tokens.iter().all(Token::is_sentinel)
    }

    /// One record of the corpus file format.
    pub fn to_record(&self) -> String {
        let tokens: Vec<String> = self
            .tokens
            .iter()
            .map(|t| json_string(t.as_str()))
            .collect();
        format!(
            "{{\"procedure\": {}, \"tokens\": [{}]}}",
            json_string(&self.procedure),
            tokens.join(", ")
        )
    }
}

pub(crate) fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Traces grouped by the procedure they were extracted from.
///
/// Groups keep first-appearance order and traces keep file order; both orders
/// are significant for sampling.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    groups: IndexMap<String, Vec<Trace>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    procedure: String,
    tokens: Vec<String>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    pub fn from_traces(traces: impl IntoIterator<Item = Trace>) -> Corpus {
        let mut corpus = Corpus::new();
        for t in traces {
            corpus.push(t);
        }
        corpus
    }

    pub fn push(&mut self, trace: Trace) {
        self.groups
            .entry(trace.procedure.clone())
            .or_default()
            .push(trace);
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[Trace])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn group(&self, procedure: &str) -> Option<&[Trace]> {
        self.groups.get(procedure).map(Vec::as_slice)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_traces(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_traces() == 0
    }

    /// All traces, group by group.
    pub fn traces(&self) -> impl Iterator<Item = &Trace> {
        self.groups.values().flatten()
    }

    /// Parses the line-delimited corpus format.
    pub fn parse(text: &str) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record: Record = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let trace =
                Trace::parse(record.procedure, &record.tokens).map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            corpus.push(trace);
        }
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(corpus)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for t in self.traces() {
            out.push_str(&t.to_record());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.serialize().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Union of all tokens, sentinels included, in lexicographic order.
    pub fn vocabulary(&self) -> BTreeSet<Token> {
        self.traces()
            .flat_map(|t| t.tokens.iter().cloned())
            .collect()
    }

    /// Number of distinct procedure groups each token occurs in.
    pub fn procedure_counts(&self) -> HashMap<&Token, usize> {
        let mut counts = HashMap::new();
        for traces in self.groups.values() {
            let seen: HashSet<&Token> = traces.iter().flat_map(|t| t.tokens.iter()).collect();
            for t in seen {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Rebuilds the corpus group by group; groups mapped to nothing are dropped.
    pub(crate) fn map_groups<F>(&self, mut f: F) -> Corpus
    where
        F: FnMut(&str, &[Trace]) -> Vec<Trace>,
    {
        let mut groups = IndexMap::new();
        for (k, v) in &self.groups {
            let kept = f(k, v);
            if !kept.is_empty() {
                groups.insert(k.clone(), kept);
            }
        }
        Corpus { groups }
    }
}

/// Reads a corpus file.
pub fn ingest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse(&text)
}

/// Removes every non-sentinel token that occurs in fewer than `min_procs`
/// distinct procedures.
///
/// Traces left with nothing but sentinels are dropped, as are groups left
/// without traces.
pub fn hierarchical_threshold(corpus: &Corpus, min_procs: usize) -> Corpus {
    let counts = corpus.procedure_counts();
    let keep: HashSet<Token> = counts
        .into_iter()
        .filter(|(t, n)| t.is_sentinel() || *n >= min_procs)
        .map(|(t, _)| t.clone())
        .collect();
    corpus.map_groups(|_, traces| {
        traces
            .iter()
            .filter_map(|t| {
                let tokens: Vec<Token> = t
                    .tokens
                    .iter()
                    .filter(|x| keep.contains(*x))
                    .cloned()
                    .collect();
                if tokens.is_empty() || tokens.iter().all(Token::is_sentinel) {
                    None
                } else {
                    Some(Trace {
                        procedure: t.procedure.clone(),
                        tokens,
                    })
                }
            })
            .collect()
    })
}

/// Lexicographically ordered vocabulary of a corpus.
pub fn vocabulary(corpus: &Corpus) -> BTreeSet<Token> {
    corpus.vocabulary()
}
