//! Per-cluster mining: trace projection, k-Tails automata, first-order
//! sequence models and DOT export.

mod dot;
mod ktails;
mod markov;

use crate::corpus::{Corpus, Token, Trace};
use crate::dac::TermCluster;

pub use dot::{fsa_to_dot, seq_model_to_dot};
pub use ktails::{ktails, Fsa, DEFAULT_K};
pub use markov::{fit_seq_model, SeqModel};

/// A trace filtered down to one cluster's vocabulary, framed by sentinels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjectedTrace {
    pub procedure: String,
    pub tokens: Vec<Token>,
}

impl ProjectedTrace {
    /// The projected tokens without the framing sentinels.
    pub fn inner(&self) -> &[Token] {
        &self.tokens[1..self.tokens.len() - 1]
    }

    pub fn to_trace(&self) -> Trace {
        Trace::new(self.procedure.clone(), self.tokens.clone())
            .expect("projections are valid traces")
    }
}

/// Keeps the cluster's terms in their original order and re-attaches
/// `$START`/`$END`. Returns `None` when no term survives.
pub fn project(trace: &Trace, cluster: &TermCluster) -> Option<ProjectedTrace> {
    let kept: Vec<Token> = trace
        .tokens()
        .iter()
        .filter(|t| !t.is_sentinel() && cluster.contains(t))
        .cloned()
        .collect();
    if kept.is_empty() {
        return None;
    }
    let mut tokens = Vec::with_capacity(kept.len() + 2);
    tokens.push(Token::start());
    tokens.extend(kept);
    tokens.push(Token::end());
    Some(ProjectedTrace {
        procedure: trace.procedure().to_owned(),
        tokens,
    })
}

/// All non-empty projections of `corpus` onto `cluster`, in corpus order.
pub fn project_corpus(corpus: &Corpus, cluster: &TermCluster) -> Vec<ProjectedTrace> {
    corpus
        .traces()
        .filter_map(|t| project(t, cluster))
        .collect()
}

/// Removes repeated token sequences, keeping first occurrences.
pub fn dedup_projections(traces: &[ProjectedTrace]) -> Vec<ProjectedTrace> {
    let mut seen = std::collections::HashSet::new();
    traces
        .iter()
        .filter(|t| seen.insert(t.tokens.clone()))
        .cloned()
        .collect()
}
