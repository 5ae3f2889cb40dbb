//! Open-world specification mining over symbolic trace corpora: vocabulary
//! thresholding, trace sampling, term embeddings, domain-adapted term
//! clustering, per-cluster automaton and sequence-model mining, and
//! benchmark evaluation.

pub mod config;
pub mod corpus;
pub mod dac;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod mining;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod synth;

pub use config::PipelineConfig;
pub use corpus::{hierarchical_threshold, ingest, Corpus, Token, TokenKind, Trace};
pub use dac::{run_dac, DacConfig, TermCluster};
pub use distance::{blend, cooccurrence_distance_matrix, DistanceMatrix};
pub use embedding::{Embedding, EmbeddingConfig, Learner};
pub use error::{Error, Result};
pub use evaluation::{GoldBenchmark, GridConfig, GridSpace, ScoreReport, Scores};
pub use mining::{fit_seq_model, ktails, project, Fsa, ProjectedTrace, SeqModel};
pub use sampling::{sample, SamplerConfig, SamplerKind};
