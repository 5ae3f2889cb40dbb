//! Shared fixtures for the benchmarks.

use specmine::pipeline::{base_matrices, clustering_vocabulary};
use specmine::synth::{self, SynthSpec};
use specmine::{
    blend, hierarchical_threshold, sample, Corpus, DistanceMatrix, Embedding, EmbeddingConfig,
    SamplerConfig, SamplerKind, Token,
};

/// The planted preset scaled by `procedures`.
pub fn corpus(procedures: usize) -> Corpus {
    let spec = SynthSpec {
        procedures,
        ..synth::planted(1)
    };
    let (corpus, _) = synth::generate(&spec).expect("preset is valid");
    hierarchical_threshold(&corpus, 2)
}

pub fn sampled(corpus: &Corpus) -> Corpus {
    let cfg = SamplerConfig {
        kind: SamplerKind::Diversity,
        samples_per_procedure: 10,
        seed: 0,
    };
    sample(corpus, &cfg).expect("sampler config is valid")
}

pub fn small_embedding_config() -> EmbeddingConfig {
    EmbeddingConfig {
        dim: 32,
        epochs: 2,
        ..EmbeddingConfig::default()
    }
}

pub fn embedding(corpus: &Corpus) -> Embedding {
    specmine::embedding::train(corpus, &small_embedding_config()).expect("training succeeds")
}

/// The blended matrix the clustering stage sees.
pub fn combined(corpus: &Corpus, embedding: &Embedding, alpha: f64) -> DistanceMatrix {
    let (a, b) = base_matrices(corpus, embedding, 1).expect("matrices build");
    blend(&a, &b, alpha).expect("same vocabulary")
}

pub fn vocabulary(corpus: &Corpus) -> Vec<Token> {
    clustering_vocabulary(corpus)
}
