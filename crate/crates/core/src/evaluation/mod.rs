//! Benchmark scoring against gold clusters and the hyper-parameter grid search.

mod grid;
mod matching;
mod metrics;

pub use grid::{
    geometric_mean, grid_search, rank_default_configs, Aggregate, CacheStats, EmbeddingCache,
    GridConfig, GridSpace, Project, RankedConfig, ReportRow, ScoreReport, REPORT_HEADER,
};
pub use matching::max_weight_matching;
pub use metrics::{best_pairing, intersection_score, pairing_score, score, GoldBenchmark, Scores};
