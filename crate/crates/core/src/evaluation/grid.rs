use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::corpus::{hierarchical_threshold, Corpus};
use crate::dac::run_dac;
use crate::distance::{blend, cooccurrence_distance_matrix, DistanceMatrix};
use crate::embedding::{embedding_distance_matrix, train, Embedding, Learner};
use crate::error::{Error, Result};
use crate::pipeline::clustering_vocabulary;
use crate::sampling::{sample, SamplerConfig, SamplerKind};

use super::metrics::{score, GoldBenchmark, Scores};

pub const REPORT_HEADER: [&str; 9] = [
    "learner",
    "sampler",
    "alpha",
    "beta",
    "epsilon",
    "project",
    "jaccard",
    "intersection",
    "status",
];

/// One point of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub learner: Learner,
    pub sampler: SamplerKind,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl GridConfig {
    pub fn from_pipeline(cfg: &PipelineConfig) -> GridConfig {
        GridConfig {
            learner: cfg.learner,
            sampler: cfg.sampler,
            alpha: cfg.alpha,
            beta: cfg.beta,
            epsilon: cfg.epsilon,
        }
    }

    /// `base` with this point's five settings.
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            learner: self.learner,
            sampler: self.sampler,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
            ..base.clone()
        }
    }

    fn key(&self) -> (Learner, SamplerKind, u64, u64, u64) {
        (
            self.learner,
            self.sampler,
            self.alpha.to_bits(),
            self.beta.to_bits(),
            self.epsilon.to_bits(),
        )
    }
}

impl fmt::Display for GridConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "learner={} sampler={} alpha={} beta={} epsilon={}",
            self.learner, self.sampler, self.alpha, self.beta, self.epsilon
        )
    }
}

/// Cartesian product of per-parameter value lists.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpace {
    pub learners: Vec<Learner>,
    pub samplers: Vec<SamplerKind>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl GridSpace {
    /// The standard search ranges for both learners.
    pub fn standard() -> GridSpace {
        GridSpace {
            learners: Learner::ALL.to_vec(),
            samplers: SamplerKind::ALL.to_vec(),
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            betas: vec![0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
            epsilons: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }

    pub fn len(&self) -> usize {
        self.learners.len()
            * self.samplers.len()
            * self.alphas.len()
            * self.betas.len()
            * self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, learner-major and epsilon-minor.
    pub fn configs(&self) -> Vec<GridConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &learner in &self.learners {
            for &sampler in &self.samplers {
                for &alpha in &self.alphas {
                    for &beta in &self.betas {
                        for &epsilon in &self.epsilons {
                            out.push(GridConfig {
                                learner,
                                sampler,
                                alpha,
                                beta,
                                epsilon,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One report line: a config evaluated on a project.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub config: GridConfig,
    pub project: String,
    /// `None` when the run failed.
    pub scores: Option<Scores>,
    pub status: String,
}

impl ReportRow {
    pub fn ok(config: GridConfig, project: String, scores: Scores) -> ReportRow {
        ReportRow {
            config,
            project,
            scores: Some(scores),
            status: "ok".into(),
        }
    }

    pub fn failed(config: GridConfig, project: String, error: &str) -> ReportRow {
        ReportRow {
            config,
            project,
            scores: None,
            status: format!("error: {error}"),
        }
    }

    pub fn jaccard(&self) -> f64 {
        self.scores.map_or(0.0, |s| s.jaccard)
    }

    pub fn intersection(&self) -> f64 {
        self.scores.map_or(0.0, |s| s.intersection)
    }
}

/// Best-1 and mean-of-best-5 scores for one project.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub project: String,
    pub top1_jaccard: f64,
    pub top5_jaccard: f64,
    pub top1_intersection: f64,
    pub top5_intersection: f64,
}

fn top_k(mut values: Vec<f64>, k: usize) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let best = &values[..k.min(values.len())];
    (values[0], best.iter().sum::<f64>() / best.len() as f64)
}

/// Geometric mean; zero when any value is zero.
pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    pub rows: Vec<ReportRow>,
}

impl ScoreReport {
    pub fn new(rows: Vec<ReportRow>) -> ScoreReport {
        ScoreReport { rows }
    }

    /// Projects in order of first appearance.
    pub fn projects(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.project.as_str()) {
                out.push(&r.project);
            }
        }
        out
    }

    /// Per-project top-1/top-5 over successful rows.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        self.projects()
            .into_iter()
            .map(|p| {
                let ok: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.project == p && r.scores.is_some())
                    .collect();
                let (top1_jaccard, top5_jaccard) =
                    top_k(ok.iter().map(|r| r.jaccard()).collect(), 5);
                let (top1_intersection, top5_intersection) =
                    top_k(ok.iter().map(|r| r.intersection()).collect(), 5);
                Aggregate {
                    project: p.to_owned(),
                    top1_jaccard,
                    top5_jaccard,
                    top1_intersection,
                    top5_intersection,
                }
            })
            .collect()
    }

    /// Cross-project geometric means of the four aggregate columns, in the
    /// order top1/top5 Jaccard then top1/top5 intersection.
    pub fn geometric_means(&self) -> [f64; 4] {
        let aggs = self.aggregates();
        let col =
            |f: fn(&Aggregate) -> f64| geometric_mean(&aggs.iter().map(f).collect::<Vec<_>>());
        [
            col(|a| a.top1_jaccard),
            col(|a| a.top5_jaccard),
            col(|a| a.top1_intersection),
            col(|a| a.top5_intersection),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(REPORT_HEADER).map_err(fmt)?;
        for r in &self.rows {
            let (j, i) = match r.scores {
                Some(s) => (s.jaccard.to_string(), s.intersection.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.config.learner.to_string(),
                r.config.sampler.to_string(),
                r.config.alpha.to_string(),
                r.config.beta.to_string(),
                r.config.epsilon.to_string(),
                r.project.clone(),
                j,
                i,
                r.status.clone(),
            ])
            .map_err(fmt)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

/// A corpus and its gold clusters.
#[derive(Clone, Debug)]
pub struct Project {
    pub name: String,
    pub corpus: Corpus,
    pub gold: GoldBenchmark,
}

type CacheKey = (String, Learner, SamplerKind, u64);
type CacheValue = std::result::Result<Arc<(Embedding, DistanceMatrix)>, String>;

/// Trained embeddings and their distance matrices, keyed by project,
/// learner, sampler and seed. Concurrent requests for a missing key wait for
/// a single training run.
#[derive(Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<CacheKey, Arc<OnceLock<CacheValue>>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

impl EmbeddingCache {
    pub fn new() -> EmbeddingCache {
        EmbeddingCache::default()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
        }
    }

    pub fn get_or_train(
        &self,
        key: CacheKey,
        build: impl FnOnce() -> Result<(Embedding, DistanceMatrix)>,
    ) -> CacheValue {
        let cell = {
            let mut entries = self.entries.lock().expect("cache lock");
            match entries.get(&key) {
                Some(cell) => {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    cell.clone()
                }
                None => {
                    self.misses.fetch_add(1, Ordering::SeqCst);
                    let cell = Arc::new(OnceLock::new());
                    entries.insert(key, cell.clone());
                    cell
                }
            }
        };
        cell.get_or_init(|| build().map(Arc::new).map_err(|e| e.to_string()))
            .clone()
    }
}

struct Prepared {
    sampled: Corpus,
    cooccurrence: DistanceMatrix,
}

fn prepare(
    project: &Project,
    sampler: SamplerKind,
    base: &PipelineConfig,
) -> std::result::Result<Prepared, String> {
    let thresholded = hierarchical_threshold(&project.corpus, base.min_procs);
    let cfg = SamplerConfig {
        kind: sampler,
        ..base.sampler_config()
    };
    let sampled = sample(&thresholded, &cfg).map_err(|e| e.to_string())?;
    let cooccurrence =
        cooccurrence_distance_matrix(&sampled, &clustering_vocabulary(&sampled), base.cooc_window)
            .map_err(|e| e.to_string())?;
    Ok(Prepared {
        sampled,
        cooccurrence,
    })
}

fn evaluate_one(
    project: &Project,
    prepared: &std::result::Result<Prepared, String>,
    config: &GridConfig,
    base: &PipelineConfig,
    cache: &EmbeddingCache,
) -> std::result::Result<Scores, String> {
    let prepared = prepared.as_ref().map_err(Clone::clone)?;
    let emb_cfg = base.embedding_config_for(config.learner);
    let key = (
        project.name.clone(),
        config.learner,
        config.sampler,
        emb_cfg.seed,
    );
    let trained = cache.get_or_train(key, || {
        let embedding = train(&prepared.sampled, &emb_cfg)?;
        let d = embedding_distance_matrix(&embedding, prepared.cooccurrence.vocab())?;
        Ok((embedding, d))
    })?;
    let run = || -> Result<Scores> {
        let combined = blend(&prepared.cooccurrence, &trained.1, config.alpha)?;
        let clusters = run_dac(
            &prepared.sampled,
            &combined,
            &config.apply(base).dac_config(),
        )?;
        Ok(score(&clusters, &project.gold))
    };
    run().map_err(|e| e.to_string())
}

/// Evaluates every grid point on every project. Rows are project-major in
/// grid order; a failing point yields a failed row.
pub fn grid_search(
    projects: &[Project],
    space: &GridSpace,
    base: &PipelineConfig,
    cache: &EmbeddingCache,
) -> ScoreReport {
    let configs = space.configs();
    let prepared: BTreeMap<(usize, SamplerKind), std::result::Result<Prepared, String>> = projects
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, p)| space.samplers.iter().map(move |&s| (i, s, p)))
        .map(|(i, s, p)| ((i, s), prepare(p, s, base)))
        .collect();
    let jobs: Vec<(usize, &GridConfig)> = (0..projects.len())
        .flat_map(|i| configs.iter().map(move |c| (i, c)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, config)| {
            let project = &projects[i];
            match evaluate_one(
                project,
                &prepared[&(i, config.sampler)],
                config,
                base,
                cache,
            ) {
                Ok(scores) => ReportRow::ok(*config, project.name.clone(), scores),
                Err(e) => ReportRow::failed(*config, project.name.clone(), &e),
            }
        })
        .collect();
    ScoreReport::new(rows)
}

/// A config with its cross-project top-N membership count.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedConfig {
    pub config: GridConfig,
    pub count: usize,
    /// Mean pairing score over projects; failed or missing runs count as zero.
    pub mean_score: f64,
}

/// Counts how often each config is among a project's `top_n` by pairing
/// score, then orders by count and breaks ties by mean score.
pub fn rank_default_configs(report: &ScoreReport, top_n: usize) -> Vec<RankedConfig> {
    let projects = report.projects();
    let mut order: Vec<GridConfig> = Vec::new();
    let mut stats: HashMap<_, (usize, f64)> = HashMap::new();
    for r in &report.rows {
        let e = stats.entry(r.config.key()).or_insert_with(|| {
            order.push(r.config);
            (0, 0.0)
        });
        e.1 += r.jaccard();
    }
    for p in &projects {
        let mut rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.project == *p).collect();
        rows.sort_by(|a, b| b.jaccard().total_cmp(&a.jaccard()));
        for r in rows.into_iter().take(top_n) {
            stats.get_mut(&r.config.key()).unwrap().0 += 1;
        }
    }
    let n = projects.len().max(1) as f64;
    let mut ranked: Vec<(usize, RankedConfig)> = order
        .into_iter()
        .enumerate()
        .filter_map(|(i, config)| {
            let (count, total) = stats[&config.key()];
            (count > 0).then_some((
                i,
                RankedConfig {
                    config,
                    count,
                    mean_score: total / n,
                },
            ))
        })
        .collect();
    ranked.sort_by(|(ia, a), (ib, b)| {
        b.count
            .cmp(&a.count)
            .then(b.mean_score.total_cmp(&a.mean_score))
            .then(ia.cmp(ib))
    });
    ranked.into_iter().map(|(_, r)| r).collect()
}
