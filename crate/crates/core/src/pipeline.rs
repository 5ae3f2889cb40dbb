//! The staged pipeline. Every stage reads its inputs from and writes its
//! outputs to the output directory, so stages can be re-run one at a time
//! and [`run_all`] is exactly their composition.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::corpus::{hierarchical_threshold, ingest, Corpus, Token};
use crate::dac::{read_clusters, run_dac, write_clusters, TermCluster};
use crate::distance::{blend, cooccurrence_distance_matrix, DistanceMatrix};
use crate::embedding::{embedding_distance_matrix, train, Embedding};
use crate::error::{Error, Result};
use crate::evaluation::{score, GoldBenchmark, GridConfig, ReportRow, ScoreReport};
use crate::mining::{
    dedup_projections, fit_seq_model, fsa_to_dot, ktails, project_corpus, seq_model_to_dot,
    ProjectedTrace,
};
use crate::sampling::sample;

pub const CONFIG_FILE: &str = "config.resolved";
pub const THRESHOLDED_FILE: &str = "thresholded.jsonl";
pub const SAMPLED_FILE: &str = "sampled.jsonl";
pub const VECTORS_FILE: &str = "vectors.txt";
pub const COOCCURRENCE_FILE: &str = "cooccurrence.matrix";
pub const EMBEDDING_FILE: &str = "embedding.matrix";
pub const COMBINED_FILE: &str = "combined.matrix";
pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const PROJECTED_DIR: &str = "projected";
pub const MINED_DIR: &str = "mined";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const REPORT_FILE: &str = "report.csv";

/// Non-sentinel vocabulary in sorted order; the rows of every matrix.
pub fn clustering_vocabulary(corpus: &Corpus) -> Vec<Token> {
    corpus
        .vocabulary()
        .into_iter()
        .filter(|t| !t.is_sentinel())
        .collect()
}

/// Co-occurrence (A) and embedding (B) distance matrices over the same vocabulary.
pub fn base_matrices(
    corpus: &Corpus,
    embedding: &Embedding,
    cooc_window: usize,
) -> Result<(DistanceMatrix, DistanceMatrix)> {
    let vocab = clustering_vocabulary(corpus);
    let a = cooccurrence_distance_matrix(corpus, &vocab, cooc_window)?;
    let b = embedding_distance_matrix(embedding, &vocab)?;
    Ok((a, b))
}

/// Everything produced for one cluster by the mining stage.
#[derive(Clone, Debug)]
pub struct MinedCluster {
    pub fsa_dot: String,
    pub markov_dot: String,
    pub traces: usize,
}

/// Mines both models from a cluster's projected traces.
pub fn mine(projected: &[ProjectedTrace], cfg: &PipelineConfig) -> Option<MinedCluster> {
    if projected.is_empty() {
        return None;
    }
    let seqs = |ps: &[ProjectedTrace]| ps.iter().map(|p| p.tokens.clone()).collect::<Vec<_>>();
    let fsa_input = if cfg.dedup_ktails {
        dedup_projections(projected)
    } else {
        projected.to_vec()
    };
    let markov_input = if cfg.dedup_markov {
        dedup_projections(projected)
    } else {
        projected.to_vec()
    };
    let fsa = ktails(&seqs(&fsa_input), cfg.k);
    let model = fit_seq_model(&seqs(&markov_input));
    Some(MinedCluster {
        fsa_dot: fsa_to_dot(&fsa),
        markov_dot: seq_model_to_dot(&model),
        traces: projected.len(),
    })
}

/// Thresholding, sampling, embedding, blending and clustering in memory.
pub fn cluster_corpus(corpus: &Corpus, cfg: &PipelineConfig) -> Result<Vec<TermCluster>> {
    cfg.validate()?;
    let thresholded = hierarchical_threshold(corpus, cfg.min_procs);
    let sampled = sample(&thresholded, &cfg.sampler_config())?;
    let embedding = train(&sampled, &cfg.embedding_config())?;
    let (a, b) = base_matrices(&sampled, &embedding, cfg.cooc_window)?;
    run_dac(&sampled, &blend(&a, &b, cfg.alpha)?, &cfg.dac_config())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_corpus(cfg: &PipelineConfig, name: &str) -> Result<Corpus> {
    ingest(cfg.out_path(name))
}

/// Writes the resolved configuration next to the outputs.
pub fn write_resolved_config(cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out_path(CONFIG_FILE), &cfg.to_text())
}

pub fn stage_threshold(cfg: &PipelineConfig) -> Result<Corpus> {
    let input = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("no corpus given".into()))?;
    let corpus = ingest(input)?;
    let thresholded = hierarchical_threshold(&corpus, cfg.min_procs);
    if thresholded.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ensure_dir(&cfg.out)?;
    thresholded.write(cfg.out_path(THRESHOLDED_FILE))?;
    Ok(thresholded)
}

pub fn stage_sample(cfg: &PipelineConfig) -> Result<Corpus> {
    let sampled = sample(&read_corpus(cfg, THRESHOLDED_FILE)?, &cfg.sampler_config())?;
    sampled.write(cfg.out_path(SAMPLED_FILE))?;
    Ok(sampled)
}

pub fn stage_embed(cfg: &PipelineConfig) -> Result<Embedding> {
    let embedding = train(&read_corpus(cfg, SAMPLED_FILE)?, &cfg.embedding_config())?;
    embedding.write(cfg.out_path(VECTORS_FILE))?;
    Ok(embedding)
}

pub fn stage_matrices(cfg: &PipelineConfig) -> Result<DistanceMatrix> {
    let sampled = read_corpus(cfg, SAMPLED_FILE)?;
    let embedding = Embedding::read(cfg.out_path(VECTORS_FILE))?;
    let (a, b) = base_matrices(&sampled, &embedding, cfg.cooc_window)?;
    let combined = blend(&a, &b, cfg.alpha)?;
    a.write(cfg.out_path(COOCCURRENCE_FILE))?;
    b.write(cfg.out_path(EMBEDDING_FILE))?;
    combined.write(cfg.out_path(COMBINED_FILE))?;
    Ok(combined)
}

pub fn stage_cluster(cfg: &PipelineConfig) -> Result<Vec<TermCluster>> {
    let sampled = read_corpus(cfg, SAMPLED_FILE)?;
    let combined = DistanceMatrix::read(cfg.out_path(COMBINED_FILE))?;
    let clusters = run_dac(&sampled, &combined, &cfg.dac_config())?;
    write_clusters(cfg.out_path(CLUSTERS_FILE), &clusters)?;
    Ok(clusters)
}

fn projected_name(id: usize) -> String {
    format!("cluster_{id}.jsonl")
}

/// Projects every thresholded trace onto every cluster.
pub fn stage_project(cfg: &PipelineConfig) -> Result<Vec<(usize, Vec<ProjectedTrace>)>> {
    let corpus = read_corpus(cfg, THRESHOLDED_FILE)?;
    let clusters = read_clusters(cfg.out_path(CLUSTERS_FILE))?;
    let dir = cfg.out_path(PROJECTED_DIR);
    ensure_dir(&dir)?;
    let projected: Vec<(usize, Vec<ProjectedTrace>)> = clusters
        .par_iter()
        .map(|(id, cluster)| (*id, project_corpus(&corpus, cluster)))
        .collect();
    for (id, traces) in &projected {
        let text: String = traces
            .iter()
            .map(|p| p.to_trace().to_record() + "\n")
            .collect();
        write_text(&dir.join(projected_name(*id)), &text)?;
    }
    Ok(projected)
}

fn read_projected(path: &Path) -> Result<Vec<ProjectedTrace>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(Corpus::parse(&text)?
        .traces()
        .map(|t| ProjectedTrace {
            procedure: t.procedure().to_owned(),
            tokens: t.tokens().to_vec(),
        })
        .collect())
}

/// Mines every projected cluster and writes the DOT files and a manifest.
pub fn stage_mine(cfg: &PipelineConfig) -> Result<Vec<(usize, Option<MinedCluster>)>> {
    let clusters = read_clusters(cfg.out_path(CLUSTERS_FILE))?;
    let projected_dir = cfg.out_path(PROJECTED_DIR);
    let inputs = clusters
        .iter()
        .map(|(id, _)| {
            Ok((
                *id,
                read_projected(&projected_dir.join(projected_name(*id)))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mined: Vec<(usize, Option<MinedCluster>)> = inputs
        .par_iter()
        .map(|(id, traces)| (*id, mine(traces, cfg)))
        .collect();
    let dir = cfg.out_path(MINED_DIR);
    ensure_dir(&dir)?;
    let mut manifest = String::new();
    for ((id, cluster), (_, m)) in clusters.iter().zip(&mined) {
        let terms: Vec<String> = cluster
            .terms()
            .iter()
            .map(|t| t.as_str().to_owned())
            .collect();
        let mut record = serde_json::json!({
            "cluster_id": id,
            "terms": terms,
            "projected": format!("{PROJECTED_DIR}/{}", projected_name(*id)),
        });
        if let Some(m) = m {
            let fsa = format!("cluster_{id}.fsa.dot");
            let markov = format!("cluster_{id}.markov.dot");
            write_text(&dir.join(&fsa), &m.fsa_dot)?;
            write_text(&dir.join(&markov), &m.markov_dot)?;
            record["traces"] = m.traces.into();
            record["fsa"] = fsa.into();
            record["markov"] = markov.into();
        } else {
            record["traces"] = 0.into();
        }
        manifest.push_str(&record.to_string());
        manifest.push('\n');
    }
    write_text(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(mined)
}

/// Scores the clusters file against the gold file into a one-row report.
pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<ScoreReport> {
    let gold_path = cfg
        .gold
        .as_ref()
        .ok_or_else(|| Error::Config("no gold file given".into()))?;
    let gold = GoldBenchmark::read(gold_path)?;
    let clusters: Vec<TermCluster> = read_clusters(cfg.out_path(CLUSTERS_FILE))?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let report = ScoreReport::new(vec![ReportRow::ok(
        GridConfig::from_pipeline(cfg),
        gold.project.clone(),
        score(&clusters, &gold),
    )]);
    report.write_csv(cfg.out_path(REPORT_FILE))?;
    Ok(report)
}

/// Summary of a complete run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub clusters: Vec<TermCluster>,
    pub report: Option<ScoreReport>,
}

/// Runs every stage in order; evaluation only when a gold file is configured.
pub fn run_all(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    write_resolved_config(cfg)?;
    stage_threshold(cfg)?;
    stage_sample(cfg)?;
    stage_embed(cfg)?;
    stage_matrices(cfg)?;
    let clusters = stage_cluster(cfg)?;
    stage_project(cfg)?;
    stage_mine(cfg)?;
    let report = match cfg.gold {
        Some(_) => Some(stage_evaluate(cfg)?),
        None => None,
    };
    Ok(RunSummary {
        out: cfg.out.clone(),
        clusters,
        report,
    })
}

/// The two shipped configurations, as `(name, overrides)`.
pub const PRESETS: [(&str, &[(&str, &str)]); 2] = [
    (
        "preset-a",
        &[
            ("learner", "subword"),
            ("sampler", "diversity"),
            ("alpha", "0.5"),
            ("beta", "0.4"),
            ("epsilon", "0.5"),
        ],
    ),
    (
        "preset-b",
        &[
            ("learner", "subword"),
            ("sampler", "diversity"),
            ("alpha", "0.25"),
            ("beta", "0.35"),
            ("epsilon", "0.1"),
        ],
    ),
];

pub fn preset(base: &PipelineConfig, name: &str) -> Result<PipelineConfig> {
    let (_, overrides) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    let mut cfg = base.clone();
    for (k, v) in overrides.iter() {
        cfg.set(k, v)?;
    }
    cfg.out = base.out.join(name);
    Ok(cfg)
}

/// Outcome of running both presets.
#[derive(Clone, Debug)]
pub struct PresetOutcome {
    pub best: String,
    pub report: ScoreReport,
}

/// Runs both presets into their own subdirectories, writes a combined report
/// and names the better one by pairing score.
pub fn run_presets(base: &PipelineConfig) -> Result<PresetOutcome> {
    if base.gold.is_none() {
        return Err(Error::Config(
            "presets are compared on a gold file; none given".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut best: Option<(String, f64)> = None;
    for (name, _) in PRESETS {
        let cfg = preset(base, name)?;
        let summary = run_all(&cfg)?;
        let report = summary.report.expect("gold is configured");
        let jaccard = report.rows[0].scores.map_or(0.0, |s| s.jaccard);
        if best.as_ref().is_none_or(|(_, b)| jaccard > *b) {
            best = Some((name.to_owned(), jaccard));
        }
        rows.extend(report.rows);
    }
    let report = ScoreReport::new(rows);
    ensure_dir(&base.out)?;
    report.write_csv(base.out_path(REPORT_FILE))?;
    Ok(PresetOutcome {
        best: best.expect("two presets").0,
        report,
    })
}
