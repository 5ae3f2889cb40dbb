use std::collections::BTreeSet;
use std::path::Path;

use crate::corpus::Token;
use crate::dac::{read_clusters, TermCluster};
use crate::error::{Error, Result};
use crate::sampling::jaccard_similarity;

use super::matching::max_weight_matching;

/// Hand-curated reference clusters for one project.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldBenchmark {
    pub project: String,
    pub clusters: Vec<TermCluster>,
}

impl GoldBenchmark {
    pub fn new(project: impl Into<String>, clusters: Vec<TermCluster>) -> Result<GoldBenchmark> {
        if clusters.is_empty() {
            return Err(Error::Format("gold benchmark has no clusters".into()));
        }
        Ok(GoldBenchmark {
            project: project.into(),
            clusters,
        })
    }

    /// Reads a gold file; the project is named after the file stem.
    pub fn read(path: impl AsRef<Path>) -> Result<GoldBenchmark> {
        let path = path.as_ref();
        let project = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clusters = read_clusters(path)?.into_iter().map(|(_, c)| c).collect();
        GoldBenchmark::new(project, clusters)
    }
}

/// Both benchmark scores under one matching.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    /// Mean Jaccard similarity of matched pairs over all gold clusters.
    pub jaccard: f64,
    /// Mean `|E ∩ G| / |G|` of matched pairs over all gold clusters.
    pub intersection: f64,
}

fn intersection_ratio(e: &BTreeSet<Token>, g: &BTreeSet<Token>) -> f64 {
    e.intersection(g).count() as f64 / g.len() as f64
}

/// Gold-to-extracted assignment maximizing the summed Jaccard similarity.
pub fn best_pairing(extracted: &[TermCluster], gold: &GoldBenchmark) -> Vec<Option<usize>> {
    let weights: Vec<Vec<f64>> = gold
        .clusters
        .iter()
        .map(|g| {
            extracted
                .iter()
                .map(|e| jaccard_similarity(e.terms(), g.terms()))
                .collect()
        })
        .collect();
    max_weight_matching(&weights)
}

pub fn score(extracted: &[TermCluster], gold: &GoldBenchmark) -> Scores {
    let pairing = best_pairing(extracted, gold);
    let n = gold.clusters.len() as f64;
    let mut jaccard = 0.0;
    let mut intersection = 0.0;
    for (g, e) in gold.clusters.iter().zip(&pairing) {
        if let Some(e) = e {
            let e = extracted[*e].terms();
            jaccard += jaccard_similarity(e, g.terms());
            intersection += intersection_ratio(e, g.terms());
        }
    }
    Scores {
        jaccard: jaccard / n,
        intersection: intersection / n,
    }
}

pub fn pairing_score(extracted: &[TermCluster], gold: &GoldBenchmark) -> f64 {
    score(extracted, gold).jaccard
}

pub fn intersection_score(extracted: &[TermCluster], gold: &GoldBenchmark) -> f64 {
    score(extracted, gold).intersection
}
