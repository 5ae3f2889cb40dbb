//! Per-procedure trace samplers: diversity sampling, seeded random sampling
//! and the identity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Corpus, Token, Trace};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const DEFAULT_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Diversity,
    Random,
    None,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [
        SamplerKind::Diversity,
        SamplerKind::Random,
        SamplerKind::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Diversity => "diversity",
            SamplerKind::Random => "random",
            SamplerKind::None => "none",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diversity" => Ok(SamplerKind::Diversity),
            "random" => Ok(SamplerKind::Random),
            "none" => Ok(SamplerKind::None),
            other => Err(Error::Config(format!("unknown sampler {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Traces kept per procedure.
    pub samples_per_procedure: usize,
    /// Only used by [`SamplerKind::Random`].
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::Diversity,
            samples_per_procedure: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_procedure == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// `1 - |a ∩ b| / |a ∪ b|`, and 0 when both sets are empty.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    1.0 - jaccard_similarity(a, b)
}

/// `|a ∩ b| / |a ∪ b|`, and 1 when both sets are empty.
pub fn jaccard_similarity<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Applies the configured sampler.
pub fn sample(corpus: &Corpus, cfg: &SamplerConfig) -> Result<Corpus> {
    cfg.validate()?;
    Ok(match cfg.kind {
        SamplerKind::Diversity => diversity_sample(corpus, cfg.samples_per_procedure),
        SamplerKind::Random => random_sample(corpus, cfg.samples_per_procedure, cfg.seed),
        SamplerKind::None => corpus.clone(),
    })
}

/// Means closer than this count as equal, so rounding does not break ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Indices of the traces greedy diversity selection keeps for one group, in
/// selection order.
///
/// The first trace seeds the selection; each round adds the remaining trace
/// with the largest mean Jaccard distance to everything chosen so far. A later
/// candidate replaces an earlier one on equal distance.
pub fn diversity_indices(sets: &[BTreeSet<&Token>], samples: usize) -> Vec<usize> {
    let n = sets.len();
    if n <= samples {
        return (0..n).collect();
    }
    let mut chosen = vec![0usize];
    let mut taken = vec![false; n];
    taken[0] = true;
    // Running sum of distances from each candidate to the chosen traces.
    let mut dist_sum: Vec<f64> = (0..n)
        .map(|i| jaccard_distance(&sets[i], &sets[0]))
        .collect();
    while chosen.len() < samples {
        let mut best_d = 0.0;
        let mut best = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let d = dist_sum[i] / chosen.len() as f64;
            if d >= best_d - TIE_TOLERANCE {
                best = Some(i);
                best_d = d;
            }
        }
        let s = best.expect("a candidate remains while |chosen| < |T|");
        taken[s] = true;
        chosen.push(s);
        for i in (0..n).filter(|&i| !taken[i]) {
            dist_sum[i] += jaccard_distance(&sets[i], &sets[s]);
        }
    }
    chosen
}

/// Diversity sampling, independently per procedure group. Kept traces stay in
/// corpus order.
pub fn diversity_sample(corpus: &Corpus, samples: usize) -> Corpus {
    let groups: Vec<(&str, &[Trace])> = corpus.groups().collect();
    let picked: Vec<Vec<usize>> = groups
        .par_iter()
        .map(|(_, traces)| {
            let sets: Vec<BTreeSet<&Token>> = traces.iter().map(Trace::unique_tokens).collect();
            let mut idx = diversity_indices(&sets, samples);
            idx.sort_unstable();
            idx
        })
        .collect();
    let mut picked = picked.into_iter();
    corpus.map_groups(|_, traces| {
        let idx = picked.next().expect("one selection per group");
        idx.into_iter().map(|i| traces[i].clone()).collect()
    })
}

/// Uniform sampling without replacement, seeded per group from `seed`.
pub fn random_sample(corpus: &Corpus, samples: usize, seed: u64) -> Corpus {
    let mut group_no = 0u64;
    corpus.map_groups(|_, traces| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, group_no));
        group_no += 1;
        if traces.len() <= samples {
            return traces.to_vec();
        }
        let mut idx = index::sample(&mut rng, traces.len(), samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| traces[i].clone()).collect()
    })
}
