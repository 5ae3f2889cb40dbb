//! Domain-adapted clustering: within each trace, link tokens whose blended
//! distance is under `beta`; project traces onto the pooled intra-trace
//! clusters; run DBSCAN over the resulting token sets under Jaccard distance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{json_string, Corpus, Token, Trace};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_SAMPLES: usize = 2;

/// Slack applied to `distance <= epsilon` so that values such as `1 - 0.7`
/// are not pushed out of a neighbourhood by rounding.
pub const EPSILON_SLACK: f64 = 1e-12;

/// A set of related terms. Clusters may overlap.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermCluster {
    terms: BTreeSet<Token>,
}

impl TermCluster {
    pub fn new(terms: BTreeSet<Token>) -> Result<TermCluster> {
        if terms.len() < 2 {
            return Err(Error::Format("a cluster needs at least two terms".into()));
        }
        if let Some(s) = terms.iter().find(|t| t.is_sentinel()) {
            return Err(Error::Format(format!("sentinel {s} in a cluster")));
        }
        Ok(TermCluster { terms })
    }

    pub fn terms(&self) -> &BTreeSet<Token> {
        &self.terms
    }

    pub fn contains(&self, t: &Token) -> bool {
        self.terms.contains(t)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DacConfig {
    /// Weight of the co-occurrence matrix in the blend.
    pub alpha: f64,
    /// Intra-trace linking threshold.
    pub beta: f64,
    /// DBSCAN neighbourhood radius.
    pub epsilon: f64,
    pub min_samples: usize,
}

impl Default for DacConfig {
    fn default() -> Self {
        DacConfig {
            alpha: 0.5,
            beta: 0.4,
            epsilon: 0.5,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

impl DacConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !unit.contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config("epsilon must lie in (0, 1]".into()));
        }
        if self.min_samples == 0 {
            return Err(Error::Config("min-samples must be at least 1".into()));
        }
        Ok(())
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Matrix indices of the trace's distinct non-sentinel tokens, ascending.
fn trace_indices(trace: &Trace, d: &DistanceMatrix) -> Result<Vec<usize>> {
    let mut ids = trace
        .tokens()
        .iter()
        .filter(|t| !t.is_sentinel())
        .map(|t| {
            d.index_of(t)
                .ok_or_else(|| Error::MissingToken(t.to_string()))
        })
        .collect::<Result<Vec<usize>>>()?;
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Connected components (size >= 2) of the graph linking tokens at distance
/// strictly below `beta`, as sorted matrix indices.
fn components(ids: &[usize], d: &DistanceMatrix, beta: f64) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(ids.len());
    for i in 0..ids.len() {
        for j in 0..i {
            if d.get(ids[i], ids[j]) < beta {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(id);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

/// Intra-trace clusters of one trace.
pub fn intra_trace_clusters(
    trace: &Trace,
    d: &DistanceMatrix,
    beta: f64,
) -> Result<BTreeSet<BTreeSet<Token>>> {
    let ids = trace_indices(trace, d)?;
    Ok(components(&ids, d, beta)
        .into_iter()
        .map(|c| c.into_iter().map(|i| d.vocab()[i].clone()).collect())
        .collect())
}

/// A trace's distinct tokens restricted to one intra-trace cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedTrace {
    pub terms: BTreeSet<Token>,
    /// Position of the source trace in corpus order.
    pub trace: usize,
    /// Position of the cluster in the list it was reduced against.
    pub cluster: usize,
}

/// Every trace intersected with every cluster; intersections with fewer than
/// two terms are dropped, duplicates are kept.
pub fn reduced_traces(corpus: &Corpus, clusters: &[BTreeSet<Token>]) -> Vec<ReducedTrace> {
    let mut out = Vec::new();
    for (ti, trace) in corpus.traces().enumerate() {
        let unique = trace.unique_tokens();
        for (ci, cluster) in clusters.iter().enumerate() {
            let terms: BTreeSet<Token> = cluster
                .iter()
                .filter(|t| unique.contains(t))
                .cloned()
                .collect();
            if terms.len() >= 2 {
                out.push(ReducedTrace {
                    terms,
                    trace: ti,
                    cluster: ci,
                });
            }
        }
    }
    out
}

fn bitset(ids: impl IntoIterator<Item = usize>, words: usize) -> Vec<u64> {
    let mut bits = vec![0u64; words];
    for i in ids {
        bits[i / 64] |= 1 << (i % 64);
    }
    bits
}

fn bit_indices(bits: &[u64]) -> impl Iterator<Item = usize> + '_ {
    bits.iter().enumerate().flat_map(|(w, &x)| {
        (0..64)
            .filter(move |b| x >> b & 1 == 1)
            .map(move |b| w * 64 + b)
    })
}

fn bit_jaccard_distance(a: &[u64], b: &[u64]) -> f64 {
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.iter().zip(b) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// DBSCAN over distinct sets carrying multiplicities. A set is a core point
/// when the multiplicities within `epsilon` (itself included) add up to
/// `min_samples`. Copies of one set always share a label, so this is
/// equivalent to running DBSCAN on the expanded list.
fn weighted_dbscan(
    sets: &[Vec<u64>],
    weights: &[usize],
    epsilon: f64,
    min_samples: usize,
) -> Vec<Option<usize>> {
    let n = sets.len();
    let near =
        |i: usize, j: usize| bit_jaccard_distance(&sets[i], &sets[j]) <= epsilon + EPSILON_SLACK;
    let core: Vec<bool> = (0..n)
        .map(|i| {
            let mut mass = 0;
            for (j, w) in weights.iter().enumerate() {
                if near(i, j) {
                    mass += w;
                    if mass >= min_samples {
                        return true;
                    }
                }
            }
            false
        })
        .collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        labels[start] = Some(next);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for q in 0..n {
                if labels[q].is_none() && near(p, q) {
                    labels[q] = Some(next);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

/// Distinct bitsets in order of first appearance, with multiplicities.
#[derive(Default)]
struct Multiset {
    slot: HashMap<Vec<u64>, usize>,
    sets: Vec<Vec<u64>>,
    weights: Vec<usize>,
}

impl Multiset {
    fn insert(&mut self, bits: Vec<u64>) -> usize {
        let s = match self.slot.get(&bits) {
            Some(&s) => s,
            None => {
                self.sets.push(bits.clone());
                self.weights.push(0);
                self.slot.insert(bits, self.sets.len() - 1);
                self.sets.len() - 1
            }
        };
        self.weights[s] += 1;
        s
    }
}

/// Per-point DBSCAN labels (`None` for noise) under Jaccard distance.
/// Clusters are numbered in order of their first core point.
pub fn dbscan_labels<T: Ord + Clone>(
    points: &[BTreeSet<T>],
    epsilon: f64,
    min_samples: usize,
) -> Vec<Option<usize>> {
    let ids: BTreeMap<&T, usize> = points
        .iter()
        .flatten()
        .collect::<BTreeSet<&T>>()
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let words = ids.len().div_ceil(64).max(1);
    let mut multiset = Multiset::default();
    let of_point: Vec<usize> = points
        .iter()
        .map(|p| multiset.insert(bitset(p.iter().map(|t| ids[t]), words)))
        .collect();
    let labels = weighted_dbscan(&multiset.sets, &multiset.weights, epsilon, min_samples);
    of_point.into_iter().map(|s| labels[s]).collect()
}

/// DBSCAN over token sets; each cluster becomes the union of its members.
pub fn dbscan(points: &[BTreeSet<Token>], epsilon: f64, min_samples: usize) -> Vec<TermCluster> {
    let labels = dbscan_labels(points, epsilon, min_samples);
    let mut unions: BTreeMap<usize, BTreeSet<Token>> = BTreeMap::new();
    for (p, label) in points.iter().zip(labels) {
        if let Some(l) = label {
            unions.entry(l).or_default().extend(p.iter().cloned());
        }
    }
    let set: BTreeSet<TermCluster> = unions
        .into_values()
        .filter_map(|terms| TermCluster::new(terms).ok())
        .collect();
    set.into_iter().collect()
}

/// Intra-trace clusters pooled over the whole corpus, deduplicated.
pub fn pooled_intra_trace_clusters(
    corpus: &Corpus,
    d: &DistanceMatrix,
    beta: f64,
) -> Result<Vec<BTreeSet<Token>>> {
    let mut pooled: BTreeSet<Vec<usize>> = BTreeSet::new();
    for trace in corpus.traces() {
        let ids = trace_indices(trace, d)?;
        pooled.extend(components(&ids, d, beta));
    }
    Ok(pooled
        .into_iter()
        .map(|c| c.into_iter().map(|i| d.vocab()[i].clone()).collect())
        .collect())
}

/// The full clustering pipeline over an already blended matrix: pooled
/// intra-trace clusters, reduced traces and DBSCAN, computed on bitsets.
pub fn run_dac(corpus: &Corpus, d: &DistanceMatrix, cfg: &DacConfig) -> Result<Vec<TermCluster>> {
    cfg.validate()?;
    let words = d.len().div_ceil(64).max(1);
    let mut pooled: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut traces = Vec::with_capacity(corpus.num_traces());
    for trace in corpus.traces() {
        let ids = trace_indices(trace, d)?;
        pooled.extend(components(&ids, d, cfg.beta));
        traces.push(bitset(ids, words));
    }
    if pooled.is_empty() {
        return Ok(Vec::new());
    }
    let clusters: Vec<Vec<u64>> = pooled.into_iter().map(|c| bitset(c, words)).collect();
    let mut multiset = Multiset::default();
    for t in &traces {
        for c in &clusters {
            let reduced: Vec<u64> = t.iter().zip(c).map(|(x, y)| x & y).collect();
            if reduced.iter().map(|x| x.count_ones()).sum::<u32>() >= 2 {
                multiset.insert(reduced);
            }
        }
    }
    let labels = weighted_dbscan(
        &multiset.sets,
        &multiset.weights,
        cfg.epsilon,
        cfg.min_samples,
    );
    let mut unions: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (set, label) in multiset.sets.iter().zip(labels) {
        if let Some(l) = label {
            let u = unions.entry(l).or_insert_with(|| vec![0; words]);
            for (x, y) in u.iter_mut().zip(set) {
                *x |= y;
            }
        }
    }
    let out: BTreeSet<TermCluster> = unions
        .values()
        .filter_map(|u| {
            TermCluster::new(bit_indices(u).map(|i| d.vocab()[i].clone()).collect()).ok()
        })
        .collect();
    Ok(out.into_iter().collect())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRecord {
    cluster_id: usize,
    terms: Vec<String>,
}

/// One `{"cluster_id": k, "terms": [...]}` record per line.
pub fn clusters_to_text(clusters: &[TermCluster]) -> String {
    let mut out = String::new();
    for (k, c) in clusters.iter().enumerate() {
        let terms: Vec<String> = c.terms.iter().map(|t| json_string(t.as_str())).collect();
        out.push_str(&format!(
            "{{\"cluster_id\": {k}, \"terms\": [{}]}}\n",
            terms.join(", ")
        ));
    }
    out
}

/// Parses cluster records, returned in file order with their ids.
pub fn parse_cluster_records(text: &str) -> Result<Vec<(usize, TermCluster)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::Parse {
            line: i + 1,
            message: m,
        };
        let rec: ClusterRecord = serde_json::from_str(trimmed).map_err(|e| err(e.to_string()))?;
        let terms = rec
            .terms
            .iter()
            .map(|t| Token::parse(t))
            .collect::<Result<BTreeSet<Token>>>()
            .map_err(|e| err(e.to_string()))?;
        let cluster = TermCluster::new(terms).map_err(|e| err(e.to_string()))?;
        out.push((rec.cluster_id, cluster));
    }
    Ok(out)
}

pub fn write_clusters(path: impl AsRef<Path>, clusters: &[TermCluster]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, clusters_to_text(clusters)).map_err(|e| Error::io(path, e))
}

pub fn read_clusters(path: impl AsRef<Path>) -> Result<Vec<(usize, TermCluster)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cluster_records(&text)
}
