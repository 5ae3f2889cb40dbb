//! Acceptance gate. Each test prints one PASS/FAIL line straight to stderr so
//! the verdicts show up even when output capture is on.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmine::embedding::{embedding_distance_matrix, train, SkipGram};
use specmine::evaluation::{
    grid_search, pairing_score, EmbeddingCache, GridSpace, Project, ReportRow, ScoreReport,
};
use specmine::mining::{dedup_projections, fit_seq_model, ktails, project, project_corpus};
use specmine::pipeline::{run_all, CLUSTERS_FILE, REPORT_FILE};
use specmine::sampling::{diversity_sample, jaccard_distance};
use specmine::{
    blend, cooccurrence_distance_matrix, synth, Corpus, DistanceMatrix, EmbeddingConfig,
    GoldBenchmark, Learner, PipelineConfig, SamplerKind, TermCluster, Token, Trace,
};

use common::*;

fn verdict(n: u32, ok: bool, detail: String) {
    let line = format!(
        "acceptance criterion {n}: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Diversity sampling against a literal transcription of the greedy loop.

fn reference_diversity(group: &[BTreeSet<String>], samples: usize) -> Vec<usize> {
    if group.len() <= samples {
        return (0..group.len()).collect();
    }
    let mut choices = vec![0];
    while choices.len() < samples {
        let mut d_star = 0.0;
        let mut s = None;
        for t in 0..group.len() {
            if choices.contains(&t) {
                continue;
            }
            let mut total = 0.0;
            for &c in &choices {
                total += jaccard_distance(&group[t], &group[c]);
            }
            let d = total / choices.len() as f64;
            if d >= d_star {
                s = Some(t);
                d_star = d;
            }
        }
        choices.push(s.unwrap());
    }
    choices.sort();
    choices
}

#[test]
fn criterion_1_diversity_sampling_matches_reference() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet = ["a", "b", "c", "d", "e", "f"];
    let mut mismatches = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let samples = rng.random_range(1..=3);
        let traces: Vec<Trace> = (0..n)
            .map(|_| {
                let len = rng.random_range(0..5);
                let mut toks = vec!["$START"];
                toks.extend((0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]));
                toks.push("$END");
                Trace::parse(format!("p{case}"), &toks).unwrap()
            })
            .collect();
        let sets: Vec<BTreeSet<String>> = traces
            .iter()
            .map(|t| t.tokens().iter().map(|x| x.as_str().to_owned()).collect())
            .collect();
        let want: Vec<Trace> = reference_diversity(&sets, samples)
            .into_iter()
            .map(|i| traces[i].clone())
            .collect();
        let got = diversity_sample(&Corpus::from_traces(traces), samples);
        if got.traces().cloned().collect::<Vec<_>>() != want {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{mismatches} mismatches in 200 groups, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Pairing score against exhaustive enumeration of injective pairings.

fn jaccard(a: &BTreeSet<Token>, b: &BTreeSet<Token>) -> f64 {
    let inter = a.intersection(b).count() as f64;
    inter / a.union(b).count() as f64
}

/// Best total over every way of giving each gold cluster a distinct
/// extracted cluster or none.
fn brute_force_pairing(extracted: &[TermCluster], gold: &[TermCluster]) -> f64 {
    fn go(g: usize, used: &mut Vec<bool>, e: &[TermCluster], gold: &[TermCluster]) -> f64 {
        if g == gold.len() {
            return 0.0;
        }
        let mut best = go(g + 1, used, e, gold);
        for i in 0..e.len() {
            if !used[i] {
                used[i] = true;
                best = best.max(jaccard(e[i].terms(), gold[g].terms()) + go(g + 1, used, e, gold));
                used[i] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; extracted.len()], extracted, gold) / gold.len() as f64
}

fn random_cluster(rng: &mut ChaCha8Rng) -> TermCluster {
    let vocab = ["a", "b", "c", "d", "e", "f", "g", "h"];
    loop {
        let terms: BTreeSet<Token> = vocab
            .iter()
            .filter(|_| rng.random_bool(0.35))
            .map(|s| Token::parse(s).unwrap())
            .collect();
        if let Ok(c) = TermCluster::new(terms) {
            return c;
        }
    }
}

#[test]
fn criterion_2_pairing_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let gold: Vec<TermCluster> = (0..rng.random_range(1..=6))
            .map(|_| random_cluster(&mut rng))
            .collect();
        let extracted: Vec<TermCluster> = (0..rng.random_range(0..=6))
            .map(|_| random_cluster(&mut rng))
            .collect();
        let want = brute_force_pairing(&extracted, &gold);
        let got = pairing_score(&extracted, &GoldBenchmark::new("g", gold).unwrap());
        worst = worst.max((want - got).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        worst <= 1e-12 && elapsed < Duration::from_secs(30),
        format!("max deviation {worst:e} over 500 instances, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 3 and 4. Planted-cluster recovery and the benefit of blending.

const SYNTH_SEED: u64 = 1;

fn planted_sweep() -> &'static (ScoreReport, Duration) {
    static SWEEP: OnceLock<(ScoreReport, Duration)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let (corpus, gold) = synth::generate(&synth::planted(SYNTH_SEED)).unwrap();
        let project = Project {
            name: "planted".into(),
            corpus,
            gold,
        };
        let space = GridSpace {
            learners: vec![Learner::Subword],
            samplers: vec![SamplerKind::Diversity],
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            betas: vec![0.3, 0.4],
            epsilons: vec![0.3, 0.5],
        };
        let base = PipelineConfig {
            seed: SYNTH_SEED,
            ..PipelineConfig::default()
        };
        let report = grid_search(&[project], &space, &base, &EmbeddingCache::new());
        (report, start.elapsed())
    })
}

fn best_where(report: &ScoreReport, keep: impl Fn(&ReportRow) -> bool) -> Option<&ReportRow> {
    report
        .rows
        .iter()
        .filter(|r| keep(r))
        .max_by(|a, b| a.jaccard().total_cmp(&b.jaccard()))
}

#[test]
fn criterion_3_planted_clusters_are_recovered() {
    let (report, elapsed) = planted_sweep();
    let best = best_where(report, |r| [0.5, 0.75].contains(&r.config.alpha)).unwrap();
    let ok =
        best.jaccard() >= 0.85 && best.intersection() >= 0.9 && *elapsed < Duration::from_secs(300);
    verdict(
        3,
        ok,
        format!(
            "best {} pairing {:.3} intersection {:.3}, {elapsed:.1?}",
            best.config,
            best.jaccard(),
            best.intersection()
        ),
    );
}

#[test]
fn criterion_4_blending_beats_either_matrix_alone() {
    let (report, _) = planted_sweep();
    let best_at = |pred: &dyn Fn(f64) -> bool| {
        best_where(report, |r| pred(r.config.alpha))
            .unwrap()
            .jaccard()
    };
    let interior = best_at(&|a| a > 0.0 && a < 1.0);
    let only_embedding = best_at(&|a| a == 0.0);
    let only_cooccurrence = best_at(&|a| a == 1.0);
    let margin = interior - only_embedding.max(only_cooccurrence);
    verdict(
        4,
        margin >= 0.02,
        format!(
            "interior {interior:.3}, alpha=0 {only_embedding:.3}, alpha=1 {only_cooccurrence:.3}, margin {margin:.3}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Subword information helps when pattern terms share stems.

#[test]
fn criterion_5_subword_learner_helps_on_shared_stems() {
    let space = GridSpace {
        learners: Learner::ALL.to_vec(),
        samplers: vec![SamplerKind::Diversity],
        alphas: vec![0.25, 0.5, 0.75],
        betas: vec![0.3, 0.4],
        epsilons: vec![0.3, 0.5],
    };
    let mut wins = 0;
    let mut details = Vec::new();
    for seed in 1..=3 {
        let (corpus, gold) = synth::generate(&synth::stems(seed)).unwrap();
        let project = Project {
            name: "stems".into(),
            corpus,
            gold,
        };
        let base = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let report = grid_search(&[project], &space, &base, &EmbeddingCache::new());
        let best = |l: Learner| {
            best_where(&report, |r| r.config.learner == l)
                .unwrap()
                .jaccard()
        };
        let (sub, plain) = (best(Learner::Subword), best(Learner::Plain));
        if sub >= plain {
            wins += 1;
        }
        details.push(format!("seed {seed}: subword {sub:.3} plain {plain:.3}"));
    }
    verdict(
        5,
        wins >= 2,
        format!("{wins}/3 seeds; {}", details.join(", ")),
    );
}

// ---------------------------------------------------------------------------
// 6. The iterator example.

#[test]
fn criterion_6_worked_example() {
    let iter = cluster(ITERATOR_CLUSTER);
    let projected = project(&iterator_trace(), &iter).unwrap();
    let a = strs(projected.inner()) == ITERATOR_PROJECTION;

    let seqs = |traces: &[Trace]| -> Vec<Vec<Token>> {
        let corpus = Corpus::from_traces(traces.to_vec());
        project_corpus(&corpus, &iter)
            .into_iter()
            .map(|p| p.tokens)
            .collect()
    };
    let model = fit_seq_model(&seqs(&two_three_traces()));
    let p_ne = model.probability("dictNext", "dictNext != 0");
    let p_eq = model.probability("dictNext", "dictNext == 0");
    let b = p_ne == 0.4 && p_eq == 0.6;

    let corpus = Corpus::from_traces(iterator_paths("redisIterate"));
    let training: Vec<Vec<Token>> = dedup_projections(&project_corpus(&corpus, &iter))
        .into_iter()
        .map(|p| p.tokens)
        .collect();
    let fsa = ktails(&training, 2);
    let accepts_training = training.iter().all(|t| fsa.accepts(t));
    let early_release = tokens(&[
        "$START",
        "dictGetIterator",
        "dictGetIterator -> dictReleaseIterator",
        "dictReleaseIterator",
        "$END",
    ]);
    let c = accepts_training && !fsa.accepts(&early_release);
    verdict(
        6,
        a && b && c,
        format!(
            "projection {}, P(!= 0)={p_ne} P(== 0)={p_eq}, k-tails accepts training {accepts_training} rejects early release {}",
            if a { "exact" } else { "differs" },
            !fsa.accepts(&early_release)
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Determinism of complete runs.

#[test]
fn criterion_7_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, gold) = synth::generate(&synth::planted(7)).unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let gold_path = dir.path().join("gold.jsonl");
    synth::write(&corpus, &gold, &corpus_path, &gold_path).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let run = |name: &str| {
        let cfg = PipelineConfig {
            corpus: Some(corpus_path.clone()),
            gold: Some(gold_path.clone()),
            out: dir.path().join(name),
            seed: 11,
            ..PipelineConfig::default()
        };
        pool.install(|| run_all(&cfg)).unwrap();
        let read = |f: &str| std::fs::read(cfg.out.join(f)).unwrap();
        (read(CLUSTERS_FILE), read(REPORT_FILE))
    };
    let first = run("first");
    let second = run("second");
    verdict(
        7,
        first == second && !first.0.is_empty(),
        format!(
            "clusters file {} bytes identical {}, report identical {}",
            first.0.len(),
            first.0 == second.0,
            first.1 == second.1
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Gradient check and matrix well-formedness.

fn gradient_check_error(seed: u64) -> f64 {
    let corpus = Corpus::from_traces([
        Trace::parse("p", &["$START", "fopen", "fread", "fclose", "$END"]).unwrap(),
        Trace::parse("q", &["$START", "fopen", "fopen == 0", "$END"]).unwrap(),
    ]);
    let cfg = EmbeddingConfig {
        dim: 6,
        ngram_min: 3,
        ngram_max: 4,
        ..EmbeddingConfig::default()
    };
    let mut model = SkipGram::new(&corpus, &cfg).unwrap();
    model.randomize(0.8, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.words().len();
    let center = rng.random_range(0..n);
    let targets: Vec<(usize, Vec<usize>)> = (0..rng.random_range(1..=3))
        .map(|_| {
            (
                rng.random_range(0..n),
                (0..3).map(|_| rng.random_range(0..n)).collect(),
            )
        })
        .collect();
    let grad = model.position_gradient(center, &targets);
    let dim = model.dim();
    let h = 1e-6;
    let (mut diff, mut norm) = (0.0f64, 0.0f64);
    let mut check = |model: &mut SkipGram, output: bool, row: usize, g: &[f64]| {
        for (k, &analytic) in g.iter().enumerate().take(dim) {
            let idx = row * dim + k;
            let nudge = |m: &mut SkipGram, delta: f64| {
                let params = if output {
                    m.output_params()
                } else {
                    m.input_params()
                };
                params[idx] += delta;
            };
            nudge(model, h);
            let up = model.position_loss(center, &targets);
            nudge(model, -2.0 * h);
            let down = model.position_loss(center, &targets);
            nudge(model, h);
            let numeric = (up - down) / (2.0 * h);
            diff += (numeric - analytic).powi(2);
            norm += numeric.powi(2).max(analytic.powi(2));
        }
    };
    for (row, g) in &grad.input {
        check(&mut model, false, *row, g);
    }
    for (row, g) in &grad.output {
        check(&mut model, true, *row, g);
    }
    (diff / norm.max(1e-300)).sqrt()
}

fn well_formed(m: &DistanceMatrix) -> bool {
    (0..m.len()).all(|i| {
        m.get(i, i) == 0.0
            && (0..m.len())
                .all(|j| m.get(i, j) == m.get(j, i) && (0.0..=1.0).contains(&m.get(i, j)))
    })
}

#[test]
fn criterion_8_gradients_and_matrices() {
    let worst_grad = (0..10).map(gradient_check_error).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let names = [
        "open",
        "read",
        "close",
        "open == 0",
        "read -> close",
        "$RET 0",
        "log",
    ];
    let mut bad = 0;
    for i in 0..100 {
        let traces: Vec<Trace> = (0..rng.random_range(2..6))
            .map(|t| {
                let mut toks = vec!["$START"];
                toks.extend(
                    (0..rng.random_range(1..7)).map(|_| names[rng.random_range(0..names.len())]),
                );
                toks.push("$END");
                Trace::parse(format!("p{t}"), &toks).unwrap()
            })
            .collect();
        let corpus = Corpus::from_traces(traces);
        let vocab: Vec<Token> = corpus
            .vocabulary()
            .into_iter()
            .filter(|t| !t.is_sentinel())
            .collect();
        if vocab.len() < 2 {
            continue;
        }
        let a = cooccurrence_distance_matrix(&corpus, &vocab, rng.random_range(1..4)).unwrap();
        let cfg = EmbeddingConfig {
            dim: 8,
            epochs: 1,
            seed: i,
            ..EmbeddingConfig::default()
        };
        let b = embedding_distance_matrix(&train(&corpus, &cfg).unwrap(), &vocab).unwrap();
        let c = blend(&a, &b, rng.random_range(0.0..=1.0)).unwrap();
        if !(well_formed(&a) && well_formed(&b) && well_formed(&c)) {
            bad += 1;
        }
    }
    verdict(
        8,
        worst_grad <= 1e-4 && bad == 0,
        format!("worst relative gradient error {worst_grad:.2e}, {bad} malformed matrix sets out of 100"),
    );
}

// ---------------------------------------------------------------------------
// 9. Grid enumeration and embedding reuse.

#[test]
fn criterion_9_grid_mechanics() {
    let spec = synth::SynthSpec {
        procedures: 6,
        traces_per_procedure: 4,
        noise_vocab_size: 5,
        ..synth::planted(9)
    };
    let (corpus, gold) = synth::generate(&spec).unwrap();
    let project = Project {
        name: "small".into(),
        corpus,
        gold,
    };
    let space = GridSpace::standard();
    let cache = EmbeddingCache::new();
    let base = PipelineConfig {
        dim: 16,
        ..PipelineConfig::default()
    };
    let report = grid_search(&[project], &space, &base, &cache);
    let stats = cache.stats();
    let csv_rows = report.to_csv().unwrap().lines().count() - 1;
    verdict(
        9,
        report.rows.len() == 1050 && csv_rows == 1050 && stats.hits >= 1020,
        format!(
            "{} configs, {csv_rows} csv rows, cache hits {} misses {}",
            report.rows.len(),
            stats.hits,
            stats.misses
        ),
    );
}
