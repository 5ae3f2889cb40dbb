use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use specmine::evaluation::{
    grid_search, rank_default_configs, EmbeddingCache, GridSpace, Project, RankedConfig,
};
use specmine::pipeline::{self, run_all, run_presets};
use specmine::synth::{self, SynthSpec};
use specmine::{ingest, Error, GoldBenchmark, PipelineConfig, Result};

const THREADS_ENV: &str = "SPECMINE_THREADS";
const GRID_REPORT_FILE: &str = "gridsearch.csv";
const RANKING_FILE: &str = "ranking.csv";

/// Mine API usage specifications from symbolic traces.
#[derive(Parser)]
#[command(name = "specmine", version)]
struct Cli {
    /// Worker threads; capped by SPECMINE_THREADS when set.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a corpus parses and print its size.
    Validate(Common),
    /// Drop tokens used by too few procedures.
    Threshold(Common),
    /// Pick representative traces per procedure.
    Sample(Common),
    /// Train term embeddings on the sampled traces.
    Embed(Common),
    /// Build the co-occurrence, embedding and blended distance matrices.
    Matrices(Common),
    /// Cluster terms from the blended matrix.
    Cluster(Common),
    /// Project the thresholded traces onto every cluster.
    Project(Common),
    /// Infer an automaton and a Markov model per cluster.
    Mine(Common),
    /// Score the clusters against a gold file.
    Evaluate(Common),
    /// Score every grid configuration on one or more projects.
    Gridsearch(GridArgs),
    /// Generate a synthetic corpus with known clusters.
    Synth(SynthArgs),
    /// Run every stage in order.
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    /// Input corpus (JSON lines).
    #[arg(long)]
    corpus: Option<String>,
    /// Gold clusters (JSON lines).
    #[arg(long)]
    gold: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    min_procs: Option<String>,
    /// diversity, random or none.
    #[arg(long)]
    sampler: Option<String>,
    /// Traces kept per procedure.
    #[arg(long)]
    samples: Option<String>,
    /// subword or plain.
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    ngram_min: Option<String>,
    #[arg(long)]
    ngram_max: Option<String>,
    #[arg(long)]
    cooc_window: Option<String>,
    /// Weight of the co-occurrence matrix in the blend.
    #[arg(long)]
    alpha: Option<String>,
    /// Linking threshold for intra-trace clusters.
    #[arg(long)]
    beta: Option<String>,
    /// DBSCAN radius.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    min_samples: Option<String>,
    /// k-Tails suffix length.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    dedup_ktails: Option<String>,
    #[arg(long)]
    dedup_markov: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 23] {
        [
            ("corpus", &self.corpus),
            ("gold", &self.gold),
            ("out", &self.out),
            ("seed", &self.seed),
            ("min-procs", &self.min_procs),
            ("sampler", &self.sampler),
            ("samples", &self.samples),
            ("learner", &self.learner),
            ("dim", &self.dim),
            ("window", &self.window),
            ("negatives", &self.negatives),
            ("epochs", &self.epochs),
            ("learning-rate", &self.learning_rate),
            ("ngram-min", &self.ngram_min),
            ("ngram-max", &self.ngram_max),
            ("cooc-window", &self.cooc_window),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("epsilon", &self.epsilon),
            ("min-samples", &self.min_samples),
            ("k", &self.k),
            ("dedup-ktails", &self.dedup_ktails),
            ("dedup-markov", &self.dedup_markov),
        ]
    }
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// A project as a corpus file and a gold file; repeatable. Defaults to
    /// the configured corpus and gold.
    #[arg(long, num_args = 2, value_names = ["CORPUS", "GOLD"])]
    project: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    learners: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    samplers: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Per-project cut-off when ranking configurations.
    #[arg(long, default_value_t = 5)]
    top_n: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in generator settings: planted or stems.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// Generator settings as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for corpus.jsonl, gold.jsonl and spec.json.
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

#[derive(Args)]
struct RunAllArgs {
    #[command(flatten)]
    common: Common,
    /// Run both shipped presets and report the better one.
    #[arg(long)]
    presets: bool,
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn stage(
    common: &Common,
    name: &str,
    f: impl FnOnce(&PipelineConfig) -> Result<serde_json::Value>,
) -> Result<()> {
    let cfg = common.resolve()?;
    if name != "validate" {
        pipeline::write_resolved_config(&cfg)?;
    }
    let mut summary = f(&cfg)?;
    summary["stage"] = name.into();
    print(summary);
    Ok(())
}

fn validate(cfg: &PipelineConfig) -> Result<serde_json::Value> {
    let path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("no corpus given".into()))?;
    let corpus = ingest(path)?;
    Ok(json!({
        "traces": corpus.num_traces(),
        "procedures": corpus.num_groups(),
        "vocabulary": corpus.vocabulary().len(),
    }))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(
    items: &Option<Vec<String>>,
    default: Vec<T>,
) -> Result<Vec<T>> {
    match items {
        Some(items) => items.iter().map(|s| s.trim().parse()).collect(),
        None => Ok(default),
    }
}

fn ranking_csv(ranked: &[RankedConfig]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record([
        "rank",
        "count",
        "mean_score",
        "learner",
        "sampler",
        "alpha",
        "beta",
        "epsilon",
    ])
    .map_err(io)?;
    for (i, r) in ranked.iter().enumerate() {
        let c = &r.config;
        w.write_record([
            (i + 1).to_string(),
            r.count.to_string(),
            r.mean_score.to_string(),
            c.learner.to_string(),
            c.sampler.to_string(),
            c.alpha.to_string(),
            c.beta.to_string(),
            c.epsilon.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn load_project(corpus: &Path, gold: &Path) -> Result<Project> {
    let gold = GoldBenchmark::read(gold)?;
    Ok(Project {
        name: gold.project.clone(),
        corpus: ingest(corpus)?,
        gold,
    })
}

fn gridsearch(args: &GridArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let projects = if args.project.is_empty() {
        match (&cfg.corpus, &cfg.gold) {
            (Some(c), Some(g)) => vec![load_project(c, g)?],
            _ => {
                return Err(Error::Config(
                    "gridsearch needs --project or both corpus and gold".into(),
                ))
            }
        }
    } else {
        args.project
            .chunks(2)
            .map(|p| load_project(&p[0], &p[1]))
            .collect::<Result<Vec<_>>>()?
    };
    let table = GridSpace::standard();
    let space = GridSpace {
        learners: parse_list(&args.learners, table.learners)?,
        samplers: parse_list(&args.samplers, table.samplers)?,
        alphas: args.alphas.clone().unwrap_or(table.alphas),
        betas: args.betas.clone().unwrap_or(table.betas),
        epsilons: args.epsilons.clone().unwrap_or(table.epsilons),
    };
    if space.is_empty() {
        return Err(Error::Config("the grid is empty".into()));
    }
    create_dir(&cfg.out)?;
    pipeline::write_resolved_config(&cfg)?;
    let cache = EmbeddingCache::new();
    let report = grid_search(&projects, &space, &cfg, &cache);
    report.write_csv(cfg.out_path(GRID_REPORT_FILE))?;
    let ranked = rank_default_configs(&report, args.top_n);
    write(&cfg.out_path(RANKING_FILE), &ranking_csv(&ranked)?)?;
    let stats = cache.stats();
    let best = ranked.first().map(|r| r.config.to_string());
    print(json!({
        "stage": "gridsearch",
        "configs": space.len(),
        "rows": report.rows.len(),
        "failed": report.rows.iter().filter(|r| r.scores.is_none()).count(),
        "cache_hits": stats.hits,
        "cache_misses": stats.misses,
        "geometric_means": report.geometric_means(),
        "best": best,
    }));
    Ok(())
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut spec = match (&args.preset, &args.spec) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            SynthSpec::from_json(&text)?
        }
        (Some(name), None) => match name.as_str() {
            "planted" => synth::planted(0),
            "stems" => synth::stems(0),
            other => return Err(Error::Config(format!("unknown synth preset {other:?}"))),
        },
        (None, None) => synth::planted(0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (corpus, gold) = synth::generate(&spec)?;
    create_dir(&args.out)?;
    let corpus_path = args.out.join("corpus.jsonl");
    let gold_path = args.out.join("gold.jsonl");
    synth::write(&corpus, &gold, &corpus_path, &gold_path)?;
    write(&args.out.join("spec.json"), &spec.to_json())?;
    print(json!({
        "stage": "synth",
        "corpus": corpus_path,
        "gold": gold_path,
        "traces": corpus.num_traces(),
        "clusters": gold.clusters.len(),
    }));
    Ok(())
}

fn run_all_cmd(args: &RunAllArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    if args.presets {
        let outcome = run_presets(&cfg)?;
        let scores: Vec<_> = outcome
            .report
            .rows
            .iter()
            .map(|r| json!({"config": r.config.to_string(), "jaccard": r.jaccard(), "intersection": r.intersection()}))
            .collect();
        print(json!({"stage": "run-all", "best": outcome.best, "presets": scores}));
        return Ok(());
    }
    let summary = run_all(&cfg)?;
    let mut out = json!({
        "stage": "run-all",
        "out": summary.out,
        "clusters": summary.clusters.len(),
    });
    if let Some(report) = summary.report {
        out["jaccard"] = report.rows[0].jaccard().into();
        out["intersection"] = report.rows[0].intersection().into();
    }
    print(out);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(c) => stage(c, "validate", validate),
        Command::Threshold(c) => stage(c, "threshold", |cfg| {
            let corpus = pipeline::stage_threshold(cfg)?;
            Ok(json!({"traces": corpus.num_traces(), "vocabulary": corpus.vocabulary().len()}))
        }),
        Command::Sample(c) => stage(c, "sample", |cfg| {
            Ok(json!({"traces": pipeline::stage_sample(cfg)?.num_traces()}))
        }),
        Command::Embed(c) => stage(c, "embed", |cfg| {
            Ok(json!({"vectors": pipeline::stage_embed(cfg)?.len()}))
        }),
        Command::Matrices(c) => stage(c, "matrices", |cfg| {
            Ok(json!({"vocabulary": pipeline::stage_matrices(cfg)?.len()}))
        }),
        Command::Cluster(c) => stage(c, "cluster", |cfg| {
            Ok(json!({"clusters": pipeline::stage_cluster(cfg)?.len()}))
        }),
        Command::Project(c) => stage(c, "project", |cfg| {
            Ok(json!({"clusters": pipeline::stage_project(cfg)?.len()}))
        }),
        Command::Mine(c) => stage(c, "mine", |cfg| {
            let mined = pipeline::stage_mine(cfg)?;
            Ok(
                json!({"clusters": mined.len(), "mined": mined.iter().filter(|(_, m)| m.is_some()).count()}),
            )
        }),
        Command::Evaluate(c) => stage(c, "evaluate", |cfg| {
            let report = pipeline::stage_evaluate(cfg)?;
            Ok(
                json!({"jaccard": report.rows[0].jaccard(), "intersection": report.rows[0].intersection()}),
            )
        }),
        Command::Gridsearch(a) => gridsearch(a),
        Command::Synth(a) => synth_cmd(a),
        Command::RunAll(a) => run_all_cmd(a),
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{THREADS_ENV} must be a positive integer, got {v:?}"
                    ))
                })?,
        ),
        Err(_) => None,
    };
    if flag == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(match (flag, cap) {
        (Some(n), Some(c)) => Some(n.min(c)),
        (n, c) => n.or(c),
    })
}

fn fail(kind: &str, message: &str, line: Option<usize>) {
    eprintln!(
        "{}",
        json!({"error": {"kind": kind, "message": message, "line": line}})
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            fail(
                "usage",
                message
                    .lines()
                    .next()
                    .unwrap_or_default()
                    .trim_start_matches("error: "),
                None,
            );
            return ExitCode::from(2);
        }
    };
    let result = thread_count(cli.threads).and_then(|threads| {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        run(&cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(e.kind(), &e.to_string(), e.line());
            ExitCode::FAILURE
        }
    }
}
