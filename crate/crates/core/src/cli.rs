//! Command-line driver. `run` returns the process exit code: 0 on success,
//! 2 for usage or configuration errors, 3 for algorithmic failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    ammar_shah_scores, borda_scores, btl_log_odds, cascade_mle, eigenvector_scores, empirical_log_odds_scores,
    thurstone_mosteller_scores, win_counts, AverageAdjacency, CascadeMle, EmpiricalLogOdds, SingleJudgment,
    StructureFunction,
};
use crate::datagen::{generate, GeneratorConfig};
use crate::error::Error;
use crate::experiments::{sweep_k, ExperimentConfig, EXPERIMENT_DISCOUNT, EXPERIMENT_GAIN, SWEEP_COLUMNS};
use crate::lab::{construct_low_noise_counterexample, inconsistency_report, LabSurrogate, SearchConfig};
use crate::letor::{letor_parse, letor_serialize};
use crate::losses::{
    BtlLogistic, ConvexPhi, Difference, Margin, MarginMap, NdcgRegression, PairwiseEdgeLoss, PairwisePhi, PenaltyMap,
    Surrogate, Zhang,
};
use crate::optimizer::{prox_sgd_train, ScheduleKind, StepSchedule, TrainConfig};
use crate::risk::UStatConfig;
use crate::types::{ClickRecord, ComparisonPreference, Judgment, QueryDataset};

pub const SCHEMA_VERSION: u32 = 1;
pub const DATA_FILE: &str = "data.letor";
pub const JUDGMENTS_FILE: &str = "judgments.json";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Algorithm(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoWitness(_)
            | Error::NoConvergence { .. }
            | Error::NonFiniteGradient { .. }
            | Error::Lp(_)
            | Error::Disconnected
            | Error::InfiniteLogOdds => CliError::Algorithm(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "aggrank", about = "Ranking from partial preferences", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset from a JSON generator config.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a linear scorer by proximal SGD on the U-statistic risk.
    Train {
        /// Dataset directory written by gen-data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        surrogate: String,
        #[command(flatten)]
        opt: TrainArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Output directory for model.json and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// NDCG risk of regression, logistic and reference models across k.
    SweepK {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,25,100")]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Number of seeds, counting up from --seed.
        #[arg(long, default_value_t = 3)]
        reps: u64,
        #[command(flatten)]
        opt: TrainArgs,
        /// Output directory for sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a low-noise counterexample and write the inconsistency report.
    DemoInconsistency {
        #[arg(long)]
        phi: String,
        /// Surrogate family reported on the found instance.
        #[arg(long, default_value = "pairwise")]
        surrogate: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a judgments file into per-query structures.
    Aggregate {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 1.0)]
        smoothing: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value = "inv_sqrt_t")]
    schedule: String,
    #[arg(long = "step-scale", default_value_t = 0.5)]
    step_scale: f64,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Log-odds smoothing constant.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
}

impl TrainArgs {
    fn schedule(&self) -> CliResult<StepSchedule> {
        let kind: ScheduleKind = self.schedule.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
        Ok(StepSchedule::new(kind, self.step_scale)?)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Algorithm(msg)) => {
            eprintln!("failure: {msg}");
            3
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenData { config, seed, out } => gen_data(&config, seed, &out),
        Command::Train { data, surrogate, opt, k, out } => train(&data, &surrogate, k, &opt, &out),
        Command::SweepK { data, ks, ns, reps, opt, out } => sweep(&data, &ks, &ns, reps, &opt, &out),
        Command::DemoInconsistency { phi, surrogate, seed, budget, out } => {
            demo_inconsistency(&phi, &surrogate, seed, budget, &out)
        }
        Command::Aggregate { judgments, method, smoothing, out } => aggregate(&judgments, &method, smoothing, &out),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// One query's judgments in the sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryJudgments {
    pub query_id: String,
    /// Number of items; inferred from the largest index when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<Vec<Session>>,
}

/// A click session; `clicked` is the 1-based clicked position, or
/// `presented.len() + 1` when nothing was clicked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub presented: Vec<usize>,
    pub clicked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentsFile {
    pub schema_version: u32,
    /// Linear part of the generating relevance model, when synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub queries: Vec<QueryJudgments>,
}

impl QueryJudgments {
    fn from_judgments(query_id: &str, m: usize, js: &[Judgment]) -> CliResult<Self> {
        let mut pairs = Vec::new();
        let mut sessions = Vec::new();
        for j in js {
            match j {
                Judgment::Comparison(c) => pairs.push([c.winner, c.loser]),
                Judgment::Click(c) => {
                    sessions.push(Session { presented: c.presented().to_vec(), clicked: c.clicked_position() })
                }
                Judgment::Adjacency(_) => {
                    return Err(CliError::Usage("adjacency judgments have no sidecar encoding".into()))
                }
            }
        }
        if !pairs.is_empty() && !sessions.is_empty() {
            return Err(CliError::Usage(format!("query {query_id} mixes pairs and sessions")));
        }
        let (pairs, sessions) = if !sessions.is_empty() { (None, Some(sessions)) } else { (Some(pairs), None) };
        Ok(Self { query_id: query_id.to_string(), m: Some(m), pairs, sessions })
    }

    fn item_count(&self) -> usize {
        self.m.unwrap_or_else(|| {
            let from_pairs = self.pairs.iter().flatten().flat_map(|p| p.iter().copied());
            let from_sessions = self.sessions.iter().flatten().flat_map(|s| s.presented.iter().copied());
            from_pairs.chain(from_sessions).max().map_or(0, |x| x + 1)
        })
    }

    fn judgments(&self, m: usize) -> CliResult<Vec<Judgment>> {
        let mut out = Vec::new();
        if self.pairs.is_some() && self.sessions.is_some() {
            return Err(CliError::Usage(format!("query {} has both pairs and sessions", self.query_id)));
        }
        for p in self.pairs.iter().flatten() {
            out.push(Judgment::Comparison(ComparisonPreference::new(p[0], p[1], m)?));
        }
        for s in self.sessions.iter().flatten() {
            out.push(Judgment::Click(ClickRecord::new(s.presented.clone(), s.clicked, m)?));
        }
        Ok(out)
    }
}

fn gen_data(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut cfg: GeneratorConfig =
        serde_json::from_str(&read(config)?).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let g = generate(&cfg)?;
    let queries = g
        .dataset
        .queries()
        .iter()
        .map(|q| QueryJudgments::from_judgments(&q.id, q.m(), &q.judgments))
        .collect::<CliResult<_>>()?;
    let side = JudgmentsFile { schema_version: SCHEMA_VERSION, theta: Some(g.theta), queries };
    write(&out.join(DATA_FILE), &letor_serialize(&g.dataset))?;
    write(&out.join(JUDGMENTS_FILE), &to_json(&side))
}

/// Reads `data.letor` and attaches the judgments from `judgments.json` when
/// that file exists.
pub fn load_dataset(dir: &Path) -> std::result::Result<QueryDataset, String> {
    load(dir).map_err(|e| match e {
        CliError::Usage(m) | CliError::Algorithm(m) => m,
    })
}

fn load(dir: &Path) -> CliResult<QueryDataset> {
    let path = dir.join(DATA_FILE);
    let mut data = letor_parse(&read(&path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let side_path = dir.join(JUDGMENTS_FILE);
    if side_path.exists() {
        let side: JudgmentsFile = serde_json::from_str(&read(&side_path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", side_path.display())))?;
        for qj in &side.queries {
            let q = data
                .queries()
                .iter()
                .position(|q| q.id == qj.query_id)
                .ok_or_else(|| CliError::Usage(format!("judgments for unknown query {}", qj.query_id)))?;
            let m = data.query(q).m();
            if qj.m.is_some_and(|v| v != m) {
                return Err(CliError::Usage(format!("query {} has {m} items in the LETOR file", qj.query_id)));
            }
            data.set_judgments(q, qj.judgments(m)?)?;
        }
    }
    Ok(data)
}

pub const SURROGATE_NAMES: &str =
    "reg, logistic, pairwise-<phi>, margin-<phi>, difference-<phi>, zhang-<phi> (phi: hinge, logistic, exponential, squared-hinge)";

/// Surrogate and matching structure function for a training run.
fn training_setup(
    name: &str,
    clicks: bool,
    smoothing: f64,
) -> CliResult<(Box<dyn Surrogate>, Box<dyn StructureFunction>)> {
    let unknown = || CliError::Usage(format!("unknown surrogate '{name}'; valid names: {SURROGATE_NAMES}"));
    let scores: Box<dyn StructureFunction> =
        if clicks { Box::new(CascadeMle) } else { Box::new(EmpiricalLogOdds { smoothing }) };
    let phi_of = |rest: &str| rest.parse::<ConvexPhi>().map_err(|_| unknown());
    let setup: (Box<dyn Surrogate>, Box<dyn StructureFunction>) = match name {
        "reg" => (Box::new(NdcgRegression { gain: EXPERIMENT_GAIN, discount: EXPERIMENT_DISCOUNT }), scores),
        "logistic" => (Box::new(BtlLogistic), Box::new(SingleJudgment)),
        _ => match name.split_once('-') {
            Some(("pairwise", rest)) => (
                Box::new(PairwisePhi { penalty: PenaltyMap::Identity, phi: phi_of(rest)? }),
                Box::new(AverageAdjacency),
            ),
            Some(("margin", rest)) => {
                (Box::new(Margin { margin: MarginMap::Identity, phi: phi_of(rest)? }), Box::new(AverageAdjacency))
            }
            Some(("difference", rest)) => (Box::new(Difference { phi: phi_of(rest)? }), Box::new(AverageAdjacency)),
            Some(("zhang", rest)) => {
                (Box::new(Zhang { gain: EXPERIMENT_GAIN, discount: EXPERIMENT_DISCOUNT, phi: phi_of(rest)? }), scores)
            }
            _ => return Err(unknown()),
        },
    };
    Ok(setup)
}

#[derive(Debug, Serialize)]
struct ModelFile<'a> {
    schema_version: u32,
    surrogate: &'a str,
    structure: &'a str,
    k: usize,
    lambda: f64,
    schedule: StepSchedule,
    iterations: usize,
    seed: u64,
    /// Averaged iterate; the model used for scoring.
    theta: &'a [f64],
    theta_last: &'a [f64],
}

fn train(dir: &Path, surrogate: &str, k: usize, opt: &TrainArgs, out: &Path) -> CliResult<()> {
    let data = load(dir)?;
    let clicks = data.queries().iter().flat_map(|q| &q.judgments).any(|j| matches!(j, Judgment::Click(_)));
    let (sur, sf) = training_setup(surrogate, clicks, opt.smoothing)?;
    if surrogate == "logistic" && k != 1 {
        return Err(CliError::Usage("the logistic surrogate uses single comparisons; pass --k 1".into()));
    }
    let cfg = TrainConfig { lambda: opt.lambda, schedule: opt.schedule()?, iterations: opt.iters, seed: opt.seed };
    let report = prox_sgd_train(&data, &UStatConfig::new(k), sur.as_ref(), sf.as_ref(), &cfg)?;
    let model = ModelFile {
        schema_version: SCHEMA_VERSION,
        surrogate,
        structure: sf.name(),
        k,
        lambda: cfg.lambda,
        schedule: cfg.schedule,
        iterations: cfg.iterations,
        seed: cfg.seed,
        theta: &report.theta_avg,
        theta_last: &report.theta_last,
    };
    let mut csv = format!("# schema_version: {SCHEMA_VERSION}\niteration,moving_avg_loss\n");
    for (t, v) in &report.gap_trace {
        csv.push_str(&format!("{t},{v}\n"));
    }
    write(&out.join("model.json"), &to_json(&model))?;
    write(&out.join("trace.csv"), &csv)
}

fn sweep(dir: &Path, ks: &[usize], ns: &[usize], reps: u64, opt: &TrainArgs, out: &Path) -> CliResult<()> {
    let data = load(dir)?;
    let cfg = ExperimentConfig {
        lambda: opt.lambda,
        schedule: opt.schedule()?,
        iterations: opt.iters,
        smoothing: opt.smoothing,
    };
    let seeds: Vec<u64> = (0..reps.max(1)).map(|r| opt.seed + r).collect();
    let rows = sweep_k(&data, ns, ks, &seeds, &cfg)?;
    let mut csv = format!("# schema_version: {SCHEMA_VERSION}\n{}\n", SWEEP_COLUMNS.join(","));
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.k, r.seed, r.ndcg_risk_reg, r.ndcg_risk_log, r.ndcg_risk_full
        ));
    }
    write(&out.join("sweep.csv"), &csv)
}

fn demo_inconsistency(phi: &str, family: &str, seed: u64, budget: usize, out: &Path) -> CliResult<()> {
    let phi: ConvexPhi = match phi {
        "hinge" | "logistic" | "exponential" => phi.parse()?,
        other => {
            return Err(CliError::Usage(format!("unsupported phi '{other}' (expected hinge, logistic, exponential)")))
        }
    };
    let reported = match family {
        "pairwise" => LabSurrogate::pairwise(phi),
        "margin" => LabSurrogate::Margin { margin: MarginMap::Identity, phi },
        "difference" => LabSurrogate::Difference { phi },
        other => {
            return Err(CliError::Usage(format!(
                "unknown surrogate family '{other}' (expected pairwise, margin, difference)"
            )))
        }
    };
    let searched = if family == "margin" { reported } else { LabSurrogate::pairwise(phi) };
    let cfg = SearchConfig { budget, ..SearchConfig::default() };
    let found = match construct_low_noise_counterexample(searched, &cfg, seed) {
        Ok(f) => f,
        Err(e @ Error::NoWitness(_)) => {
            eprintln!("searched {budget} candidates with seed {seed} for {}", searched.name());
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let report = if reported == searched {
        found.report.clone()
    } else {
        inconsistency_report(&found.law, reported, &PairwiseEdgeLoss, &cfg.lab)?
    };
    #[derive(Serialize)]
    struct Demo<'a> {
        schema_version: u32,
        phi: String,
        seed: u64,
        searched_surrogate: String,
        candidate: usize,
        low_noise_candidates: usize,
        report: &'a crate::lab::InconsistencyReport,
    }
    let demo = Demo {
        schema_version: SCHEMA_VERSION,
        phi: phi.to_string(),
        seed,
        searched_surrogate: searched.name(),
        candidate: found.candidate,
        low_noise_candidates: found.low_noise_candidates,
        report: &report,
    };
    write(out, &to_json(&demo))?;
    println!("{}", report.verdict());
    Ok(())
}

pub const AGGREGATE_METHODS: [&str; 8] =
    ["average", "btl", "thurstone", "borda", "ammar-shah", "eigenvector", "cascade-mle", "log-odds"];

#[derive(Debug, Serialize)]
struct AggregateEntry {
    query_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjacency: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_odds: Option<Vec<Vec<f64>>>,
}

fn comparisons(js: &[Judgment], method: &str) -> CliResult<Vec<ComparisonPreference>> {
    js.iter()
        .map(|j| match j {
            Judgment::Comparison(c) => Ok(*c),
            other => Err(CliError::Usage(format!("method {method} needs pair judgments, got {}", other.kind()))),
        })
        .collect()
}

fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

fn aggregate(path: &Path, method: &str, smoothing: f64, out: &Path) -> CliResult<()> {
    if !AGGREGATE_METHODS.contains(&method) {
        return Err(CliError::Usage(format!("unknown method '{method}'; valid: {}", AGGREGATE_METHODS.join(", "))));
    }
    let file: JudgmentsFile =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for qj in &file.queries {
        let m = qj.item_count();
        let js = qj.judgments(m)?;
        let mut entry = AggregateEntry { query_id: qj.query_id.clone(), scores: None, adjacency: None, log_odds: None };
        match method {
            "cascade-mle" => {
                let clicks: Vec<ClickRecord> = js
                    .iter()
                    .map(|j| match j {
                        Judgment::Click(c) => Ok(c.clone()),
                        other => Err(CliError::Usage(format!("cascade-mle needs sessions, got {}", other.kind()))),
                    })
                    .collect::<CliResult<_>>()?;
                entry.scores = Some(cascade_mle(&clicks, m)?.scores.into_vec());
            }
            "average" => {
                let refs: Vec<&Judgment> = js.iter().collect();
                let s = AverageAdjacency.aggregate(m, &refs)?;
                entry.adjacency = Some(s.as_adjacency()?.to_rows());
            }
            _ => {
                let comps = comparisons(&js, method)?;
                match method {
                    "btl" => entry.log_odds = Some(matrix_rows(btl_log_odds(&comps, m, smoothing)?.matrix())),
                    "thurstone" => {
                        entry.scores =
                            Some(thurstone_mosteller_scores(&btl_log_odds(&comps, m, smoothing)?)?.into_vec())
                    }
                    "borda" => entry.scores = Some(borda_scores(&btl_log_odds(&comps, m, smoothing)?).into_vec()),
                    "ammar-shah" => entry.scores = Some(ammar_shah_scores(&comps, m)?.into_vec()),
                    "log-odds" => entry.scores = Some(empirical_log_odds_scores(&comps, m, smoothing)?.into_vec()),
                    "eigenvector" => {
                        if !(smoothing > 0.0) {
                            return Err(CliError::Usage("eigenvector needs positive smoothing".into()));
                        }
                        let w = win_counts(&comps, m)?;
                        let r = DMatrix::from_fn(m, m, |i, j| (w[(i, j)] + smoothing) / (w[(j, i)] + smoothing));
                        entry.scores = Some(eigenvector_scores(&r, 1e-12, 10_000)?.into_vec());
                    }
                    _ => unreachable!("method list checked above"),
                }
            }
        }
        entries.push(entry);
    }
    #[derive(Serialize)]
    struct Out {
        schema_version: u32,
        method: String,
        smoothing: f64,
        queries: Vec<AggregateEntry>,
    }
    let doc = Out { schema_version: SCHEMA_VERSION, method: method.to_string(), smoothing, queries: entries };
    write(out, &to_json(&doc))
}
