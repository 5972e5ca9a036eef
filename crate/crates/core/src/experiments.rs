//! Synthetic BTL ranking experiments: train the NDCG regression surrogate on
//! aggregated log-odds, a pairwise logistic baseline, and a reference model
//! fit to the limiting scores, then score each against the limiting scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{EmpiricalLogOdds, SingleJudgment};
use crate::datagen::{btl_pairs_with_rng, limiting_score};
use crate::error::{invalid, Result};
use crate::losses::{ndcg_loss, BtlLogistic, DiscountFunction, GainFunction, NdcgRegression};
use crate::optimizer::{
    prox_sgd, prox_sgd_train, FixedStructureSampler, ScheduleKind, StepSchedule, TrainConfig, TrainReport,
};
use crate::risk::UStatConfig;
use crate::types::{score_rows, Judgment, QueryDataset, ScoreStructure, Structure};

/// Gain used for both the regression labels and the evaluation loss.
pub const EXPERIMENT_GAIN: GainFunction = GainFunction::Exp2;
pub const EXPERIMENT_DISCOUNT: DiscountFunction = DiscountFunction::Log1p;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub iterations: usize,
    /// Smoothing constant of the empirical log-odds structure.
    pub smoothing: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            schedule: StepSchedule { kind: ScheduleKind::InvSqrtT, scale: 0.5 },
            iterations: 20_000,
            smoothing: 1.0,
        }
    }
}

impl ExperimentConfig {
    fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig { lambda: self.lambda, schedule: self.schedule, iterations: self.iterations, seed }
    }
}

fn relevances(data: &QueryDataset) -> Result<Vec<&[f64]>> {
    data.queries()
        .iter()
        .map(|q| q.relevances.as_deref().ok_or_else(|| invalid(format!("query {} has no true relevances", q.id))))
        .collect()
}

pub fn limit_structures(data: &QueryDataset) -> Result<Vec<ScoreStructure>> {
    relevances(data)?.into_iter().map(limiting_score).collect()
}

/// Mean over queries of the NDCG loss of `theta` against the limiting scores.
pub fn ndcg_risk(theta: &[f64], data: &QueryDataset, limits: &[ScoreStructure]) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("dataset has no queries"));
    }
    let mut total = 0.0;
    for (q, s) in data.queries().iter().zip(limits) {
        let alpha = score_rows(&q.features, theta);
        total += ndcg_loss(&alpha, s, &EXPERIMENT_GAIN, EXPERIMENT_DISCOUNT)?;
    }
    Ok(total / data.len() as f64)
}

/// Copy of `base` with `n` BTL comparisons, each on a uniformly chosen query.
pub fn sample_btl_dataset(base: &QueryDataset, n: usize, seed: u64) -> Result<QueryDataset> {
    let rels = relevances(base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_query: Vec<Vec<Judgment>> = vec![Vec::new(); base.len()];
    for _ in 0..n {
        let q = rng.gen_range(0..base.len());
        let c = btl_pairs_with_rng(rels[q], 1, &mut rng)?[0];
        per_query[q].push(Judgment::Comparison(c));
    }
    let mut out = base.clone();
    for (q, js) in per_query.into_iter().enumerate() {
        out.set_judgments(q, js)?;
    }
    Ok(out)
}

/// NDCG regression on empirical log-odds of `k` judgments per term.
pub fn train_regression(data: &QueryDataset, k: usize, cfg: &ExperimentConfig, seed: u64) -> Result<TrainReport> {
    let sur = NdcgRegression { gain: EXPERIMENT_GAIN, discount: EXPERIMENT_DISCOUNT };
    let sf = EmpiricalLogOdds { smoothing: cfg.smoothing };
    prox_sgd_train(data, &UStatConfig::new(k), &sur, &sf, &cfg.train(seed))
}

/// Pairwise logistic loss on single comparisons.
pub fn train_logistic(data: &QueryDataset, cfg: &ExperimentConfig, seed: u64) -> Result<TrainReport> {
    prox_sgd_train(data, &UStatConfig::new(1), &BtlLogistic, &SingleJudgment, &cfg.train(seed))
}

/// NDCG regression on the limiting scores themselves, queries uniform.
pub fn train_full(
    base: &QueryDataset,
    limits: &[ScoreStructure],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainReport> {
    let features = base.queries().iter().map(|q| &q.features).collect();
    let structures = limits.iter().cloned().map(Structure::Scores).collect();
    let weights = vec![1.0; base.len()];
    let sampler = FixedStructureSampler::new(features, structures, &weights)?;
    let sur = NdcgRegression { gain: EXPERIMENT_GAIN, discount: EXPERIMENT_DISCOUNT };
    prox_sgd(&sampler, &sur, &cfg.train(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub ndcg_risk_reg: f64,
    pub ndcg_risk_log: f64,
    pub ndcg_risk_full: f64,
}

pub const SWEEP_COLUMNS: [&str; 6] = ["n", "k", "seed", "ndcg_risk_reg", "ndcg_risk_log", "ndcg_risk_full"];

/// One row per `(n, k, seed)`, in that nesting order. For each `(n, seed)`
/// the comparisons, the logistic baseline and the reference model are
/// shared across `k`.
pub fn sweep_k(
    base: &QueryDataset,
    ns: &[usize],
    ks: &[usize],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    if ns.is_empty() || ks.is_empty() || seeds.is_empty() {
        return Err(invalid("sweep needs at least one n, k and seed"));
    }
    if ks.contains(&0) {
        return Err(invalid("k must be >= 1"));
    }
    let limits = limit_structures(base)?;
    let full: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| ndcg_risk(&train_full(base, &limits, cfg, seed)?.theta_avg, base, &limits))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, u64, usize)> =
        ns.iter().flat_map(|&n| seeds.iter().enumerate().map(move |(si, &seed)| (n, seed, si))).collect();
    let blocks: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(n, seed, si)| {
            let data = sample_btl_dataset(base, n, seed)?;
            let log_risk = ndcg_risk(&train_logistic(&data, cfg, seed)?.theta_avg, base, &limits)?;
            ks.iter()
                .map(|&k| {
                    let reg = train_regression(&data, k, cfg, seed)?;
                    Ok(SweepRow {
                        n,
                        k,
                        seed,
                        ndcg_risk_reg: ndcg_risk(&reg.theta_avg, base, &limits)?,
                        ndcg_risk_log: log_risk,
                        ndcg_risk_full: full[si],
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
