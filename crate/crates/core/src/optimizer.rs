//! Proximal stochastic gradient minimization of the regularized U-statistic
//! risk for linear scorers.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::StructureFunction;
use crate::error::{invalid, Error, Result};
use crate::losses::Surrogate;
use crate::risk::UStatConfig;
use crate::types::{score_rows, Judgment, QueryDataset, Structure};

/// Number of sampled losses in the moving-average loss estimate.
pub const MOVING_AVERAGE_WINDOW: usize = 100;
/// Iterations between entries of the loss trace.
pub const CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `eta_t = c / t`.
    InvT,
    /// `eta_t = c / sqrt(t)`.
    InvSqrtT,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::InvT => "inv_t",
            ScheduleKind::InvSqrtT => "inv_sqrt_t",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv_t" => Ok(ScheduleKind::InvT),
            "inv_sqrt_t" => Ok(ScheduleKind::InvSqrtT),
            other => Err(invalid(format!("unknown schedule '{other}' (expected inv_t or inv_sqrt_t)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub scale: f64,
}

impl StepSchedule {
    pub fn new(kind: ScheduleKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("step scale must be positive, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    /// Step size at 1-based iteration `t`.
    pub fn step(&self, t: usize) -> f64 {
        match self.kind {
            ScheduleKind::InvT => self.scale / t as f64,
            ScheduleKind::InvSqrtT => self.scale / (t as f64).sqrt(),
        }
    }
}

/// Closed-form prox step for `(lambda/2)|theta|^2`:
/// `theta <- (theta - eta g) / (1 + eta lambda)`.
pub fn prox_step(theta: &mut [f64], g: &[f64], eta: f64, lambda: f64) {
    let shrink = 1.0 / (1.0 + eta * lambda);
    for (t, gi) in theta.iter_mut().zip(g) {
        *t = (*t - eta * gi) * shrink;
    }
}

/// One sampled loss term: features of the query and the structure built
/// from the sampled judgments.
#[derive(Debug, Clone)]
pub struct SampledTerm<'a> {
    pub query: usize,
    pub features: &'a DMatrix<f64>,
    pub structure: Structure,
    /// Human-readable description of what was sampled, for error reports.
    pub label: String,
}

/// Source of stochastic loss terms.
pub trait TermSampler {
    fn dim(&self) -> usize;

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SampledTerm<'_>>;
}

fn batch_sizes(data: &QueryDataset) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(data.queries().iter().map(|q| q.judgments.len() as f64)).map_err(|_| Error::NoJudgments)
}

/// Draws a query with probability `n_q / n`, then a uniform `k`-subset of its
/// judgments (the whole batch when `n_q <= k`).
pub fn sample_term(data: &QueryDataset, cfg: &UStatConfig, rng: &mut ChaCha8Rng) -> Result<(usize, Vec<usize>)> {
    cfg.validate()?;
    let dist = batch_sizes(data)?;
    Ok(draw_subset(data, &dist, cfg.k, rng))
}

fn draw_subset(data: &QueryDataset, dist: &WeightedIndex<f64>, k: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<usize>) {
    let q = dist.sample(rng);
    let n_q = data.query(q).judgments.len();
    let subset = if n_q <= k {
        (0..n_q).collect()
    } else {
        let mut s = rand::seq::index::sample(rng, n_q, k).into_vec();
        s.sort_unstable();
        s
    };
    (q, subset)
}

/// Samples terms of the U-statistic empirical risk.
pub struct UStatSampler<'a> {
    data: &'a QueryDataset,
    k: usize,
    structure_fn: &'a dyn StructureFunction,
    dist: WeightedIndex<f64>,
}

impl<'a> UStatSampler<'a> {
    pub fn new(data: &'a QueryDataset, k: usize, structure_fn: &'a dyn StructureFunction) -> Result<Self> {
        if k == 0 {
            return Err(invalid("aggregation order k must be >= 1"));
        }
        Ok(Self { data, k, structure_fn, dist: batch_sizes(data)? })
    }
}

impl TermSampler for UStatSampler<'_> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SampledTerm<'_>> {
        let (q, subset) = draw_subset(self.data, &self.dist, self.k, rng);
        let query = self.data.query(q);
        let js: Vec<&Judgment> = subset.iter().map(|&i| &query.judgments[i]).collect();
        let structure = self.structure_fn.aggregate(query.m(), &js)?;
        Ok(SampledTerm {
            query: q,
            features: &query.features,
            structure,
            label: format!("query {} judgments {:?}", query.id, subset),
        })
    }
}

/// Samples queries with fixed weights and pairs each with a fixed structure,
/// e.g. limiting scores known in closed form.
pub struct FixedStructureSampler<'a> {
    features: Vec<&'a DMatrix<f64>>,
    structures: Vec<Structure>,
    dist: WeightedIndex<f64>,
}

impl<'a> FixedStructureSampler<'a> {
    pub fn new(features: Vec<&'a DMatrix<f64>>, structures: Vec<Structure>, weights: &[f64]) -> Result<Self> {
        if features.is_empty() || features.len() != structures.len() || features.len() != weights.len() {
            return Err(invalid("features, structures and weights must be nonempty and aligned"));
        }
        let dist = WeightedIndex::new(weights.iter().copied()).map_err(|e| invalid(e.to_string()))?;
        Ok(Self { features, structures, dist })
    }
}

impl TermSampler for FixedStructureSampler<'_> {
    fn dim(&self) -> usize {
        self.features[0].ncols()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SampledTerm<'_>> {
        let q = self.dist.sample(rng);
        Ok(SampledTerm {
            query: q,
            features: self.features[q],
            structure: self.structures[q].clone(),
            label: format!("query index {q}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be >= 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        StepSchedule::new(self.schedule.kind, self.schedule.scale).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Average of the iterates produced by all `T` updates.
    pub theta_avg: Vec<f64>,
    pub theta_last: Vec<f64>,
    /// `(iteration, moving average of the last 100 sampled losses)` at each
    /// checkpoint.
    pub gap_trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub seed: u64,
}

/// Runs the proximal stochastic update from `theta = 0`. `observe` is called
/// after every update with `(t, theta_avg, theta_last)`.
pub fn prox_sgd_observed(
    sampler: &dyn TermSampler,
    surrogate: &dyn Surrogate,
    cfg: &TrainConfig,
    observe: &mut dyn FnMut(usize, &[f64], &[f64]),
) -> Result<TrainReport> {
    cfg.validate()?;
    let d = sampler.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut g_theta = vec![0.0; d];
    let mut g_alpha = Vec::new();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(MOVING_AVERAGE_WINDOW);
    let mut window_sum = 0.0;
    let mut trace = Vec::with_capacity(cfg.iterations / CHECKPOINT_EVERY);
    for t in 1..=cfg.iterations {
        let term = sampler.sample(&mut rng)?;
        let x = term.features;
        let alpha = score_rows(x, &theta);
        g_alpha.resize(alpha.len(), 0.0);
        let loss = surrogate.eval(&alpha, &term.structure, Some(&mut g_alpha))?;
        if !loss.is_finite() || g_alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: t, sample: term.label });
        }
        for (c, gc) in g_theta.iter_mut().enumerate() {
            *gc = (0..x.nrows()).map(|i| x[(i, c)] * g_alpha[i]).sum();
        }
        prox_step(&mut theta, &g_theta, cfg.schedule.step(t), cfg.lambda);
        let inv_t = 1.0 / t as f64;
        for (a, th) in avg.iter_mut().zip(&theta) {
            *a += (th - *a) * inv_t;
        }

        if window.len() == MOVING_AVERAGE_WINDOW {
            window_sum -= window.pop_front().expect("full window");
        }
        window.push_back(loss);
        window_sum += loss;
        if t % CHECKPOINT_EVERY == 0 {
            trace.push((t, window_sum / window.len() as f64));
        }
        observe(t, &avg, &theta);
    }
    Ok(TrainReport { theta_avg: avg, theta_last: theta, gap_trace: trace, iterations: cfg.iterations, seed: cfg.seed })
}

pub fn prox_sgd(sampler: &dyn TermSampler, surrogate: &dyn Surrogate, cfg: &TrainConfig) -> Result<TrainReport> {
    prox_sgd_observed(sampler, surrogate, cfg, &mut |_, _, _| {})
}

/// Minimizes the regularized U-statistic risk of order `ustat.k` on `data`.
pub fn prox_sgd_train(
    data: &QueryDataset,
    ustat: &UStatConfig,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    ustat.validate()?;
    let sampler = UStatSampler::new(data, ustat.k, structure_fn)?;
    prox_sgd(&sampler, surrogate, cfg)
}
