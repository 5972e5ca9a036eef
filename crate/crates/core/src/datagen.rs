//! Synthetic judgment generators: BTL pairs, cascade sessions, power-law
//! query streams, and linear-relevance ranking problems.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::losses::softplus as guarded_softplus;
use crate::types::{ClickRecord, ComparisonPreference, Judgment, Query, QueryDataset, ScoreStructure};

/// `ln(1 + e^x)` computed as `max(x, 0) + ln_1p(e^{-|x|})`.
pub fn softplus(x: f64) -> f64 {
    guarded_softplus(x)
}

/// BTL win probability of `i` over `j`.
pub fn btl_probability(r_i: f64, r_j: f64) -> f64 {
    crate::losses::sigmoid(r_i - r_j)
}

/// Draws `n_pairs` comparisons: a uniform unordered pair, oriented by the
/// BTL probability.
pub fn btl_pair_sampler(relevances: &[f64], n_pairs: usize, seed: u64) -> Result<Vec<ComparisonPreference>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    btl_pairs_with_rng(relevances, n_pairs, &mut rng)
}

pub fn btl_pairs_with_rng(
    relevances: &[f64],
    n_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ComparisonPreference>> {
    let m = relevances.len();
    if m < 2 {
        return Err(invalid("BTL sampling needs m >= 2"));
    }
    if relevances.iter().any(|r| !r.is_finite()) {
        return Err(crate::Error::NonFinite("relevances"));
    }
    Ok((0..n_pairs).map(|_| btl_pair(relevances, rng)).collect())
}

fn btl_pair(r: &[f64], rng: &mut ChaCha8Rng) -> ComparisonPreference {
    let m = r.len();
    let i = rng.gen_range(0..m);
    let mut j = rng.gen_range(0..m - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    if rng.gen::<f64>() < btl_probability(r[a], r[b]) {
        ComparisonPreference { winner: a, loser: b }
    } else {
        ComparisonPreference { winner: b, loser: a }
    }
}

/// Limit of the average empirical log-odds under BTL sampling:
/// `s(i) = (1/(m-1)) sum_{j != i} [softplus(r_i - r_j) - softplus(r_j - r_i)]`.
pub fn limiting_score(relevances: &[f64]) -> Result<ScoreStructure> {
    let m = relevances.len();
    if m < 2 {
        return Err(invalid("limiting score needs m >= 2"));
    }
    let scale = 1.0 / (m - 1) as f64;
    let s = (0..m)
        .map(|i| {
            let total: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let x = relevances[i] - relevances[j];
                    softplus(x) - softplus(-x)
                })
                .sum();
            total * scale
        })
        .collect();
    ScoreStructure::new(s)
}

/// Cascade sessions over a fixed presentation order: the user clicks the
/// first item that satisfies them, item `i` satisfying with probability
/// `p[i]`.
pub fn cascade_session_sampler(
    p: &[f64],
    presented: &[usize],
    n_sessions: usize,
    seed: u64,
) -> Result<Vec<ClickRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cascade_sessions_with_rng(p, presented, n_sessions, &mut rng)
}

pub fn cascade_sessions_with_rng(
    p: &[f64],
    presented: &[usize],
    n_sessions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ClickRecord>> {
    let m = p.len();
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("satisfaction probabilities must lie in [0, 1]"));
    }
    // Validates the presentation once; sessions reuse it.
    ClickRecord::new(presented.to_vec(), presented.len() + 1, m)?;
    let mut out = Vec::with_capacity(n_sessions);
    for _ in 0..n_sessions {
        let mut clicked = presented.len() + 1;
        for (pos, &item) in presented.iter().enumerate() {
            if rng.gen::<f64>() < p[item] {
                clicked = pos + 1;
                break;
            }
        }
        out.push(ClickRecord::new(presented.to_vec(), clicked, m)?);
    }
    Ok(out)
}

/// `p_q proportional to q^{-beta-1}` for `q = 1..=num_queries`.
pub fn power_law_probabilities(beta: f64, num_queries: usize) -> Result<Vec<f64>> {
    if num_queries == 0 {
        return Err(invalid("need at least one query"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("power-law exponent must be positive, got {beta}")));
    }
    let w: Vec<f64> = (1..=num_queries).map(|q| (q as f64).powf(-beta - 1.0)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Draws 1-based query ids from the power law.
pub fn power_law_query_sampler(beta: f64, num_queries: usize, n_draws: usize, seed: u64) -> Result<Vec<usize>> {
    let probs = power_law_probabilities(beta, num_queries)?;
    let dist = WeightedIndex::new(&probs).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_draws).map(|_| dist.sample(&mut rng) + 1).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of Gaussian noise added to each relevance.
    pub noise_sd: f64,
    /// Weight of a second index `max(0, <theta_top, x>)` added to each
    /// relevance. It mostly reorders the top of each list, which a single
    /// linear scorer cannot match exactly.
    #[serde(default)]
    pub top_effect: f64,
}

/// Gaussian features, Gaussian `theta*` and `theta_top`, and relevances
/// `r = <theta*, x> + top_effect * max(0, <theta_top, x>) + noise`. No
/// judgments are attached.
pub fn synthetic_ranking_problem(
    m: usize,
    d: usize,
    num_queries: usize,
    noise: NoiseConfig,
    seed: u64,
) -> Result<(QueryDataset, Vec<f64>)> {
    if d == 0 || m == 0 {
        return Err(invalid("synthetic problems need m >= 1 and d >= 1"));
    }
    if !(noise.noise_sd >= 0.0) {
        return Err(invalid("noise_sd must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()).collect();
    let theta_top: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()).collect();
    let queries = (0..num_queries)
        .map(|q| {
            let x = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let rel = (0..m)
                .map(|i| {
                    let row = x.row(i);
                    let lin: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
                    let top: f64 = row.iter().zip(&theta_top).map(|(a, b)| a * b).sum();
                    let eps =
                        if noise.noise_sd > 0.0 { noise.noise_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                    lin + noise.top_effect * top.max(0.0) + eps
                })
                .collect();
            Query { id: (q + 1).to_string(), features: x, judgments: Vec::new(), relevances: Some(rel) }
        })
        .collect();
    Ok((QueryDataset::new(queries)?, theta))
}

/// JSON generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub m: usize,
    pub d: usize,
    pub num_queries: usize,
    /// Power-law exponent for query arrivals; uniform queries when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub n_pairs: Option<usize>,
    #[serde(default)]
    pub n_sessions: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub top_effect: f64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid("m must be >= 2"));
        }
        if self.d == 0 {
            return Err(invalid("d must be >= 1"));
        }
        if self.num_queries == 0 {
            return Err(invalid("num_queries must be >= 1"));
        }
        match (self.n_pairs, self.n_sessions) {
            (Some(_), Some(_)) => Err(invalid("give n_pairs or n_sessions, not both")),
            (None, None) => Err(invalid("one of n_pairs or n_sessions is required")),
            _ => Ok(()),
        }?;
        if let Some(b) = self.beta {
            power_law_probabilities(b, self.num_queries)?;
        }
        if !(self.noise_sd >= 0.0) || !self.top_effect.is_finite() {
            return Err(invalid("noise_sd must be >= 0 and top_effect finite"));
        }
        Ok(())
    }
}

/// A generated problem: dataset with judgments and true relevances, plus
/// the linear part `theta*` of the relevance model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: QueryDataset,
    pub theta: Vec<f64>,
}

/// Builds the dataset described by `cfg`. Each judgment picks a query
/// (uniformly or by power law) and then either a BTL pair or one cascade
/// session over a random presentation order with satisfaction
/// `sigmoid(r_i)`.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedData> {
    cfg.validate()?;
    let noise = NoiseConfig { noise_sd: cfg.noise_sd, top_effect: cfg.top_effect };
    let (data, theta) = synthetic_ranking_problem(cfg.m, cfg.d, cfg.num_queries, noise, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let probs = match cfg.beta {
        Some(b) => power_law_probabilities(b, cfg.num_queries)?,
        None => vec![1.0 / cfg.num_queries as f64; cfg.num_queries],
    };
    let dist = WeightedIndex::new(&probs).map_err(|e| invalid(e.to_string()))?;
    let mut judgments: Vec<Vec<Judgment>> = vec![Vec::new(); cfg.num_queries];
    let rels: Vec<Vec<f64>> = data.queries().iter().map(|q| q.relevances.clone().expect("synthetic")).collect();
    if let Some(n) = cfg.n_pairs {
        for _ in 0..n {
            let q = dist.sample(&mut rng);
            judgments[q].push(Judgment::Comparison(btl_pair(&rels[q], &mut rng)));
        }
    }
    if let Some(n) = cfg.n_sessions {
        let sat: Vec<Vec<f64>> = rels.iter().map(|r| r.iter().map(|v| crate::losses::sigmoid(*v)).collect()).collect();
        for _ in 0..n {
            let q = dist.sample(&mut rng);
            let mut order: Vec<usize> = (0..cfg.m).collect();
            order.shuffle(&mut rng);
            let rec = cascade_sessions_with_rng(&sat[q], &order, 1, &mut rng)?.pop().expect("one session");
            judgments[q].push(Judgment::Click(rec));
        }
    }
    let mut dataset = data;
    for (q, js) in judgments.into_iter().enumerate() {
        dataset.set_judgments(q, js)?;
    }
    Ok(GeneratedData { dataset, theta })
}
