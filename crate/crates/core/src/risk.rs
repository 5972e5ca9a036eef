//! Conditional risks, the U-statistic empirical risk and its population
//! counterpart, and brute-force Bayes computations on small instances.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregation::StructureFunction;
use crate::error::{check_len, invalid, Error, Result};
use crate::losses::{Surrogate, TargetLoss};
use crate::solver::{bfgs_centered, subgradient_centered, BfgsConfig, SubgradientConfig};
use crate::types::{
    ordering_scores, score_rows, Judgment, LimitLaw, LinearScorer, Query, QueryDataset, ScoreStructure, Structure,
};

/// Largest `m` for which orderings are enumerated.
pub const BRUTE_FORCE_MAX_M: usize = 7;

/// `sum_t p_t loss(alpha, s_t)` over a finite-support law.
pub fn conditional_risk<F>(alpha: &[f64], law: &LimitLaw, loss: F) -> Result<f64>
where
    F: Fn(&[f64], &Structure) -> Result<f64>,
{
    let mut total = 0.0;
    for (s, p) in law.iter() {
        if p > 0.0 {
            total += p * loss(alpha, s)?;
        }
    }
    Ok(total)
}

pub fn conditional_target_risk(alpha: &[f64], law: &LimitLaw, loss: &dyn TargetLoss) -> Result<f64> {
    conditional_risk(alpha, law, |a, s| loss.loss(a, s))
}

pub fn conditional_surrogate_risk(alpha: &[f64], law: &LimitLaw, surrogate: &dyn Surrogate) -> Result<f64> {
    conditional_risk(alpha, law, |a, s| surrogate.eval(a, s, None))
}

/// Order and sampling controls for the U-statistic risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UStatConfig {
    pub k: usize,
    /// Subsets are enumerated exactly while `C(n_q, k)` stays at or below this.
    pub enumeration_cap: u64,
    /// Uniform subsets drawn per query once the cap is exceeded.
    pub mc_samples: usize,
    pub seed: u64,
}

impl UStatConfig {
    pub fn new(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("aggregation order k must be >= 1"));
        }
        if self.mc_samples == 0 {
            return Err(invalid("mc_samples must be >= 1"));
        }
        Ok(())
    }
}

impl Default for UStatConfig {
    fn default() -> Self {
        Self { k: 1, enumeration_cap: 10_000, mc_samples: 2_000, seed: 0 }
    }
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// An empirical risk value with the Monte Carlo standard error of its
/// sampled part (0 when every query was enumerated exactly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub stderr: f64,
}

fn psi_on(
    alpha: &[f64],
    query: &Query,
    subset: &[usize],
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
) -> Result<f64> {
    let js: Vec<&Judgment> = subset.iter().map(|&i| &query.judgments[i]).collect();
    let s = structure_fn.aggregate(query.m(), &js)?;
    surrogate.eval(alpha, &s, None)
}

/// Mean of `psi` over the `k`-subsets of one query's batch, with standard error.
fn query_term(
    alpha: &[f64],
    query: &Query,
    q: usize,
    cfg: &UStatConfig,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
) -> Result<(f64, f64)> {
    let n_q = query.judgments.len();
    if n_q <= cfg.k {
        let all: Vec<usize> = (0..n_q).collect();
        return Ok((psi_on(alpha, query, &all, surrogate, structure_fn)?, 0.0));
    }
    if binomial(n_q, cfg.k) <= cfg.enumeration_cap {
        let mut total = 0.0;
        let mut count = 0usize;
        for subset in (0..n_q).combinations(cfg.k) {
            total += psi_on(alpha, query, &subset, surrogate, structure_fn)?;
            count += 1;
        }
        return Ok((total / count as f64, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(q as u64);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..cfg.mc_samples {
        let subset = rand::seq::index::sample(&mut rng, n_q, cfg.k).into_vec();
        let v = psi_on(alpha, query, &subset, surrogate, structure_fn)?;
        sum += v;
        sum_sq += v * v;
    }
    let r = cfg.mc_samples as f64;
    let mean = sum / r;
    let var = if cfg.mc_samples > 1 { ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / r).sqrt()))
}

/// `(1/n) sum_q n_q C(n_q, k)^{-1} sum_{subsets} psi(f(q), s(subset))` with its
/// Monte Carlo standard error.
pub fn u_statistic_empirical_risk_detailed(
    scorer: &LinearScorer,
    data: &QueryDataset,
    cfg: &UStatConfig,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
) -> Result<RiskEstimate> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("dataset has no queries"));
    }
    let n = data.num_judgments();
    if n == 0 {
        return Err(Error::NoJudgments);
    }
    let terms: Vec<Result<(f64, f64, f64)>> = data
        .queries()
        .par_iter()
        .enumerate()
        .map(|(q, query)| {
            let n_q = query.judgments.len();
            if n_q == 0 {
                return Ok((0.0, 0.0, 0.0));
            }
            let alpha = scorer.scores(&query.features)?;
            let (mean, se) = query_term(&alpha, query, q, cfg, surrogate, structure_fn)?;
            Ok((n_q as f64, mean, se))
        })
        .collect();
    let mut total = 0.0;
    let mut var = 0.0;
    for t in terms {
        let (w, mean, se) = t?;
        total += w * mean;
        var += (w * se).powi(2);
    }
    Ok(RiskEstimate { value: total / n as f64, stderr: var.sqrt() / n as f64 })
}

pub fn u_statistic_empirical_risk(
    scorer: &LinearScorer,
    data: &QueryDataset,
    cfg: &UStatConfig,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
) -> Result<f64> {
    Ok(u_statistic_empirical_risk_detailed(scorer, data, cfg, surrogate, structure_fn)?.value)
}

/// A sampling law over queries and their judgments.
pub trait JudgmentGenerator: Sync {
    fn num_queries(&self) -> usize;

    fn query_probability(&self, q: usize) -> f64;

    fn features(&self, q: usize) -> &DMatrix<f64>;

    fn sample_judgment(&self, q: usize, rng: &mut ChaCha8Rng) -> Judgment;
}

/// Queries drawn with fixed probabilities, each with a finite judgment law.
#[derive(Debug, Clone)]
pub struct FiniteJudgmentGenerator {
    features: Vec<DMatrix<f64>>,
    query_probs: Vec<f64>,
    laws: Vec<Vec<(Judgment, f64)>>,
    samplers: Vec<WeightedIndex<f64>>,
}

impl FiniteJudgmentGenerator {
    pub fn new(features: Vec<DMatrix<f64>>, query_probs: Vec<f64>, laws: Vec<Vec<(Judgment, f64)>>) -> Result<Self> {
        let q = features.len();
        if q == 0 {
            return Err(invalid("generator needs at least one query"));
        }
        check_len(q, query_probs.len())?;
        check_len(q, laws.len())?;
        let total: f64 = query_probs.iter().sum();
        if query_probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid("query probabilities must be nonnegative and sum to 1"));
        }
        let mut samplers = Vec::with_capacity(q);
        for (qi, law) in laws.iter().enumerate() {
            let s: f64 = law.iter().map(|(_, p)| p).sum();
            if law.is_empty() || law.iter().any(|(_, p)| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("judgment law of query {qi} is not a distribution")));
            }
            for (j, _) in law {
                j.validate(features[qi].nrows())?;
            }
            samplers.push(WeightedIndex::new(law.iter().map(|(_, p)| *p)).map_err(|e| invalid(e.to_string()))?);
        }
        Ok(Self { features, query_probs, laws, samplers })
    }

    pub fn law(&self, q: usize) -> &[(Judgment, f64)] {
        &self.laws[q]
    }
}

impl JudgmentGenerator for FiniteJudgmentGenerator {
    fn num_queries(&self) -> usize {
        self.features.len()
    }

    fn query_probability(&self, q: usize) -> f64 {
        self.query_probs[q]
    }

    fn features(&self, q: usize) -> &DMatrix<f64> {
        &self.features[q]
    }

    fn sample_judgment(&self, q: usize, rng: &mut ChaCha8Rng) -> Judgment {
        self.laws[q][self.samplers[q].sample(rng)].0.clone()
    }
}

fn query_sampler(gen: &dyn JudgmentGenerator) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new((0..gen.num_queries()).map(|q| gen.query_probability(q))).map_err(|e| invalid(e.to_string()))
}

/// Draws `n` i.i.d. (query, judgment) pairs into a dataset; every query of
/// the generator appears, possibly with no judgments.
pub fn sample_dataset(gen: &dyn JudgmentGenerator, n: usize, rng: &mut ChaCha8Rng) -> Result<QueryDataset> {
    let qs = query_sampler(gen)?;
    let mut judgments: Vec<Vec<Judgment>> = vec![Vec::new(); gen.num_queries()];
    for _ in 0..n {
        let q = qs.sample(rng);
        judgments[q].push(gen.sample_judgment(q, rng));
    }
    let queries = judgments
        .into_iter()
        .enumerate()
        .map(|(q, js)| Query {
            id: (q + 1).to_string(),
            features: gen.features(q).clone(),
            judgments: js,
            relevances: None,
        })
        .collect();
    QueryDataset::new(queries)
}

/// Monte Carlo estimate of the population U-statistic risk at sample size
/// `n`: each replicate draws query counts and then fresh judgments for one
/// `min(n_q, k)`-subset per query, so it shares no code path with the
/// subset enumeration of the empirical risk.
#[allow(clippy::too_many_arguments)]
pub fn population_u_risk_mc(
    scorer: &LinearScorer,
    gen: &dyn JudgmentGenerator,
    n: usize,
    k: usize,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
    reps: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if reps < 2 {
        return Err(invalid("population risk needs reps >= 2"));
    }
    if k == 0 || n == 0 {
        return Err(invalid("population risk needs n >= 1 and k >= 1"));
    }
    let qs = query_sampler(gen)?;
    let alphas: Vec<Vec<f64>> = (0..gen.num_queries())
        .map(|q| {
            let x = gen.features(q);
            check_len(scorer.dim(), x.ncols())?;
            Ok(score_rows(x, scorer.theta()))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..reps {
        let mut counts = vec![0usize; gen.num_queries()];
        for _ in 0..n {
            counts[qs.sample(&mut rng)] += 1;
        }
        let mut value = 0.0;
        for (q, &l) in counts.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let fresh: Vec<Judgment> = (0..l.min(k)).map(|_| gen.sample_judgment(q, &mut rng)).collect();
            let refs: Vec<&Judgment> = fresh.iter().collect();
            let s = structure_fn.aggregate(gen.features(q).nrows(), &refs)?;
            value += l as f64 * surrogate.eval(&alphas[q], &s, None)?;
        }
        value /= n as f64;
        sum += value;
        sum_sq += value * value;
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0);
    Ok(RiskEstimate { value: mean, stderr: (var / r).sqrt() })
}

fn binomial_pmf(n: usize, p: f64, l: usize) -> f64 {
    if p <= 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if l == n { 1.0 } else { 0.0 };
    }
    let log_choose = ln_gamma(n as f64 + 1.0) - ln_gamma(l as f64 + 1.0) - ln_gamma((n - l) as f64 + 1.0);
    (log_choose + l as f64 * p.ln() + (n - l) as f64 * (1.0 - p).ln()).exp()
}

fn ln_gamma(x: f64) -> f64 {
    // Exact for the integer arguments used here.
    (2..x.round() as usize).map(|i| (i as f64).ln()).sum()
}

/// Exact population U-statistic risk for a finite generator:
/// `(1/n) sum_q sum_l l P(n_q = l) E[psi(f(q), s(Y_1..Y_{min(l,k)}))]`
/// with `n_q ~ Binomial(n, p_q)`.
pub fn population_u_risk_exact(
    scorer: &LinearScorer,
    gen: &FiniteJudgmentGenerator,
    n: usize,
    k: usize,
    surrogate: &dyn Surrogate,
    structure_fn: &dyn StructureFunction,
) -> Result<f64> {
    if k == 0 || n == 0 {
        return Err(invalid("population risk needs n >= 1 and k >= 1"));
    }
    let mut total = 0.0;
    for q in 0..gen.num_queries() {
        let x = gen.features(q);
        check_len(scorer.dim(), x.ncols())?;
        let alpha = score_rows(x, scorer.theta());
        let law = gen.law(q);
        let mut expected = vec![0.0; k.min(n) + 1];
        for (j, slot) in expected.iter_mut().enumerate().skip(1) {
            let mut e = 0.0;
            for tuple in (0..j).map(|_| 0..law.len()).multi_cartesian_product() {
                let p: f64 = tuple.iter().map(|&t| law[t].1).product();
                if p == 0.0 {
                    continue;
                }
                let refs: Vec<&Judgment> = tuple.iter().map(|&t| &law[t].0).collect();
                let s = structure_fn.aggregate(x.nrows(), &refs)?;
                e += p * surrogate.eval(&alpha, &s, None)?;
            }
            *slot = e;
        }
        let p_q = gen.query_probability(q);
        for l in 1..=n {
            total += l as f64 * binomial_pmf(n, p_q, l) * expected[l.min(k)];
        }
    }
    Ok(total / n as f64)
}

/// Every strict ordering of `m` items, top item first.
pub fn all_orderings(m: usize) -> Vec<Vec<usize>> {
    (0..m).permutations(m).collect()
}

/// Minimum conditional risk over strict orderings and every ordering
/// attaining it (within `1e-12` relative).
#[derive(Debug, Clone, PartialEq)]
pub struct BayesMinimizers {
    pub risk: f64,
    pub orderings: Vec<Vec<usize>>,
    /// Risk of every ordering, aligned with [`all_orderings`].
    pub all_risks: Vec<(Vec<usize>, f64)>,
}

impl BayesMinimizers {
    pub fn is_optimal(&self, order: &[usize]) -> bool {
        self.orderings.iter().any(|o| o == order)
    }

    pub fn risk_of(&self, order: &[usize]) -> Option<f64> {
        self.all_risks.iter().find(|(o, _)| o == order).map(|(_, r)| *r)
    }
}

pub fn bayes_conditional_minimizers(law: &LimitLaw, loss: &dyn TargetLoss) -> Result<BayesMinimizers> {
    let m = law.dim().ok_or_else(|| invalid("law does not fix an item count"))?;
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::BruteForceCap(m));
    }
    let mut all_risks = Vec::new();
    for order in all_orderings(m) {
        let r = conditional_target_risk(&ordering_scores(&order), law, loss)?;
        all_risks.push((order, r));
    }
    let risk = all_risks.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * risk.abs().max(1.0);
    let orderings = all_risks.iter().filter(|(_, r)| *r <= risk + tol).map(|(o, _)| o.clone()).collect();
    Ok(BayesMinimizers { risk, orderings, all_risks })
}

/// Product law over score vectors: item `i` takes value `v` with
/// probability `p` for each `(v, p)` in `marginals[i]`, independently.
pub fn product_law(marginals: &[Vec<(f64, f64)>]) -> Result<LimitLaw> {
    if marginals.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for combo in marginals.iter().map(|m| m.iter()).multi_cartesian_product() {
        let p: f64 = combo.iter().map(|(_, p)| p).product();
        support.push(Structure::Scores(ScoreStructure::new(combo.iter().map(|(v, _)| *v).collect())?));
        probs.push(p);
    }
    // Products of normalized marginals can drift by a few ulps.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    LimitLaw::new(support, probs)
}

/// A point certifying an upper bound on `H(epsilon, D)`: its target risk is
/// at least `epsilon` above the Bayes risk while its surrogate risk exceeds
/// the reference surrogate minimum by `surrogate_gap`.
#[derive(Debug, Clone, PartialEq)]
pub struct HWitness {
    pub alpha: Vec<f64>,
    pub surrogate_gap: f64,
    pub target_gap: f64,
    pub surrogate_min: f64,
    pub bayes_risk: f64,
}

/// Grid estimate of the suboptimality function `H(epsilon, D)`: the smallest
/// surrogate excess over grid points whose target excess is at least
/// `epsilon`. The surrogate reference minimum is taken over the grid and a
/// continuous refinement from the best grid point.
pub fn suboptimality_h(
    epsilon: f64,
    law: &LimitLaw,
    loss: &dyn TargetLoss,
    surrogate: &dyn Surrogate,
    alpha_grid: &[Vec<f64>],
) -> Result<HWitness> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    if alpha_grid.is_empty() {
        return Err(invalid("alpha grid is empty"));
    }
    let bayes = bayes_conditional_minimizers(law, loss)?;
    let mut grid_psi = Vec::with_capacity(alpha_grid.len());
    for a in alpha_grid {
        grid_psi.push(conditional_surrogate_risk(a, law, surrogate)?);
    }
    let (best_idx, _) =
        grid_psi.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).expect("finite risk")).expect("nonempty grid");
    let objective = |a: &[f64], g: Option<&mut [f64]>| -> f64 {
        match g {
            Some(g) => {
                g.iter_mut().for_each(|x| *x = 0.0);
                let mut tmp = vec![0.0; a.len()];
                let mut v = 0.0;
                for (s, p) in law.iter() {
                    v += p * surrogate.eval(a, s, Some(&mut tmp)).unwrap_or(f64::INFINITY);
                    for (gi, ti) in g.iter_mut().zip(&tmp) {
                        *gi += p * ti;
                    }
                }
                v
            }
            None => conditional_surrogate_risk(a, law, surrogate).unwrap_or(f64::INFINITY),
        }
    };
    let refined = if surrogate.is_smooth() {
        bfgs_centered(&alpha_grid[best_idx], &objective, BfgsConfig::default()).value
    } else {
        subgradient_centered(alpha_grid[best_idx].len(), &objective, SubgradientConfig::default()).value
    };
    let surrogate_min = grid_psi[best_idx].min(refined);

    let mut best: Option<HWitness> = None;
    for (a, psi) in alpha_grid.iter().zip(&grid_psi) {
        let target_gap = conditional_target_risk(a, law, loss)? - bayes.risk;
        if target_gap < epsilon {
            continue;
        }
        let gap = psi - surrogate_min;
        if best.as_ref().is_none_or(|b| gap < b.surrogate_gap) {
            best = Some(HWitness {
                alpha: a.clone(),
                surrogate_gap: gap,
                target_gap,
                surrogate_min,
                bayes_risk: bayes.risk,
            });
        }
    }
    best.ok_or(Error::EpsilonTooLarge)
}

/// Representative score vectors for all strict orderings, scaled by each
/// factor in `scales`.
pub fn ordering_grid(m: usize, scales: &[f64]) -> Vec<Vec<f64>> {
    let mut grid = Vec::new();
    for order in all_orderings(m) {
        let base = ordering_scores(&order);
        for &c in scales {
            grid.push(base.iter().map(|v| v * c).collect());
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{AverageAdjacency, EmpiricalLogOdds, SingleJudgment};
    use crate::losses::{
        BtlLogistic, ConvexPhi, Difference, DiscountFunction, ErrLoss, GainFunction, NdcgLoss, NdcgRegression,
        PairwiseEdgeLoss, PairwisePhi, PenaltyMap,
    };
    use crate::types::{AdjacencyPreference, ComparisonPreference};

    fn cmp(w: usize, l: usize) -> Judgment {
        Judgment::Comparison(ComparisonPreference { winner: w, loser: l })
    }

    fn adj_structure(m: usize, edges: &[(usize, usize, f64)]) -> Structure {
        Structure::Adjacency(AdjacencyPreference::from_edges(m, edges).unwrap())
    }

    #[test]
    fn conditional_risk_examples() {
        let s = adj_structure(2, &[(0, 1, 1.0)]);
        let point = LimitLaw::point_mass(s.clone());
        let alpha = [0.0, 1.0];
        assert_eq!(conditional_target_risk(&alpha, &point, &PairwiseEdgeLoss).unwrap(), 1.0);
        let other = adj_structure(2, &[(1, 0, 1.0)]);
        let law = LimitLaw::new(vec![s, other], vec![0.5, 0.5]).unwrap();
        assert_eq!(conditional_target_risk(&[1.0, 0.0], &law, &PairwiseEdgeLoss).unwrap(), 0.5);
    }

    #[test]
    fn conditional_risk_three_point_law() {
        let supp = vec![
            adj_structure(3, &[(0, 1, 2.0)]),
            adj_structure(3, &[(2, 0, 1.0), (1, 2, 3.0)]),
            adj_structure(3, &[(1, 0, 0.5)]),
        ];
        let probs = vec![0.2, 0.5, 0.3];
        let law = LimitLaw::new(supp.clone(), probs.clone()).unwrap();
        let alpha = [1.0, 3.0, 2.0];
        // Misordered edges per structure: 0>1 (2.0); 2>0 ok, 1>2 ok; 1>0 ok.
        let oracle = 0.2 * 2.0 + 0.5 * 0.0 + 0.3 * 0.0;
        assert_eq!(conditional_target_risk(&alpha, &law, &PairwiseEdgeLoss).unwrap(), oracle);
    }

    fn features(m: usize, d: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn u_statistic_order_one_is_plain_average() {
        let x = features(3, 2, 1);
        let js = vec![cmp(0, 1), cmp(2, 1), cmp(1, 0)];
        let data = QueryDataset::new(vec![Query {
            id: "a".into(),
            features: x.clone(),
            judgments: js.clone(),
            relevances: None,
        }])
        .unwrap();
        let scorer = LinearScorer::new(vec![0.3, -0.7]).unwrap();
        let r =
            u_statistic_empirical_risk(&scorer, &data, &UStatConfig::new(1), &BtlLogistic, &SingleJudgment).unwrap();
        let alpha = scorer.scores(&x).unwrap();
        let mut oracle = 0.0;
        for j in &js {
            let s = SingleJudgment.aggregate(3, &[j]).unwrap();
            oracle += BtlLogistic.eval(&alpha, &s, None).unwrap();
        }
        assert!((r - oracle / 3.0).abs() < 1e-15);
    }

    #[test]
    fn u_statistic_pairs_and_short_batches() {
        let x = features(3, 2, 2);
        let js = vec![cmp(0, 1), cmp(2, 1), cmp(1, 0)];
        let short = vec![cmp(0, 2), cmp(0, 1)];
        let data = QueryDataset::new(vec![
            Query { id: "a".into(), features: x.clone(), judgments: js.clone(), relevances: None },
            Query { id: "b".into(), features: x.clone(), judgments: short.clone(), relevances: None },
        ])
        .unwrap();
        let scorer = LinearScorer::new(vec![0.5, 0.1]).unwrap();
        let sur = NdcgRegression { gain: GainFunction::Exp2, discount: DiscountFunction::Log1p };
        let sf = EmpiricalLogOdds { smoothing: 1.0 };
        let alpha = scorer.scores(&x).unwrap();
        let psi = |sel: &[&Judgment]| sur.eval(&alpha, &sf.aggregate(3, sel).unwrap(), None).unwrap();

        // k = 2: query a enumerates its 3 pairs; query b has exactly one pair.
        let r2 = u_statistic_empirical_risk(&scorer, &data, &UStatConfig::new(2), &sur, &sf).unwrap();
        let a_mean = (psi(&[&js[0], &js[1]]) + psi(&[&js[0], &js[2]]) + psi(&[&js[1], &js[2]])) / 3.0;
        let oracle = (3.0 * a_mean + 2.0 * psi(&[&short[0], &short[1]])) / 5.0;
        assert!((r2 - oracle).abs() < 1e-14);

        // k = 5 exceeds both batches: one term each using every judgment.
        let r5 = u_statistic_empirical_risk(&scorer, &data, &UStatConfig::new(5), &sur, &sf).unwrap();
        let oracle = (3.0 * psi(&[&js[0], &js[1], &js[2]]) + 2.0 * psi(&[&short[0], &short[1]])) / 5.0;
        assert!((r5 - oracle).abs() < 1e-14);
    }

    #[test]
    fn exact_and_monte_carlo_paths_agree() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = features(4, 3, 4);
        let js: Vec<Judgment> = (0..14)
            .map(|_| {
                let w = rng.gen_range(0..4);
                cmp(w, (w + rng.gen_range(1..4)) % 4)
            })
            .collect();
        let data =
            QueryDataset::new(vec![Query { id: "a".into(), features: x, judgments: js, relevances: None }]).unwrap();
        let scorer = LinearScorer::new(vec![0.2, -0.4, 0.9]).unwrap();
        let sur = NdcgRegression { gain: GainFunction::Exp2, discount: DiscountFunction::Log1p };
        let sf = EmpiricalLogOdds { smoothing: 1.0 };
        let exact = UStatConfig { k: 4, enumeration_cap: 10_000, mc_samples: 1, seed: 0 };
        let mc = UStatConfig { k: 4, enumeration_cap: 10, mc_samples: 4000, seed: 9 };
        let e = u_statistic_empirical_risk_detailed(&scorer, &data, &exact, &sur, &sf).unwrap();
        let m = u_statistic_empirical_risk_detailed(&scorer, &data, &mc, &sur, &sf).unwrap();
        assert_eq!(e.stderr, 0.0);
        assert!(m.stderr > 0.0);
        assert!((e.value - m.value).abs() < 3.0 * m.stderr, "{e:?} vs {m:?}");
    }

    #[test]
    fn u_statistic_invariant_to_judgment_order() {
        let x = features(3, 2, 5);
        let js = vec![cmp(0, 1), cmp(2, 1), cmp(1, 0), cmp(2, 0), cmp(0, 2)];
        let mut rev = js.clone();
        rev.reverse();
        let mk = |j: Vec<Judgment>| {
            QueryDataset::new(vec![Query { id: "a".into(), features: x.clone(), judgments: j, relevances: None }])
                .unwrap()
        };
        let scorer = LinearScorer::new(vec![1.0, 0.5]).unwrap();
        let sur = NdcgRegression { gain: GainFunction::Exp2, discount: DiscountFunction::Log1p };
        let sf = EmpiricalLogOdds { smoothing: 1.0 };
        let cfg = UStatConfig::new(3);
        let a = u_statistic_empirical_risk(&scorer, &mk(js), &cfg, &sur, &sf).unwrap();
        let b = u_statistic_empirical_risk(&scorer, &mk(rev), &cfg, &sur, &sf).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    fn two_structure_generator() -> FiniteJudgmentGenerator {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        FiniteJudgmentGenerator::new(vec![x], vec![1.0], vec![vec![(cmp(0, 1), 0.7), (cmp(1, 0), 0.3)]]).unwrap()
    }

    #[test]
    fn population_mc_point_mass_has_no_spread() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let gen = FiniteJudgmentGenerator::new(vec![x], vec![1.0], vec![vec![(cmp(0, 1), 1.0)]]).unwrap();
        let scorer = LinearScorer::new(vec![0.5]).unwrap();
        let r = population_u_risk_mc(&scorer, &gen, 5, 1, &BtlLogistic, &SingleJudgment, 50, 1).unwrap();
        assert!(r.stderr < 1e-8);
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((r.value - expected).abs() < 1e-15);
    }

    #[test]
    fn population_mc_matches_closed_form_for_k_one() {
        let gen = two_structure_generator();
        let scorer = LinearScorer::new(vec![0.5]).unwrap();
        // alpha = (0.5, -0.5): E psi = 0.7 log(1+e^-1) + 0.3 log(1+e^1).
        let closed = 0.7 * (1.0 + (-1.0f64).exp()).ln() + 0.3 * (1.0 + 1f64.exp()).ln();
        let exact = population_u_risk_exact(&scorer, &gen, 4, 1, &BtlLogistic, &SingleJudgment).unwrap();
        assert!((exact - closed).abs() < 1e-14);
        let small = population_u_risk_mc(&scorer, &gen, 4, 1, &BtlLogistic, &SingleJudgment, 400, 3).unwrap();
        let large = population_u_risk_mc(&scorer, &gen, 4, 1, &BtlLogistic, &SingleJudgment, 6400, 3).unwrap();
        assert!((large.value - closed).abs() < 3.0 * large.stderr);
        assert!(large.stderr < small.stderr);
    }

    #[test]
    fn bayes_minimizers_point_mass_ndcg() {
        let law = LimitLaw::point_mass(Structure::Scores(ScoreStructure::new(vec![1.0, 3.0, 2.0]).unwrap()));
        let loss = NdcgLoss { gain: GainFunction::Exp2MinusOne, discount: DiscountFunction::Log1p };
        let b = bayes_conditional_minimizers(&law, &loss).unwrap();
        assert_eq!(b.risk, 0.0);
        assert_eq!(b.orderings, vec![vec![1, 2, 0]]);
    }

    #[test]
    fn bayes_minimizers_err_product_law_sorted_by_mean() {
        let marg = vec![
            vec![(0.2, 0.5), (0.9, 0.5)],
            vec![(0.1, 1.0)],
            vec![(0.7, 0.4), (0.3, 0.6)],
            vec![(0.95, 0.2), (0.05, 0.8)],
            vec![(0.6, 1.0)],
        ];
        let law = product_law(&marg).unwrap();
        let loss = ErrLoss { gain: GainFunction::Identity, discount: DiscountFunction::Identity };
        let b = bayes_conditional_minimizers(&law, &loss).unwrap();
        let means: Vec<f64> = marg.iter().map(|m| m.iter().map(|(v, p)| v * p).sum()).collect();
        let sorted = crate::types::sorted_items(&means);
        assert!(b.is_optimal(&sorted), "{:?} not in {:?}", sorted, b.orderings);
    }

    #[test]
    fn bayes_two_dag_law_follows_difference_graph() {
        let a = adj_structure(3, &[(0, 1, 3.0), (1, 2, 3.0), (0, 2, 6.0)]);
        let b = adj_structure(3, &[(1, 0, 1.0), (2, 1, 1.0), (2, 0, 1.0)]);
        let law = LimitLaw::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let r = bayes_conditional_minimizers(&law, &PairwiseEdgeLoss).unwrap();
        assert_eq!(r.orderings, vec![vec![0, 1, 2]]);
        assert!(bayes_conditional_minimizers(&LimitLaw::point_mass(adj_structure(8, &[])), &PairwiseEdgeLoss).is_err());
    }

    #[test]
    fn bayes_risk_lower_bounds_grid() {
        let a = adj_structure(3, &[(0, 1, 1.0), (2, 1, 2.0)]);
        let b = adj_structure(3, &[(1, 0, 2.0), (1, 2, 0.5)]);
        let law = LimitLaw::new(vec![a, b], vec![0.6, 0.4]).unwrap();
        let bayes = bayes_conditional_minimizers(&law, &PairwiseEdgeLoss).unwrap();
        for alpha in ordering_grid(3, &[0.1, 1.0, 10.0]) {
            assert!(conditional_target_risk(&alpha, &law, &PairwiseEdgeLoss).unwrap() >= bayes.risk);
        }
    }

    #[test]
    fn suboptimality_examples() {
        let law = LimitLaw::point_mass(adj_structure(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]));
        let grid = ordering_grid(3, &[0.5, 1.0, 2.0]);
        let diff = Difference { phi: ConvexPhi::Logistic };
        let w = suboptimality_h(0.5, &law, &PairwiseEdgeLoss, &diff, &grid).unwrap();
        assert!(w.surrogate_gap > 0.1, "{w:?}");
        assert!(w.target_gap >= 0.5);
        assert_eq!(suboptimality_h(100.0, &law, &PairwiseEdgeLoss, &diff, &grid), Err(Error::EpsilonTooLarge));
        let sur = PairwisePhi { penalty: PenaltyMap::Identity, phi: ConvexPhi::Hinge };
        assert!(suboptimality_h(0.5, &law, &PairwiseEdgeLoss, &sur, &grid).is_ok());
    }

    #[test]
    fn average_adjacency_structure_in_u_statistics() {
        let x = features(2, 1, 8);
        let data = QueryDataset::new(vec![Query {
            id: "a".into(),
            features: x,
            judgments: vec![cmp(0, 1), cmp(1, 0)],
            relevances: None,
        }])
        .unwrap();
        let scorer = LinearScorer::new(vec![0.0]).unwrap();
        let sur = Difference { phi: ConvexPhi::Logistic };
        let r = u_statistic_empirical_risk(&scorer, &data, &UStatConfig::new(2), &sur, &AverageAdjacency).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(1000, 500), u64::MAX);
        assert!((binomial_pmf(4, 0.3, 2) - 6.0 * 0.09 * 0.49).abs() < 1e-15);
    }
}
