//! Acceptance suite. Every test writes one `PASS`/`FAIL` line straight to
//! stderr (bypassing libtest capture) and then asserts on the same outcome.

use std::io::Write;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use aggrank::aggregation::{
    cascade_mle, empirical_log_odds_scores, thurstone_mosteller_scores, EmpiricalLogOdds, StructureFunction,
};
use aggrank::datagen::{
    btl_pair_sampler, cascade_session_sampler, limiting_score, synthetic_ranking_problem, NoiseConfig,
};
use aggrank::experiments::{
    limit_structures, median, ndcg_risk, sample_btl_dataset, sweep_k, train_regression, ExperimentConfig, SweepRow,
};
use aggrank::lab::{
    construct_low_noise_counterexample, difference_graph, inconsistency_report, is_low_noise, LabConfig, LabSurrogate,
    SearchConfig, Verdict,
};
use aggrank::losses::{
    ideal_dcg, regression_labels, ConvexPhi, DiscountFunction, ErrLoss, GainFunction, NdcgRegression, PairwiseEdgeLoss,
};
use aggrank::optimizer::{prox_sgd_observed, ScheduleKind, StepSchedule, TrainConfig, UStatSampler};
use aggrank::risk::{
    bayes_conditional_minimizers, binomial, conditional_target_risk, population_u_risk_exact, product_law,
    sample_dataset, u_statistic_empirical_risk, FiniteJudgmentGenerator, UStatConfig,
};
use aggrank::{ClickRecord, ComparisonPreference, Judgment, LinearScorer, Query, QueryDataset, SkewSymmetricAggregate};

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, budget: Duration) -> bool {
    let within = elapsed <= budget;
    let ok = pass && within;
    let line = format!(
        "{} [{id:>2}] {name}: {detail} ({:.2}s, budget {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    writeln!(std::io::stderr().lock(), "{line}").expect("stderr");
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_skew(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            let v: f64 = rng.gen_range(-2.0..2.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}

#[test]
fn err_risk_is_minimized_by_sorting_on_stop_probability() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let loss = ErrLoss { gain: GainFunction::Clamped01, discount: DiscountFunction::Identity };
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.gen_range(2..=6);
        // Two-point marginals in [0, 1]; under Clamped01 the stop
        // probability of item i is its mean value.
        let marginals: Vec<Vec<(f64, f64)>> = (0..m)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                let w: f64 = rng.gen();
                vec![(a, w), (b, 1.0 - w)]
            })
            .collect();
        let p: Vec<f64> = marginals.iter().map(|mg| mg.iter().map(|(v, w)| v * w).sum()).collect();
        let law = product_law(&marginals).unwrap();
        let brute = (0..m)
            .permutations(m)
            .map(|order| {
                let mut alpha = vec![0.0; m];
                for (pos, &item) in order.iter().enumerate() {
                    alpha[item] = (m - pos) as f64;
                }
                conditional_target_risk(&alpha, &law, &loss).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        // Scores equal to p rank items by decreasing stop probability.
        let sorted = conditional_target_risk(&p, &law, &loss).unwrap();
        worst = worst.max(sorted - brute);
    }
    let pass = worst <= 1e-12;
    let ok = report(
        1,
        "ERR sorting optimality",
        pass,
        &format!("200 laws, max excess {worst:.2e}"),
        start.elapsed(),
        secs(10),
    );
    assert!(ok);
}

#[test]
fn ndcg_normalizer_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let m = rng.gen_range(1..=6);
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (gain, discount) = if case % 2 == 0 {
            (GainFunction::Exp2, DiscountFunction::Log1p)
        } else {
            (GainFunction::Clamped01, DiscountFunction::Identity)
        };
        let g = gain.values(&s).unwrap();
        let brute = (0..m)
            .permutations(m)
            .map(|perm| perm.iter().enumerate().map(|(pos, &i)| g[i] / discount.value(pos + 1)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((ideal_dcg(&g, discount) - brute).abs());
    }
    let pass = worst <= 1e-12;
    let ok =
        report(2, "NDCG normalizer", pass, &format!("200 cases, max |diff| {worst:.2e}"), start.elapsed(), secs(5));
    assert!(ok);
}

#[test]
fn thurstone_mosteller_solution_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);

    // First-order condition on random connected partial masks.
    let mut foc = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..=8);
        let a = random_skew(m, &mut rng);
        let mut mask = DMatrix::from_fn(m, m, |i, j| i == j);
        // A random spanning path keeps the mask connected.
        let mut order: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for w in order.windows(2) {
            mask[(w[0], w[1])] = true;
            mask[(w[1], w[0])] = true;
        }
        for i in 0..m {
            for j in 0..i {
                if rng.gen_bool(0.4) {
                    mask[(i, j)] = true;
                    mask[(j, i)] = true;
                }
            }
        }
        let masked = a.zip_map(&mask, |v, b| if b { v } else { 0.0 });
        let s = thurstone_mosteller_scores(&SkewSymmetricAggregate::new(masked, mask.clone()).unwrap()).unwrap();
        let s = s.as_slice();
        for i in 0..m {
            let r: f64 = (0..m).filter(|&j| mask[(i, j)]).map(|j| s[i] - s[j] - a[(i, j)]).sum();
            foc = foc.max(r.abs());
        }
    }

    // Full mask: closed form and Lipschitz bound.
    let mut closed = 0.0f64;
    let mut lipschitz_ok = true;
    for _ in 0..100 {
        let m = rng.gen_range(2..=8);
        let a = random_skew(m, &mut rng);
        let b = random_skew(m, &mut rng);
        let sa = thurstone_mosteller_scores(&SkewSymmetricAggregate::full(a.clone()).unwrap()).unwrap();
        let sb = thurstone_mosteller_scores(&SkewSymmetricAggregate::full(b.clone()).unwrap()).unwrap();
        let expect = a.column_sum() / m as f64;
        for i in 0..m {
            closed = closed.max((sa.as_slice()[i] - expect[i]).abs());
        }
        let ds: f64 = sa.as_slice().iter().zip(sb.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let bound = (&a - &b).norm() / (m as f64).sqrt();
        lipschitz_ok &= ds <= bound + 1e-12;
    }
    let pass = foc < 1e-8 && closed < 1e-10 && lipschitz_ok;
    let detail =
        format!("FOC residual {foc:.2e}, closed-form error {closed:.2e}, Lipschitz on 100 pairs {lipschitz_ok}");
    let ok = report(3, "Thurstone-Mosteller", pass, &detail, start.elapsed(), secs(5));
    assert!(ok);
}

/// Cascade log-likelihood computed session by session.
fn cascade_log_likelihood(sessions: &[ClickRecord], p: &[f64]) -> f64 {
    let mut ll = 0.0;
    for rec in sessions {
        let clicked = rec.clicked_item();
        for &item in rec.examined() {
            ll += if Some(item) == clicked { p[item].ln() } else { (1.0 - p[item]).ln() };
        }
    }
    ll
}

/// Maximizes the likelihood one coordinate at a time by golden-section
/// search on the open unit interval; the likelihood is separable and
/// concave in each coordinate.
fn cascade_likelihood_oracle(sessions: &[ClickRecord], m: usize) -> Vec<f64> {
    let mut p = vec![0.5; m];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for i in 0..m {
        let eval = |x: f64| {
            let mut q = p.clone();
            q[i] = x;
            cascade_log_likelihood(sessions, &q)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-12 {
            let a = hi - ratio * (hi - lo);
            let b = lo + ratio * (hi - lo);
            let fa = if a <= 0.0 { f64::NEG_INFINITY } else { eval(a) };
            let fb = if b >= 1.0 { f64::NEG_INFINITY } else { eval(b) };
            if fa.is_nan() || fb.is_nan() {
                // 0 * ln(0) at an endpoint; treat as the boundary optimum.
                break;
            }
            if fa < fb {
                lo = a;
            } else {
                hi = b;
            }
        }
        p[i] = 0.5 * (lo + hi);
    }
    p
}

#[test]
fn cascade_mle_matches_likelihood_and_is_consistent() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let m = rng.gen_range(2..=4);
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..0.9)).collect();
        let mut presented: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(presented.as_mut_slice(), &mut rng);
        let sessions = cascade_session_sampler(&p, &presented, rng.gen_range(5..40), inst).unwrap();
        let est = cascade_mle(&sessions, m).unwrap();
        let oracle = cascade_likelihood_oracle(&sessions, m);
        for (i, o) in oracle.iter().enumerate() {
            if est.examinations[i] > 0 {
                worst = worst.max((est.scores.as_slice()[i] - o).abs());
            }
        }
    }

    let mut consistent = 0;
    for run in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
        let m = 5;
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..0.6)).collect();
        let mut presented: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(presented.as_mut_slice(), &mut rng);
        let sessions = cascade_session_sampler(&p, &presented, 10_000, run).unwrap();
        let est = cascade_mle(&sessions, m).unwrap();
        let ok = (0..m).all(|i| {
            let e = est.examinations[i] as f64;
            e > 0.0 && (est.scores.as_slice()[i] - p[i]).abs() < 3.0 * (p[i] * (1.0 - p[i]) / e).sqrt()
        });
        consistent += ok as usize;
    }
    let pass = worst < 1e-6 && consistent >= 95;
    let detail = format!("max |mle - oracle| {worst:.2e} on 20 instances, {consistent}/100 runs within 3 sd");
    let ok = report(4, "cascade MLE", pass, &detail, start.elapsed(), secs(30));
    assert!(ok);
}

#[test]
fn u_statistic_risk_is_unbiased() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = 3;
    let d = 2;
    let mut features = Vec::new();
    let mut laws = Vec::new();
    for _ in 0..3 {
        features.push(random_matrix(m, d, &mut rng));
        let pairs: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let w: Vec<f64> = pairs.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        laws.push(
            pairs
                .iter()
                .zip(&w)
                .map(|(&(a, b), wi)| (Judgment::Comparison(ComparisonPreference::new(a, b, m).unwrap()), wi / total))
                .collect(),
        );
    }
    let gen = FiniteJudgmentGenerator::new(features, vec![0.5, 0.3, 0.2], laws).unwrap();
    let scorer = LinearScorer::new(vec![0.7, -0.4]).unwrap();
    let sur = NdcgRegression { gain: GainFunction::Exp2, discount: DiscountFunction::Log1p };
    let sf = EmpiricalLogOdds { smoothing: 1.0 };
    let (n, k, reps) = (6, 2, 500);
    let exact = population_u_risk_exact(&scorer, &gen, n, k, &sur, &sf).unwrap();
    let cfg = UStatConfig::new(k);
    let values: Vec<f64> = (0..reps)
        .map(|_| {
            let data = sample_dataset(&gen, n, &mut rng).unwrap();
            u_statistic_empirical_risk(&scorer, &data, &cfg, &sur, &sf).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let stderr = (var / reps as f64).sqrt();
    let z = (mean - exact).abs() / stderr;
    let pass = z <= 3.0;
    let detail = format!("mean {mean:.6} vs exact {exact:.6}, |z| = {z:.2}");
    let ok = report(5, "U-statistic unbiasedness", pass, &detail, start.elapsed(), secs(30));
    assert!(ok);
}

/// The regularized regression U-statistic objective is an exact quadratic
/// `F(theta) = theta' H theta / 2 - b' theta + c`, so the gap is available
/// in closed form once the mean label vector of each query is known.
struct Quadratic {
    h: DMatrix<f64>,
    theta_star: DVector<f64>,
}

impl Quadratic {
    fn gap(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.theta_star;
        0.5 * diff.dot(&(&self.h * &diff))
    }
}

fn mean_labels(
    query: &Query,
    k: usize,
    sf: &dyn StructureFunction,
    sur: &NdcgRegression,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let m = query.m();
    let n_q = query.judgments.len();
    let labels_of = |subset: &[usize]| -> DVector<f64> {
        let js: Vec<&Judgment> = subset.iter().map(|&i| &query.judgments[i]).collect();
        let s = sf.aggregate(m, &js).unwrap();
        DVector::from_vec(regression_labels(s.as_scores().unwrap(), &sur.gain, sur.discount).unwrap())
    };
    if n_q <= k {
        return labels_of(&(0..n_q).collect::<Vec<_>>());
    }
    let mut total = DVector::zeros(m);
    let mut count = 0.0;
    if binomial(n_q, k) <= 10_000 {
        for subset in (0..n_q).combinations(k) {
            total += labels_of(&subset);
            count += 1.0;
        }
    } else {
        for _ in 0..20_000 {
            let subset = rand::seq::index::sample(rng, n_q, k).into_vec();
            total += labels_of(&subset);
            count += 1.0;
        }
    }
    total / count
}

fn regression_quadratic(
    data: &QueryDataset,
    k: usize,
    lambda: f64,
    sf: &dyn StructureFunction,
    sur: &NdcgRegression,
) -> Quadratic {
    let d = data.dim();
    let n = data.num_judgments() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut h = DMatrix::identity(d, d) * lambda;
    let mut b = DVector::zeros(d);
    for q in data.queries() {
        if q.judgments.is_empty() {
            continue;
        }
        let w = q.judgments.len() as f64 / n / q.m() as f64;
        let y = mean_labels(q, k, sf, sur, &mut rng);
        h += q.features.transpose() * &q.features * w;
        b += q.features.transpose() * y * w;
    }
    let theta_star = h.clone().cholesky().expect("positive definite").solve(&b);
    Quadratic { h, theta_star }
}

/// Gaussian features plus an intercept column; BTL comparisons on
/// relevances linear in the Gaussian part.
fn optimizer_dataset(n: usize, seed: u64) -> QueryDataset {
    let (base, _) = synthetic_ranking_problem(10, 4, 20, NoiseConfig::default(), seed).unwrap();
    let queries = base
        .queries()
        .iter()
        .map(|q| {
            let x = q.features.clone().insert_column(q.features.ncols(), 1.0);
            Query { features: x, ..q.clone() }
        })
        .collect();
    let augmented = QueryDataset::new(queries).unwrap();
    sample_btl_dataset(&augmented, n, seed + 1).unwrap()
}

#[test]
fn optimizer_rates_on_exact_quadratic() {
    let start = Instant::now();
    let lambda = 1.0;
    let sur = NdcgRegression { gain: GainFunction::Exp2, discount: DiscountFunction::Log1p };
    let sf = EmpiricalLogOdds { smoothing: 1.0 };
    let schedule = StepSchedule { kind: ScheduleKind::InvT, scale: 1.0 / lambda };

    // Gap ratios on the averaged iterate.
    let data = optimizer_dataset(1_000, 7);
    let quad = regression_quadratic(&data, 1, lambda, &sf, &sur);
    let sampler = UStatSampler::new(&data, 1, &sf).unwrap();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    for seed in 0..20 {
        let mut gaps = [0.0; 3];
        let cfg = TrainConfig { lambda, schedule, iterations: 4_000, seed };
        prox_sgd_observed(&sampler, &sur, &cfg, &mut |t, avg, _| match t {
            1_000 => gaps[0] = quad.gap(avg),
            2_000 => gaps[1] = quad.gap(avg),
            4_000 => gaps[2] = quad.gap(avg),
            _ => {}
        })
        .unwrap();
        r1.push(gaps[1] / gaps[0]);
        r2.push(gaps[2] / gaps[1]);
    }
    let (m1, m2) = (median(&mut r1), median(&mut r2));
    let ratios_ok = (0.35..=0.7).contains(&m1) && (0.35..=0.7).contains(&m2);

    // Iterations until the mean gap curve of the averaged iterate, over 200
    // seeds, falls to 1e-2 of the initial gap.
    let horizon = 1_000;
    let mut hits = Vec::new();
    for &n in &[1_000usize, 10_000] {
        let data = optimizer_dataset(n, 7);
        for &k in &[1usize, 10, 100] {
            let quad = regression_quadratic(&data, k, lambda, &sf, &sur);
            let initial = quad.gap(&vec![0.0; data.dim()]);
            let sampler = UStatSampler::new(&data, k, &sf).unwrap();
            let mut curve = vec![0.0; horizon + 1];
            for seed in 0..200 {
                let cfg = TrainConfig { lambda, schedule, iterations: horizon, seed };
                prox_sgd_observed(&sampler, &sur, &cfg, &mut |t, avg, _| curve[t] += quad.gap(avg) / 200.0).unwrap();
            }
            let hit = (1..=horizon).find(|&t| curve[t] <= 1e-2 * initial).map_or(f64::INFINITY, |t| t as f64);
            hits.push((n, k, hit));
        }
    }
    let lo = hits.iter().map(|h| h.2).fold(f64::INFINITY, f64::min);
    let hi = hits.iter().map(|h| h.2).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let pass = ratios_ok && spread < 0.2;
    let detail = format!(
        "median gap ratios {m1:.3} (T=1000), {m2:.3} (T=2000); iterations to 1e-2: {}; spread {:.1}%",
        hits.iter().map(|(n, k, t)| format!("n={n} k={k}:{t}")).join(" "),
        100.0 * spread
    );
    let ok = report(6, "optimizer rates", pass, &detail, start.elapsed(), secs(120));
    assert!(ok);
}

#[test]
fn low_noise_counterexamples_and_difference_surrogate() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for phi in [ConvexPhi::Hinge, ConvexPhi::Logistic] {
        let found =
            construct_low_noise_counterexample(LabSurrogate::pairwise(phi), &SearchConfig::default(), 0).unwrap();
        let gap = found.report.verdicts.witness_gap;
        let low_noise = is_low_noise(&difference_graph(&found.law.mean_adjacency().unwrap())).low_noise;
        let diff = inconsistency_report(
            &found.law,
            LabSurrogate::Difference { phi },
            &PairwiseEdgeLoss,
            &LabConfig::default(),
        )
        .unwrap();
        let bayes = bayes_conditional_minimizers(&found.law, &PairwiseEdgeLoss).unwrap();
        let diff_ok = diff.verdicts.recovers_bayes
            && diff.verdict() == Verdict::ConsistentOnInstance
            && diff.verdicts.surrogate_min_orderings.iter().all(|o| bayes.is_optimal(&o.ordering));
        pass &= found.report.verdict() == Verdict::InconsistentWitness && gap >= 0.05 && low_noise && diff_ok;
        lines.push(format!(
            "{}: candidate {} gap {gap:.3} low-noise {low_noise}, difference surrogate recovers Bayes {diff_ok}",
            phi.name(),
            found.candidate
        ));
    }
    let ok = report(7, "inconsistency witnesses", pass, &lines.join("; "), start.elapsed(), secs(120));
    assert!(ok);
}

/// Synthetic problem and training settings shared by the sweep criteria.
fn sweep_problem() -> (QueryDataset, ExperimentConfig) {
    let (base, _) = synthetic_ranking_problem(10, 10, 50, NoiseConfig { noise_sd: 0.0, top_effect: 3.0 }, 1).unwrap();
    let cfg = ExperimentConfig { smoothing: 0.1, ..ExperimentConfig::default() };
    (base, cfg)
}

fn cell_median(rows: &[SweepRow], n: usize, k: usize, f: impl Fn(&SweepRow) -> f64) -> f64 {
    let mut v: Vec<f64> = rows.iter().filter(|r| r.n == n && r.k == k).map(f).collect();
    median(&mut v)
}

#[test]
fn aggregation_order_sweep_reproduces_qualitative_trend() {
    let start = Instant::now();
    let (base, cfg) = sweep_problem();
    let ns = [20_000usize, 80_000];
    let ks = [1usize, 5, 25, 100];
    let seeds: Vec<u64> = (0..10).collect();
    let rows = sweep_k(&base, &ns, &ks, &seeds, &cfg).unwrap();

    let mut pass = true;
    let mut parts = Vec::new();
    for &n in &ns {
        let reg: Vec<f64> = ks.iter().map(|&k| cell_median(&rows, n, k, |r| r.ndcg_risk_reg)).collect();
        let log = cell_median(&rows, n, 1, |r| r.ndcg_risk_log);
        let full = cell_median(&rows, n, 1, |r| r.ndcg_risk_full);
        let inversions = reg.windows(2).filter(|w| w[1] > w[0]).count();
        pass &= inversions <= 1;
        pass &= reg.iter().all(|&r| full <= r + 0.02);
        if n == ns[ns.len() - 1] {
            pass &= reg[reg.len() - 1] < log;
        }
        parts.push(format!(
            "n={n}: reg {} log {log:.4} full {full:.4} inversions {inversions}",
            reg.iter().map(|r| format!("{r:.4}")).join("/")
        ));
    }
    let ok = report(8, "aggregation-order sweep", pass, &parts.join("; "), start.elapsed(), secs(600));
    assert!(ok);
}

#[test]
fn regression_risk_is_robust_to_regularization() {
    let start = Instant::now();
    let (base, cfg) = sweep_problem();
    let limits = limit_structures(&base).unwrap();
    let (n, k) = (80_000, 25);
    let lambdas = [1e-4, 1e-3, 1e-2, 1e-1];
    let datasets: Vec<QueryDataset> = (0..3).map(|seed| sample_btl_dataset(&base, n, seed).unwrap()).collect();
    let risks: Vec<f64> = lambdas
        .iter()
        .map(|&lambda| {
            let cfg = ExperimentConfig { lambda, ..cfg };
            let mut r: Vec<f64> = datasets
                .iter()
                .enumerate()
                .map(|(seed, data)| {
                    let theta = train_regression(data, k, &cfg, seed as u64).unwrap().theta_avg;
                    ndcg_risk(&theta, &base, &limits).unwrap()
                })
                .collect();
            median(&mut r)
        })
        .collect();
    let spread =
        risks.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - risks.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let pass = spread < 0.05;
    let detail = format!(
        "n={n} k={k}, lambda 1e-4..1e-1 risks {}, spread {spread:.4}",
        risks.iter().map(|r| format!("{r:.4}")).join("/")
    );
    let ok = report(9, "regularization robustness", pass, &detail, start.elapsed(), secs(300));
    assert!(ok);
}

#[test]
fn log_odds_converge_to_limiting_score() {
    let start = Instant::now();
    let m = 5;
    let mut worst_conv = 0.0f64;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pairs = btl_pair_sampler(&r, 100_000, seed).unwrap();
        let est = empirical_log_odds_scores(&pairs, m, 1.0).unwrap();
        let lim = limiting_score(&r).unwrap();
        for (a, b) in est.as_slice().iter().zip(lim.as_slice()) {
            worst_conv = worst_conv.max((a - b).abs());
        }
    }
    // softplus(x) - softplus(-x) = x, so s_i = m/(m-1) (r_i - mean r).
    let mut rng = ChaCha8Rng::seed_from_u64(210);
    let mut worst_identity = 0.0f64;
    for _ in 0..200 {
        let mm = rng.gen_range(2..=12);
        let r: Vec<f64> = (0..mm).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let mean = r.iter().sum::<f64>() / mm as f64;
        let lim = limiting_score(&r).unwrap();
        for (i, s) in lim.as_slice().iter().enumerate() {
            let expect = mm as f64 / (mm - 1) as f64 * (r[i] - mean);
            worst_identity = worst_identity.max((s - expect).abs());
        }
    }
    let pass = worst_conv < 0.1 && worst_identity < 1e-10;
    let detail = format!("max |log-odds - limit| {worst_conv:.4} at 1e5 pairs, identity error {worst_identity:.2e}");
    let ok = report(10, "log-odds convergence", pass, &detail, start.elapsed(), secs(30));
    assert!(ok);
}
