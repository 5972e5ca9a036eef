//! Structure functions: maps from a batch of judgments to a structure.

use nalgebra::DMatrix;

use crate::error::{check_len, invalid, Error, Result};
use crate::types::{
    AdjacencyPreference, ClickRecord, ComparisonPreference, Judgment, ScoreStructure, SkewSymmetricAggregate, Structure,
};

/// Entrywise mean of a nonempty list of adjacency matrices.
pub fn average_adjacency(prefs: &[AdjacencyPreference]) -> Result<AdjacencyPreference> {
    let refs: Vec<&AdjacencyPreference> = prefs.iter().collect();
    average_adjacency_refs(&refs)
}

fn average_adjacency_refs(prefs: &[&AdjacencyPreference]) -> Result<AdjacencyPreference> {
    let first = prefs.first().ok_or(Error::NoJudgments)?;
    let m = first.m();
    let mut sum = DMatrix::zeros(m, m);
    for p in prefs {
        check_len(m, p.m())?;
        sum += p.weights();
    }
    AdjacencyPreference::new(sum / prefs.len() as f64)
}

/// Win counts `w[(i, j)]` = number of comparisons where `i` beat `j`.
pub fn win_counts(comparisons: &[ComparisonPreference], m: usize) -> Result<DMatrix<f64>> {
    let mut w = DMatrix::zeros(m, m);
    for c in comparisons {
        c.validate(m)?;
        w[(c.winner, c.loser)] += 1.0;
    }
    Ok(w)
}

/// Smoothed log-odds matrix `A_jl = log((P(j > l) + c) / (P(j < l) + c))`,
/// with `P` the empirical distribution over the whole comparison list and
/// unobserved pairs masked out.
pub fn btl_log_odds(comparisons: &[ComparisonPreference], m: usize, c: f64) -> Result<SkewSymmetricAggregate> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("smoothing must be positive, got {c}")));
    }
    let w = win_counts(comparisons, m)?;
    let total = comparisons.len().max(1) as f64;
    let mut a = DMatrix::zeros(m, m);
    let mut mask = DMatrix::from_element(m, m, false);
    for j in 0..m {
        mask[(j, j)] = true;
        for l in 0..j {
            if w[(j, l)] + w[(l, j)] == 0.0 {
                continue;
            }
            let v = ((w[(j, l)] / total + c) / (w[(l, j)] / total + c)).ln();
            a[(j, l)] = v;
            a[(l, j)] = -v;
            mask[(j, l)] = true;
            mask[(l, j)] = true;
        }
    }
    SkewSymmetricAggregate::new(a, mask)
}

fn mask_connected(mask: &DMatrix<bool>) -> bool {
    let m = mask.nrows();
    let mut seen = vec![false; m];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..m {
            if !seen[j] && mask[(i, j)] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Masked least-squares scores `s = (D - Omega)^+ (Omega o A) 1`, solved
/// through the positive definite shift `L + 11^T/m`.
pub fn thurstone_mosteller_scores(agg: &SkewSymmetricAggregate) -> Result<ScoreStructure> {
    let m = agg.m();
    if m == 0 {
        return Err(Error::EmptyScores);
    }
    let mask = agg.mask();
    if !mask_connected(mask) {
        return Err(Error::Disconnected);
    }
    let omega: DMatrix<f64> = mask.map(|b| if b { 1.0 } else { 0.0 });
    let degrees = omega.column_sum();
    let laplacian = DMatrix::from_diagonal(&degrees) - &omega;
    let rhs = agg.matrix().column_sum();

    // For a connected mask, L + 11^T/m is positive definite and its inverse
    // minus 11^T/m is the pseudoinverse of L; rhs is orthogonal to 1.
    let shifted = laplacian.add_scalar(1.0 / m as f64);
    let s = shifted.cholesky().ok_or(Error::Disconnected)?.solve(&rhs);
    // Re-center to wash out rounding.
    let mean = s.mean();
    ScoreStructure::new(s.iter().map(|x| x - mean).collect())
}

/// Borda count `s = A 1`.
pub fn borda_scores(agg: &SkewSymmetricAggregate) -> ScoreStructure {
    ScoreStructure::new(agg.matrix().column_sum().iter().copied().collect()).expect("aggregate entries are finite")
}

/// Average pair-conditional win frequency against every other item.
pub fn ammar_shah_scores(comparisons: &[ComparisonPreference], m: usize) -> Result<ScoreStructure> {
    if m < 2 {
        return Err(invalid("Ammar-Shah scores need m >= 2"));
    }
    let w = win_counts(comparisons, m)?;
    let scores = (0..m)
        .map(|j| {
            let total: f64 = (0..m)
                .filter(|&l| l != j)
                .map(|l| {
                    let n = w[(j, l)] + w[(l, j)];
                    if n > 0.0 {
                        w[(j, l)] / n
                    } else {
                        0.0
                    }
                })
                .sum();
            total / (m - 1) as f64
        })
        .collect();
    ScoreStructure::new(scores)
}

/// Tolerance for `A_ij * A_ji = 1` in [`eigenvector_scores`].
pub const RECIPROCAL_TOL: f64 = 1e-9;

/// Perron vector of a positive reciprocal matrix by power iteration from the
/// uniform vector, normalized to sum to one.
pub fn eigenvector_scores(reciprocal: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<ScoreStructure> {
    let m = reciprocal.nrows();
    if m == 0 {
        return Err(Error::EmptyScores);
    }
    check_len(m, reciprocal.ncols())?;
    for i in 0..m {
        for j in 0..m {
            let a = reciprocal[(i, j)];
            if !a.is_finite() {
                return Err(Error::NonFinite("reciprocal matrix"));
            }
            if a <= 0.0 {
                return Err(invalid(format!("nonpositive entry at ({i}, {j})")));
            }
            if (a * reciprocal[(j, i)] - 1.0).abs() > RECIPROCAL_TOL {
                return Err(invalid(format!("matrix is not reciprocal at ({i}, {j})")));
            }
        }
    }
    let mut x = nalgebra::DVector::from_element(m, 1.0 / m as f64);
    for _ in 0..max_iter {
        let mut next = reciprocal * &x;
        let total = next.sum();
        next /= total;
        let change = (&next - &x).amax();
        x = next;
        if change < tol {
            return ScoreStructure::new(x.iter().copied().collect());
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last: x.iter().copied().collect() })
}

/// Cascade-model maximum likelihood estimate with per-item counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEstimate {
    /// `clicks / examinations`, or 0 for items never examined.
    pub scores: ScoreStructure,
    pub clicks: Vec<usize>,
    pub examinations: Vec<usize>,
}

impl CascadeEstimate {
    /// Items with no examinations; their score carries no information.
    pub fn unexamined(&self) -> Vec<usize> {
        (0..self.examinations.len()).filter(|&i| self.examinations[i] == 0).collect()
    }
}

pub fn cascade_mle(clicks: &[ClickRecord], m: usize) -> Result<CascadeEstimate> {
    let refs: Vec<&ClickRecord> = clicks.iter().collect();
    cascade_mle_refs(&refs, m)
}

fn cascade_mle_refs(clicks: &[&ClickRecord], m: usize) -> Result<CascadeEstimate> {
    let mut num = vec![0usize; m];
    let mut den = vec![0usize; m];
    for rec in clicks {
        rec.validate(m)?;
        for &item in rec.examined() {
            den[item] += 1;
        }
        if let Some(item) = rec.clicked_item() {
            num[item] += 1;
        }
    }
    let scores = (0..m).map(|i| if den[i] == 0 { 0.0 } else { num[i] as f64 / den[i] as f64 }).collect();
    Ok(CascadeEstimate { scores: ScoreStructure::new(scores)?, clicks: num, examinations: den })
}

/// Per-item average of pairwise empirical log-odds of beating each other item.
///
/// Pairs seen in only one direction get `c` added to both counts; pairs never
/// seen contribute 0.
pub fn empirical_log_odds_scores(comparisons: &[ComparisonPreference], m: usize, c: f64) -> Result<ScoreStructure> {
    let w = win_counts(comparisons, m)?;
    log_odds_from_counts(&w, c)
}

fn log_odds_from_counts(w: &DMatrix<f64>, c: f64) -> Result<ScoreStructure> {
    let m = w.nrows();
    if m < 2 {
        return Err(invalid("log-odds scores need m >= 2"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(invalid(format!("smoothing must be nonnegative, got {c}")));
    }
    let mut s = vec![0.0; m];
    for i in 0..m {
        for j in 0..i {
            let (wins, losses) = (w[(i, j)], w[(j, i)]);
            if wins + losses == 0.0 {
                continue;
            }
            let v = if wins == 0.0 || losses == 0.0 {
                if c == 0.0 {
                    return Err(Error::InfiniteLogOdds);
                }
                ((wins + c) / (losses + c)).ln()
            } else {
                (wins / losses).ln()
            };
            s[i] += v;
            s[j] -= v;
        }
    }
    let scale = 1.0 / (m - 1) as f64;
    ScoreStructure::new(s.into_iter().map(|x| x * scale).collect())
}

/// A structure function `s_k`: turns a batch of judgments on `m` items into a
/// structure.
pub trait StructureFunction: Send + Sync {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure>;

    fn name(&self) -> &'static str;
}

fn comparisons_of(judgments: &[&Judgment]) -> Result<Vec<ComparisonPreference>> {
    judgments
        .iter()
        .map(|j| match j {
            Judgment::Comparison(c) => Ok(*c),
            other => Err(Error::JudgmentKind(format!("expected comparison, got {}", other.kind()))),
        })
        .collect()
}

fn unit_edge(m: usize, c: &ComparisonPreference) -> Result<AdjacencyPreference> {
    AdjacencyPreference::from_edges(m, &[(c.winner, c.loser, 1.0)])
}

/// Passes a single judgment through unchanged (adjacency or comparison).
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleJudgment;

impl StructureFunction for SingleJudgment {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        match judgments {
            [] => Err(Error::NoJudgments),
            [j] => {
                j.validate(m)?;
                match j {
                    Judgment::Adjacency(a) => Ok(Structure::Adjacency(a.clone())),
                    Judgment::Comparison(c) => Ok(Structure::Comparison(*c)),
                    Judgment::Click(_) => {
                        Err(Error::JudgmentKind("click records need an aggregating structure function".into()))
                    }
                }
            }
            _ => Err(invalid(format!("single-judgment structure got {} judgments", judgments.len()))),
        }
    }

    fn name(&self) -> &'static str {
        "single"
    }
}

/// Averaged adjacency; comparisons count as unit-weight edges.
#[derive(Debug, Clone, Copy, Default)]
pub struct AverageAdjacency;

impl StructureFunction for AverageAdjacency {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        if judgments.is_empty() {
            return Err(Error::NoJudgments);
        }
        let mut owned = Vec::new();
        let mut refs: Vec<&AdjacencyPreference> = Vec::with_capacity(judgments.len());
        for j in judgments {
            if let Judgment::Comparison(c) = j {
                owned.push(unit_edge(m, c)?);
            }
        }
        let mut next_owned = owned.iter();
        for j in judgments {
            match j {
                Judgment::Adjacency(a) => {
                    check_len(m, a.m())?;
                    refs.push(a);
                }
                Judgment::Comparison(_) => refs.push(next_owned.next().expect("one per comparison")),
                Judgment::Click(_) => return Err(Error::JudgmentKind("cannot average click records".into())),
            }
        }
        Ok(Structure::Adjacency(average_adjacency_refs(&refs)?))
    }

    fn name(&self) -> &'static str {
        "average"
    }
}

/// Average empirical log-odds per item.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalLogOdds {
    pub smoothing: f64,
}

impl StructureFunction for EmpiricalLogOdds {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        if judgments.is_empty() {
            return Err(Error::NoJudgments);
        }
        // Counting directly avoids materializing the comparison list.
        let mut w = DMatrix::zeros(m, m);
        for j in judgments {
            match j {
                Judgment::Comparison(c) => {
                    c.validate(m)?;
                    w[(c.winner, c.loser)] += 1.0;
                }
                other => return Err(Error::JudgmentKind(format!("log-odds needs comparisons, got {}", other.kind()))),
            }
        }
        Ok(Structure::Scores(log_odds_from_counts(&w, self.smoothing)?))
    }

    fn name(&self) -> &'static str {
        "log-odds"
    }
}

/// Smoothed BTL log-odds matrix followed by masked least squares.
#[derive(Debug, Clone, Copy)]
pub struct ThurstoneMosteller {
    pub smoothing: f64,
}

impl StructureFunction for ThurstoneMosteller {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        let comps = comparisons_of(judgments)?;
        let agg = btl_log_odds(&comps, m, self.smoothing)?;
        Ok(Structure::Scores(thurstone_mosteller_scores(&agg)?))
    }

    fn name(&self) -> &'static str {
        "thurstone"
    }
}

/// Smoothed BTL log-odds matrix followed by row sums.
#[derive(Debug, Clone, Copy)]
pub struct Borda {
    pub smoothing: f64,
}

impl StructureFunction for Borda {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        let comps = comparisons_of(judgments)?;
        let agg = btl_log_odds(&comps, m, self.smoothing)?;
        Ok(Structure::Scores(borda_scores(&agg)))
    }

    fn name(&self) -> &'static str {
        "borda"
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AmmarShah;

impl StructureFunction for AmmarShah {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        let comps = comparisons_of(judgments)?;
        Ok(Structure::Scores(ammar_shah_scores(&comps, m)?))
    }

    fn name(&self) -> &'static str {
        "ammar-shah"
    }
}

/// Cascade MLE; unexamined items score 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct CascadeMle;

impl StructureFunction for CascadeMle {
    fn aggregate(&self, m: usize, judgments: &[&Judgment]) -> Result<Structure> {
        let clicks: Vec<&ClickRecord> = judgments
            .iter()
            .map(|j| match j {
                Judgment::Click(c) => Ok(c),
                other => Err(Error::JudgmentKind(format!("cascade MLE needs clicks, got {}", other.kind()))),
            })
            .collect::<Result<_>>()?;
        Ok(Structure::Scores(cascade_mle_refs(&clicks, m)?.scores))
    }

    fn name(&self) -> &'static str {
        "cascade-mle"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cmp(w: usize, l: usize) -> ComparisonPreference {
        ComparisonPreference { winner: w, loser: l }
    }

    fn random_skew(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                let v = rng.gen_range(-2.0..2.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        a
    }

    #[test]
    fn average_examples() {
        let y = AdjacencyPreference::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(average_adjacency(std::slice::from_ref(&y)).unwrap(), y);
        let z = AdjacencyPreference::zeros(2).unwrap();
        assert_eq!(average_adjacency(&[y, z]).unwrap().weight(0, 1), 0.5);
        assert_eq!(average_adjacency(&[]), Err(Error::NoJudgments));
        let a = AdjacencyPreference::zeros(2).unwrap();
        let b = AdjacencyPreference::zeros(3).unwrap();
        assert!(average_adjacency(&[a, b]).is_err());
    }

    #[test]
    fn average_matches_summation_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mats: Vec<AdjacencyPreference> = (0..4)
            .map(|_| {
                let rows: Vec<Vec<f64>> = (0..3)
                    .map(|i| (0..3).map(|j| if i == j { 0.0 } else { rng.gen_range(0.0..5.0) }).collect())
                    .collect();
                AdjacencyPreference::from_rows(&rows).unwrap()
            })
            .collect();
        let avg = average_adjacency(&mats).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut total = 0.0;
                for mat in &mats {
                    total += mat.to_rows()[i][j];
                }
                assert_abs_diff_eq!(avg.weight(i, j), total / 4.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn btl_log_odds_examples() {
        let a = btl_log_odds(&[cmp(0, 1)], 3, 1.0).unwrap();
        assert_abs_diff_eq!(a.matrix()[(0, 1)], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix()[(1, 0)], -(2f64.ln()), epsilon = 1e-15);
        assert!(!a.mask()[(0, 2)]);
        assert_eq!(a.matrix()[(0, 2)], 0.0);

        let even = btl_log_odds(&[cmp(0, 1), cmp(1, 0)], 2, 1.0).unwrap();
        assert_eq!(even.matrix()[(0, 1)], 0.0);
        assert!(btl_log_odds(&[cmp(0, 1)], 2, 0.0).is_err());
    }

    #[test]
    fn btl_log_odds_uses_list_level_frequencies() {
        // 3 x (0 > 1), 1 x (1 > 0), 4 x (0 > 2); P over the 8-comparison list.
        let mut comps = vec![cmp(0, 1); 3];
        comps.push(cmp(1, 0));
        comps.extend(std::iter::repeat_n(cmp(0, 2), 4));
        let a = btl_log_odds(&comps, 3, 0.5).unwrap();
        let expected01 = ((3.0f64 / 8.0 + 0.5) / (1.0 / 8.0 + 0.5)).ln();
        let expected02 = ((4.0f64 / 8.0 + 0.5) / 0.5).ln();
        assert_abs_diff_eq!(a.matrix()[(0, 1)], expected01, epsilon = 1e-14);
        assert_abs_diff_eq!(a.matrix()[(0, 2)], expected02, epsilon = 1e-14);
        assert!(!a.mask()[(1, 2)]);
    }

    #[test]
    fn thurstone_examples() {
        let a = SkewSymmetricAggregate::full(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let s = thurstone_mosteller_scores(&a).unwrap();
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], -0.5, epsilon = 1e-12);

        let zero = SkewSymmetricAggregate::full(DMatrix::zeros(3, 3)).unwrap();
        assert!(thurstone_mosteller_scores(&zero).unwrap().as_slice().iter().all(|v| v.abs() < 1e-15));

        let x = [1.0, 0.0, -1.0];
        let exact = SkewSymmetricAggregate::full(DMatrix::from_fn(3, 3, |i, j| x[i] - x[j])).unwrap();
        let s = thurstone_mosteller_scores(&exact).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(s[i], x[i], epsilon = 1e-12);
        }
    }

    /// Dense least-squares oracle over the observed pairs: minimize
    /// sum_{observed i<j} (A_ij - (x_i - x_j))^2 with sum x = 0, solved by
    /// normal equations with an appended centering row.
    fn least_squares_oracle(agg: &SkewSymmetricAggregate) -> Vec<f64> {
        let m = agg.m();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if agg.mask()[(i, j)] {
                    let mut r = vec![0.0; m];
                    r[i] = 1.0;
                    r[j] = -1.0;
                    rows.push(r);
                    rhs.push(agg.matrix()[(i, j)]);
                }
            }
        }
        rows.push(vec![1.0; m]);
        rhs.push(0.0);
        let x = DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c]);
        let b = nalgebra::DVector::from_vec(rhs);
        let sol = (x.transpose() * &x).lu().solve(&(x.transpose() * b)).unwrap();
        sol.iter().copied().collect()
    }

    #[test]
    fn thurstone_matches_least_squares_on_partial_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = rng.gen_range(2..7);
            let mut a = random_skew(m, &mut rng);
            let mut mask = DMatrix::from_element(m, m, true);
            // Keep a spanning path so the graph stays connected.
            for i in 0..m {
                for j in 0..i {
                    if i != j + 1 && rng.gen_bool(0.4) {
                        mask[(i, j)] = false;
                        mask[(j, i)] = false;
                        a[(i, j)] = 0.0;
                        a[(j, i)] = 0.0;
                    }
                }
            }
            let agg = SkewSymmetricAggregate::new(a, mask).unwrap();
            let s = thurstone_mosteller_scores(&agg).unwrap();
            let oracle = least_squares_oracle(&agg);
            for i in 0..m {
                assert_abs_diff_eq!(s[i], oracle[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn thurstone_refuses_disconnected() {
        let mut mask = DMatrix::from_element(4, 4, false);
        for i in 0..4 {
            mask[(i, i)] = true;
        }
        mask[(0, 1)] = true;
        mask[(1, 0)] = true;
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = -1.0;
        let agg = SkewSymmetricAggregate::new(a, mask).unwrap();
        assert_eq!(thurstone_mosteller_scores(&agg), Err(Error::Disconnected));
    }

    #[test]
    fn borda_examples() {
        let a = SkewSymmetricAggregate::full(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert_eq!(borda_scores(&a).as_slice(), &[1.0, -1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_skew(4, &mut rng);
        let s = borda_scores(&SkewSymmetricAggregate::full(a.clone()).unwrap());
        let mut total = 0.0;
        for i in 0..4 {
            let mut row = 0.0;
            for j in 0..4 {
                row += a[(i, j)];
            }
            assert_abs_diff_eq!(s[i], row, epsilon = 1e-14);
            total += s[i];
        }
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn ammar_shah_examples() {
        let s = ammar_shah_scores(&[cmp(0, 1), cmp(0, 1)], 2).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.0]);
        assert_eq!(ammar_shah_scores(&[], 3).unwrap().as_slice(), &[0.0; 3]);
        let s = ammar_shah_scores(&[cmp(0, 1), cmp(1, 2), cmp(0, 2)], 3).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.5, 0.0]);
        assert!(ammar_shah_scores(&[], 1).is_err());
    }

    #[test]
    fn ammar_shah_orders_like_borda_on_frequency_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let m = rng.gen_range(2..6);
            let mut comps = Vec::new();
            for i in 0..m {
                for j in 0..i {
                    comps.push(if rng.gen_bool(0.5) { cmp(i, j) } else { cmp(j, i) });
                    for _ in 0..rng.gen_range(0..4) {
                        comps.push(if rng.gen_bool(0.3) { cmp(i, j) } else { cmp(j, i) });
                    }
                }
            }
            let w = win_counts(&comps, m).unwrap();
            let a = DMatrix::from_fn(m, m, |j, l| {
                let n = w[(j, l)] + w[(l, j)];
                if j == l {
                    0.0
                } else {
                    (w[(j, l)] - w[(l, j)]) / n
                }
            });
            let borda = borda_scores(&SkewSymmetricAggregate::full(a).unwrap());
            let ash = ammar_shah_scores(&comps, m).unwrap();
            // s_AS = (borda / (m-1) + 1) / 2, an increasing affine map.
            for i in 0..m {
                assert_abs_diff_eq!(ash[i], (borda[i] / (m - 1) as f64 + 1.0) / 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_examples() {
        let s = eigenvector_scores(&DMatrix::from_element(4, 4, 1.0), 1e-12, 100).unwrap();
        assert!(s.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-12));
        let w = [2.0, 1.0, 1.0];
        let a = DMatrix::from_fn(3, 3, |i, j| w[i] / w[j]);
        let s = eigenvector_scores(&a, 1e-13, 1000).unwrap();
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn eigenvector_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut a = DMatrix::from_element(4, 4, 1.0);
            for i in 0..4 {
                for j in 0..i {
                    let v: f64 = rng.gen_range(0.2..5.0);
                    a[(i, j)] = v;
                    a[(j, i)] = 1.0 / v;
                }
            }
            let s = eigenvector_scores(&a, 1e-14, 100_000).unwrap();
            let eig = a.clone().complex_eigenvalues();
            let (idx, _) = eig.iter().enumerate().max_by(|x, y| x.1.re.partial_cmp(&y.1.re).unwrap()).unwrap();
            let lambda = eig[idx].re;
            // Null vector of (A - lambda I) via SVD.
            let shifted = &a - DMatrix::identity(4, 4) * lambda;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.unwrap();
            let (min_idx, _) =
                svd.singular_values.iter().enumerate().min_by(|x, y| x.1.partial_cmp(y.1).unwrap()).unwrap();
            let v: Vec<f64> = v_t.row(min_idx).iter().copied().collect();
            let total: f64 = v.iter().sum();
            for i in 0..4 {
                assert_abs_diff_eq!(s[i], v[i] / total, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigenvector_errors() {
        let mut a = DMatrix::from_element(2, 2, 1.0);
        a[(0, 1)] = 2.0;
        assert!(eigenvector_scores(&a, 1e-10, 100).is_err());
        a[(1, 0)] = -0.5;
        assert!(eigenvector_scores(&a, 1e-10, 100).is_err());
        let w = [5.0, 1.0, 0.2];
        let b = DMatrix::from_fn(3, 3, |i, j| w[i] / w[j]);
        match eigenvector_scores(&b, 0.0, 0) {
            Err(Error::NoConvergence { iterations: 0, last }) => assert_eq!(last.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cascade_examples() {
        let rec = ClickRecord::new(vec![0, 1, 2], 2, 3).unwrap();
        let est = cascade_mle(&[rec], 3).unwrap();
        assert_eq!(est.scores.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(est.unexamined(), vec![2]);

        let none = ClickRecord::new(vec![0, 1, 2], 4, 3).unwrap();
        let est = cascade_mle(&[none], 3).unwrap();
        assert_eq!(est.scores.as_slice(), &[0.0; 3]);
        assert_eq!(est.examinations, vec![1, 1, 1]);

        let a = ClickRecord::new(vec![0, 1], 1, 2).unwrap();
        let b = ClickRecord::new(vec![0, 1], 2, 2).unwrap();
        let est = cascade_mle(&[a, b], 2).unwrap();
        assert_eq!(est.scores.as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn log_odds_examples() {
        let s = empirical_log_odds_scores(&[cmp(0, 1), cmp(1, 0)], 2, 0.0).unwrap();
        assert_eq!(s.as_slice(), &[0.0, 0.0]);
        let comps = [cmp(0, 1), cmp(0, 1), cmp(0, 1), cmp(1, 0)];
        let s = empirical_log_odds_scores(&comps, 2, 0.0).unwrap();
        assert_abs_diff_eq!(s[0], 3f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], -(3f64.ln()), epsilon = 1e-15);
        assert_eq!(empirical_log_odds_scores(&[], 4, 1.0).unwrap().as_slice(), &[0.0; 4]);
        assert_eq!(empirical_log_odds_scores(&[cmp(0, 1)], 2, 0.0), Err(Error::InfiniteLogOdds));
        let s = empirical_log_odds_scores(&[cmp(0, 1)], 3, 1.0).unwrap();
        assert_abs_diff_eq!(s[0], 2f64.ln() / 2.0, epsilon = 1e-15);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn structure_functions_check_kinds() {
        let click = Judgment::Click(ClickRecord::new(vec![0], 1, 2).unwrap());
        let pair = Judgment::Comparison(cmp(0, 1));
        assert!(matches!(CascadeMle.aggregate(2, &[&pair]), Err(Error::JudgmentKind(_))));
        assert!(matches!(EmpiricalLogOdds { smoothing: 1.0 }.aggregate(2, &[&click]), Err(Error::JudgmentKind(_))));
        let s = AverageAdjacency.aggregate(2, &[&pair, &pair]).unwrap();
        assert_eq!(s.as_adjacency().unwrap().weight(0, 1), 1.0);
        let s = SingleJudgment.aggregate(2, &[&pair]).unwrap();
        assert_eq!(s, Structure::Comparison(cmp(0, 1)));
        assert!(SingleJudgment.aggregate(2, &[&pair, &pair]).is_err());
        let s = Borda { smoothing: 1.0 }.aggregate(2, &[&pair]).unwrap();
        assert_abs_diff_eq!(s.as_scores().unwrap()[0], 2f64.ln(), epsilon = 1e-15);
    }
}
