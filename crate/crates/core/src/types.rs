//! Domain types shared across the crate and the ordering utilities built on them.
//!
//! Items are 0-indexed everywhere; ranks are 1-indexed so that rank `1` is the
//! top of the list. Matrices are dense `nalgebra` matrices.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};

/// Tolerance for skew symmetry and probability normalization checks.
pub const STRUCTURAL_TOL: f64 = 1e-12;

/// A weighted directed graph on `m` items; entry `(i, j)` is the strength of
/// "item `i` preferred to item `j`".
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyPreference {
    weights: DMatrix<f64>,
}

impl AdjacencyPreference {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let m = weights.nrows();
        if m == 0 {
            return Err(invalid("adjacency matrix must have m >= 1"));
        }
        check_len(m, weights.ncols())?;
        for i in 0..m {
            for j in 0..m {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::NonFinite("adjacency weights"));
                }
                if w < 0.0 {
                    return Err(invalid(format!("negative weight at ({i}, {j})")));
                }
                if i == j && w != 0.0 {
                    return Err(invalid(format!("nonzero diagonal at {i}")));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(m, m))
    }

    /// Builds a graph from `(from, to, weight)` edges; repeated edges accumulate.
    pub fn from_edges(m: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(m, m);
        for &(i, j, v) in edges {
            if i >= m || j >= m {
                return Err(invalid(format!("edge ({i}, {j}) out of range for m = {m}")));
            }
            w[(i, j)] += v;
        }
        Self::new(w)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        for r in rows {
            check_len(m, r.len())?;
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn m(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.weights)
    }
}

/// One observed pairwise comparison: `winner` preferred to `loser`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonPreference {
    pub winner: usize,
    pub loser: usize,
}

impl ComparisonPreference {
    pub fn new(winner: usize, loser: usize, m: usize) -> Result<Self> {
        let c = Self { winner, loser };
        c.validate(m)?;
        Ok(c)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.winner == self.loser {
            return Err(invalid(format!("comparison of item {} with itself", self.winner)));
        }
        if self.winner >= m || self.loser >= m {
            return Err(invalid(format!("comparison ({}, {}) out of range for m = {m}", self.winner, self.loser)));
        }
        Ok(())
    }
}

/// A cascade-model session: the presented list and the 1-based clicked
/// position, where `presented.len() + 1` encodes "no click".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    presented: Vec<usize>,
    clicked_position: usize,
}

impl ClickRecord {
    pub fn new(presented: Vec<usize>, clicked_position: usize, m: usize) -> Result<Self> {
        let rec = Self { presented, clicked_position };
        rec.validate(m)?;
        Ok(rec)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let mut seen = vec![false; m];
        for &item in &self.presented {
            if item >= m {
                return Err(invalid(format!("presented item {item} out of range for m = {m}")));
            }
            if seen[item] {
                return Err(invalid(format!("item {item} presented twice")));
            }
            seen[item] = true;
        }
        if self.clicked_position < 1 || self.clicked_position > self.presented.len() + 1 {
            return Err(invalid(format!(
                "clicked position {} outside [1, {}]",
                self.clicked_position,
                self.presented.len() + 1
            )));
        }
        Ok(())
    }

    pub fn presented(&self) -> &[usize] {
        &self.presented
    }

    pub fn clicked_position(&self) -> usize {
        self.clicked_position
    }

    pub fn clicked_item(&self) -> Option<usize> {
        self.presented.get(self.clicked_position - 1).copied()
    }

    /// Items the user looked at: every position up to and including the click.
    pub fn examined(&self) -> &[usize] {
        let end = self.clicked_position.min(self.presented.len());
        &self.presented[..end]
    }
}

/// A vector of relevance scores, one per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreStructure(Vec<f64>);

impl ScoreStructure {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(Self(scores))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ScoreStructure {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A skew-symmetric comparison matrix together with its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewSymmetricAggregate {
    a: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl SkewSymmetricAggregate {
    pub fn new(a: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        let m = a.nrows();
        check_len(m, a.ncols())?;
        check_len(m, mask.nrows())?;
        check_len(m, mask.ncols())?;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                if !a[(i, j)].is_finite() {
                    return Err(Error::NonFinite("skew-symmetric aggregate"));
                }
                worst = worst.max((a[(i, j)] + a[(j, i)]).abs());
                if mask[(i, j)] != mask[(j, i)] {
                    return Err(invalid("mask is not symmetric"));
                }
                if !mask[(i, j)] && a[(i, j)] != 0.0 {
                    return Err(invalid(format!("unmasked entry ({i}, {j}) is nonzero")));
                }
            }
            if !mask[(i, i)] {
                return Err(invalid("mask diagonal must be 1"));
            }
        }
        if worst > STRUCTURAL_TOL {
            return Err(invalid(format!("matrix is not skew-symmetric (|A + A^T| = {worst:e})")));
        }
        Ok(Self { a, mask })
    }

    /// A fully observed aggregate.
    pub fn full(a: DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        Self::new(a, DMatrix::from_element(m, m, true))
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }
}

/// Edge weights `max{s_ij - s_ji, 0}` of a mean preference graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceGraph {
    diff: DMatrix<f64>,
}

impl DifferenceGraph {
    pub(crate) fn from_matrix_unchecked(diff: DMatrix<f64>) -> Self {
        Self { diff }
    }

    pub fn m(&self) -> usize {
        self.diff.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.diff[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.diff[(i, j)] > 0.0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }
}

/// A single preference judgment attached to a query.
#[derive(Debug, Clone, PartialEq)]
pub enum Judgment {
    Adjacency(AdjacencyPreference),
    Comparison(ComparisonPreference),
    Click(ClickRecord),
}

impl Judgment {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            Judgment::Adjacency(a) => check_len(m, a.m()),
            Judgment::Comparison(c) => c.validate(m),
            Judgment::Click(c) => c.validate(m),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Judgment::Adjacency(_) => "adjacency",
            Judgment::Comparison(_) => "comparison",
            Judgment::Click(_) => "click",
        }
    }
}

/// The output of a structure function, consumed by losses.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Scores(ScoreStructure),
    Adjacency(AdjacencyPreference),
    Comparison(ComparisonPreference),
}

impl Structure {
    /// Item count implied by the structure, when it carries one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Structure::Scores(s) => Some(s.len()),
            Structure::Adjacency(a) => Some(a.m()),
            Structure::Comparison(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Structure::Scores(_) => "scores",
            Structure::Adjacency(_) => "adjacency",
            Structure::Comparison(_) => "comparison",
        }
    }

    pub fn as_scores(&self) -> Result<&ScoreStructure> {
        match self {
            Structure::Scores(s) => Ok(s),
            other => Err(Error::JudgmentKind(format!("expected scores, got {}", other.kind()))),
        }
    }

    pub fn as_adjacency(&self) -> Result<&AdjacencyPreference> {
        match self {
            Structure::Adjacency(a) => Ok(a),
            other => Err(Error::JudgmentKind(format!("expected adjacency, got {}", other.kind()))),
        }
    }

    pub fn as_comparison(&self) -> Result<&ComparisonPreference> {
        match self {
            Structure::Comparison(c) => Ok(c),
            other => Err(Error::JudgmentKind(format!("expected comparison, got {}", other.kind()))),
        }
    }
}

/// A finite-support distribution over structures.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLaw {
    support: Vec<Structure>,
    probabilities: Vec<f64>,
}

impl LimitLaw {
    pub fn new(support: Vec<Structure>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("limit law support is empty"));
        }
        check_len(support.len(), probabilities.len())?;
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        let dim = support[0].dim();
        if support.iter().any(|s| s.dim() != dim) {
            return Err(invalid("structures in the support disagree on m"));
        }
        Ok(Self { support, probabilities })
    }

    pub fn point_mass(s: Structure) -> Self {
        Self { support: vec![s], probabilities: vec![1.0] }
    }

    pub fn support(&self) -> &[Structure] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Structure, f64)> {
        self.support.iter().zip(self.probabilities.iter().copied())
    }

    pub fn dim(&self) -> Option<usize> {
        self.support[0].dim()
    }

    /// Expected adjacency matrix of a law over adjacency structures.
    pub fn mean_adjacency(&self) -> Result<AdjacencyPreference> {
        let m = self.dim().ok_or_else(|| invalid("law has no item count"))?;
        let mut mean = DMatrix::zeros(m, m);
        for (s, p) in self.iter() {
            mean += s.as_adjacency()?.weights() * p;
        }
        AdjacencyPreference::new(mean)
    }
}

/// One query: its result features (`m x d`), attached judgments, and
/// optionally the true relevance of each result.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub features: DMatrix<f64>,
    pub judgments: Vec<Judgment>,
    pub relevances: Option<Vec<f64>>,
}

impl Query {
    pub fn m(&self) -> usize {
        self.features.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryDataset {
    queries: Vec<Query>,
}

impl QueryDataset {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        if let Some(first) = queries.first() {
            let d = first.features.ncols();
            for q in &queries {
                check_len(d, q.features.ncols())?;
                let m = q.m();
                for j in &q.judgments {
                    j.validate(m)?;
                }
                if let Some(r) = &q.relevances {
                    check_len(m, r.len())?;
                }
            }
        }
        Ok(Self { queries })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn query(&self, q: usize) -> &Query {
        &self.queries[q]
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Feature dimension `d` (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.queries.first().map_or(0, |q| q.features.ncols())
    }

    /// Total judgment count `n`.
    pub fn num_judgments(&self) -> usize {
        self.queries.iter().map(|q| q.judgments.len()).sum()
    }

    /// Replaces the judgments of query `q`, validating them against its `m`.
    pub fn set_judgments(&mut self, q: usize, judgments: Vec<Judgment>) -> Result<()> {
        let m = self.queries[q].m();
        for j in &judgments {
            j.validate(m)?;
        }
        self.queries[q].judgments = judgments;
        Ok(())
    }
}

/// Linear scoring model `f(q)_i = <theta, x_i^q>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    theta: Vec<f64>,
}

impl LinearScorer {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(Self { theta })
    }

    pub fn zeros(d: usize) -> Self {
        Self { theta: vec![0.0; d] }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn scores(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_len(self.theta.len(), features.ncols())?;
        Ok(score_rows(features, &self.theta))
    }
}

pub(crate) fn score_rows(features: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
    (0..features.nrows()).map(|i| (0..features.ncols()).map(|c| features[(i, c)] * theta[c]).sum()).collect()
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Items sorted best-first: descending score, ties broken by lower index.
pub fn sorted_items(alpha: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].partial_cmp(&alpha[a]).unwrap_or(Ordering::Equal));
    order
}

/// `pi_alpha`: the 1-based rank of every item under a stable descending sort.
pub fn rank_permutation(alpha: &[f64]) -> Result<Vec<usize>> {
    if alpha.is_empty() {
        return Err(Error::EmptyScores);
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut ranks = vec![0; alpha.len()];
    for (pos, item) in sorted_items(alpha).into_iter().enumerate() {
        ranks[item] = pos + 1;
    }
    Ok(ranks)
}

/// True when every pair of items is ordered the same way (including ties).
pub fn same_ordering(alpha: &[f64], beta: &[f64]) -> Result<bool> {
    check_len(alpha.len(), beta.len())?;
    let sign = |x: f64| x.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    for i in 0..alpha.len() {
        for j in (i + 1)..alpha.len() {
            if sign(alpha[i] - alpha[j]) != sign(beta[i] - beta[j]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Score vector `(m, m-1, ..., 1)` arranged so `order[0]` is on top.
pub fn ordering_scores(order: &[usize]) -> Vec<f64> {
    let m = order.len();
    let mut alpha = vec![0.0; m];
    for (pos, &item) in order.iter().enumerate() {
        alpha[item] = (m - pos) as f64;
    }
    alpha
}
