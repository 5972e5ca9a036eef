//! Consistency lab: exact conditional surrogate analysis on small instances,
//! inconsistency witnesses, and a randomized search for low-noise
//! counterexamples.
//!
//! A surrogate-optimal ordering is a strict ordering `sigma` whose region
//! `{alpha : alpha_sigma(0) > ... > alpha_sigma(m-1)}` contains points with
//! surrogate value arbitrarily close to the global infimum. For the hinge
//! this is decided by one LP per ordering; for logistic and exponential
//! `phi` the infimum may sit at infinity, and optimality is decided from the
//! strongly connected components of the term graph.

use std::collections::BTreeMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::losses::{pair_terms_value, ConvexPhi, MarginMap, PairTerm, PairwiseEdgeLoss, PenaltyMap, TargetLoss};
use crate::risk::{all_orderings, bayes_conditional_minimizers, conditional_target_risk, BRUTE_FORCE_MAX_M};
use crate::solver::{bfgs_centered, subgradient_centered, BfgsConfig, SubgradientConfig};
use crate::types::{AdjacencyPreference, DifferenceGraph, LimitLaw, Structure};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `diff[i][j] = max{Y_ij - Y_ji, 0}`.
pub fn difference_graph(mean: &AdjacencyPreference) -> DifferenceGraph {
    let y = mean.weights();
    let m = mean.m();
    let diff = nalgebra::DMatrix::from_fn(m, m, |i, j| (y[(i, j)] - y[(j, i)]).max(0.0));
    DifferenceGraph::from_matrix_unchecked(diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LowNoiseCheck {
    pub low_noise: bool,
    /// First ordered triple `(i, j, k)` with edges `i->j`, `j->k` and
    /// `w(i->k) < w(i->j) + w(j->k)`.
    pub violation: Option<(usize, usize, usize)>,
}

/// Reverse triangle inequality on every two-edge path. Comparisons carry a
/// `1e-12` relative slack for rounding in averaged weights.
pub fn is_low_noise(g: &DifferenceGraph) -> LowNoiseCheck {
    let m = g.m();
    for i in 0..m {
        for j in 0..m {
            if j == i || !g.has_edge(i, j) {
                continue;
            }
            for k in 0..m {
                if k == i || k == j || !g.has_edge(j, k) {
                    continue;
                }
                let path = g.weight(i, j) + g.weight(j, k);
                if g.weight(i, k) < path - 1e-12 * path {
                    return LowNoiseCheck { low_noise: false, violation: Some((i, j, k)) };
                }
            }
        }
    }
    LowNoiseCheck { low_noise: true, violation: None }
}

pub fn has_cycle(g: &DifferenceGraph) -> bool {
    let reach = reachability(g.m(), |i, j| g.has_edge(i, j));
    (0..g.m()).any(|i| reach[i][i])
}

/// Transitive closure (paths of length >= 1).
fn reachability(m: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<bool>> {
    let mut r: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| edge(i, j)).collect()).collect();
    for k in 0..m {
        for i in 0..m {
            if r[i][k] {
                for j in 0..m {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Pairwise surrogate families whose conditional risk is a finite sum of
/// pair terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabSurrogate {
    /// `E sum h(Y_ij) phi(alpha_i - alpha_j)`.
    Pairwise { penalty: PenaltyMap, phi: ConvexPhi },
    /// `E sum_{Y_ij > 0} phi(alpha_i - alpha_j - h(Y_ij))`.
    Margin { margin: MarginMap, phi: ConvexPhi },
    /// `sum [s_ij - s_ji]_+ phi(alpha_i - alpha_j)` on the aggregated
    /// structure `s = E Y`.
    Difference { phi: ConvexPhi },
}

impl LabSurrogate {
    pub fn pairwise(phi: ConvexPhi) -> Self {
        LabSurrogate::Pairwise { penalty: PenaltyMap::Identity, phi }
    }

    pub fn phi(&self) -> ConvexPhi {
        match *self {
            LabSurrogate::Pairwise { phi, .. }
            | LabSurrogate::Margin { phi, .. }
            | LabSurrogate::Difference { phi } => phi,
        }
    }

    pub fn name(&self) -> String {
        match self {
            LabSurrogate::Pairwise { phi, .. } => format!("pairwise-{phi}"),
            LabSurrogate::Margin { phi, .. } => format!("margin-{phi}"),
            LabSurrogate::Difference { phi } => format!("difference-{phi}"),
        }
    }

    /// Pair terms of the conditional risk under `law`, merged by
    /// `(i, j, offset)`.
    pub fn conditional_terms(&self, law: &LimitLaw) -> Result<Vec<PairTerm>> {
        let mut merged: BTreeMap<(usize, usize, u64), f64> = BTreeMap::new();
        let mut push = |i: usize, j: usize, w: f64, off: f64| {
            *merged.entry((i, j, off.to_bits())).or_insert(0.0) += w;
        };
        match *self {
            LabSurrogate::Pairwise { penalty, .. } => {
                for (s, p) in law.iter() {
                    let y = s.as_adjacency()?;
                    for i in 0..y.m() {
                        for j in 0..y.m() {
                            let w = penalty.apply(y.weight(i, j));
                            if !(w >= 0.0) || !w.is_finite() {
                                return Err(invalid("penalty must map weights to finite non-negative values"));
                            }
                            if w > 0.0 {
                                push(i, j, p * w, 0.0);
                            }
                        }
                    }
                }
            }
            LabSurrogate::Margin { margin, .. } => {
                for (s, p) in law.iter() {
                    let y = s.as_adjacency()?;
                    for i in 0..y.m() {
                        for j in 0..y.m() {
                            let w = y.weight(i, j);
                            if w > 0.0 {
                                let off = margin.apply(w);
                                if !off.is_finite() {
                                    return Err(Error::NonFinite("margin"));
                                }
                                push(i, j, p, off);
                            }
                        }
                    }
                }
            }
            LabSurrogate::Difference { .. } => {
                let g = difference_graph(&law.mean_adjacency()?);
                for i in 0..g.m() {
                    for j in 0..g.m() {
                        if g.has_edge(i, j) {
                            push(i, j, g.weight(i, j), 0.0);
                        }
                    }
                }
            }
        }
        Ok(merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((i, j, off), weight)| PairTerm { i, j, weight, offset: f64::from_bits(off) })
            .collect())
    }
}

/// Tolerances and solver settings for the lab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabConfig {
    /// Minimum target-risk gap for a witness.
    pub epsilon: f64,
    /// Slack `tol * (1 + |inf|)` allowed between a witness' surrogate value
    /// and the infimum, and between per-ordering and global infima.
    pub value_tol: f64,
    /// Two coordinates of a smooth minimizer closer than this count as tied.
    pub tie_tol: f64,
    /// Gradient norm below which a smooth minimum is certified.
    pub certify_grad: f64,
    /// Allowed relative disagreement between the LP and subgradient routes.
    pub agreement_tol: f64,
    pub bfgs: BfgsConfig,
    pub subgradient: SubgradientConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            value_tol: 1e-6,
            tie_tol: 1e-5,
            certify_grad: 1e-6,
            agreement_tol: 1e-3,
            bfgs: BfgsConfig { max_iter: 5000, grad_tol: 1e-10 },
            subgradient: SubgradientConfig::default(),
        }
    }
}

fn law_dim(law: &LimitLaw) -> Result<usize> {
    let m = law.dim().ok_or_else(|| invalid("law does not fix an item count"))?;
    if m > 10 {
        return Err(invalid(format!("lab instances need m <= 10, got {m}")));
    }
    for (s, _) in law.iter() {
        s.as_adjacency()?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Smooth minimum with projected gradient norm below the threshold.
    Stationary { grad_norm: f64 },
    /// Exact LP optimum confirmed by multi-start subgradient descent.
    LpAgreement { lp_value: f64, subgradient_value: f64, subgradient_spread: f64 },
    /// The infimum is approached along `direction`; each strongly connected
    /// block of the term graph is minimized with the given gradient norm.
    AtInfinity { direction: Vec<f64>, block_grad_norm: f64 },
    /// No certificate could be produced.
    Failed { reason: String },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Certificate::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateMinimum {
    /// A minimizer, or for an infimum at infinity a point within
    /// `value_tol` of it.
    pub alpha: Vec<f64>,
    /// The infimum.
    pub value: f64,
    /// False when no finite point attains the infimum; scores then drift
    /// to infinity along the certificate's direction.
    pub attained: bool,
    pub certificate: Certificate,
}

/// Strongly connected components of the term graph `i -> j`.
fn components(m: usize, terms: &[PairTerm]) -> Vec<usize> {
    let reach = reachability(m, |i, j| terms.iter().any(|t| t.i == i && t.j == j));
    let mut comp = vec![usize::MAX; m];
    let mut next = 0;
    for i in 0..m {
        if comp[i] != usize::MAX {
            continue;
        }
        for j in i..m {
            if j == i || (reach[i][j] && reach[j][i]) {
                comp[j] = next;
            }
        }
        next += 1;
    }
    comp
}

/// Per-component minimizers of the internal terms, written into one
/// centered-per-component vector. Returns (alpha, sum of minima, max grad norm).
fn block_minima(m: usize, terms: &[PairTerm], comp: &[usize], phi: ConvexPhi, cfg: &LabConfig) -> (Vec<f64>, f64, f64) {
    let nblocks = comp.iter().max().map_or(0, |c| c + 1);
    let mut alpha = vec![0.0; m];
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for b in 0..nblocks {
        let members: Vec<usize> = (0..m).filter(|&i| comp[i] == b).collect();
        if members.len() < 2 {
            continue;
        }
        let local = |i: usize| members.iter().position(|&x| x == i).expect("member");
        let internal: Vec<PairTerm> = terms
            .iter()
            .filter(|t| comp[t.i] == b && comp[t.j] == b)
            .map(|t| PairTerm { i: local(t.i), j: local(t.j), ..*t })
            .collect();
        let f = |x: &[f64], g: Option<&mut [f64]>| pair_terms_value(x, &internal, phi, g);
        let r = bfgs_centered(&vec![0.0; members.len()], &f, cfg.bfgs);
        total += r.value;
        worst = worst.max(r.grad_norm);
        for (l, &i) in members.iter().enumerate() {
            alpha[i] = r.alpha[l];
        }
    }
    (alpha, total, worst)
}

/// LP for the hinge conditional risk, optionally restricted to the closed
/// ordering cone of `order`. Returns the optimal value and point.
fn hinge_lp(m: usize, terms: &[PairTerm], order: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pinned = order.map_or(0, |o| o[m - 1]);
    let vars: Vec<_> = (0..m)
        .map(|i| {
            if i == pinned {
                lp.add_var(0.0, (0.0, 0.0))
            } else {
                lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))
            }
        })
        .collect();
    for t in terms {
        let z = lp.add_var(t.weight, (0.0, f64::INFINITY));
        // z >= 1 + offset - (alpha_i - alpha_j)
        lp.add_constraint([(z, 1.0), (vars[t.i], 1.0), (vars[t.j], -1.0)], ComparisonOp::Ge, 1.0 + t.offset);
    }
    if let Some(o) = order {
        for w in o.windows(2) {
            lp.add_constraint([(vars[w[0]], 1.0), (vars[w[1]], -1.0)], ComparisonOp::Ge, 0.0);
        }
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    let mut alpha: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
    let mean = alpha.iter().sum::<f64>() / m as f64;
    alpha.iter_mut().for_each(|a| *a -= mean);
    Ok((sol.objective(), alpha))
}

fn tol(cfg: &LabConfig, v: f64) -> f64 {
    cfg.value_tol * (1.0 + v.abs())
}

/// Minimizes the exact conditional surrogate risk under a finite law.
pub fn minimize_convex_conditional_surrogate(
    law: &LimitLaw,
    surrogate: LabSurrogate,
    cfg: &LabConfig,
) -> Result<SurrogateMinimum> {
    let m = law_dim(law)?;
    let terms = surrogate.conditional_terms(law)?;
    let phi = surrogate.phi();
    let f = |x: &[f64], g: Option<&mut [f64]>| pair_terms_value(x, &terms, phi, g);
    if terms.is_empty() {
        return Ok(SurrogateMinimum {
            alpha: vec![0.0; m],
            value: 0.0,
            attained: true,
            certificate: Certificate::Stationary { grad_norm: 0.0 },
        });
    }
    match phi {
        ConvexPhi::Hinge => {
            let (lp_value, alpha) = hinge_lp(m, &terms, None)?;
            let sg = subgradient_centered(m, &f, cfg.subgradient);
            let agree = sg.value >= lp_value - tol(cfg, lp_value)
                && sg.value - lp_value <= cfg.agreement_tol * (1.0 + lp_value.abs());
            let certificate = if agree {
                Certificate::LpAgreement { lp_value, subgradient_value: sg.value, subgradient_spread: sg.spread }
            } else {
                Certificate::Failed {
                    reason: format!("LP value {lp_value} and subgradient value {} disagree", sg.value),
                }
            };
            Ok(SurrogateMinimum { alpha, value: lp_value, attained: true, certificate })
        }
        ConvexPhi::SquaredHinge => {
            let r = bfgs_centered(&vec![0.0; m], &f, cfg.bfgs);
            let certificate = if r.grad_norm < cfg.certify_grad {
                Certificate::Stationary { grad_norm: r.grad_norm }
            } else {
                Certificate::Failed {
                    reason: format!("gradient norm {} after {} iterations", r.grad_norm, r.iterations),
                }
            };
            Ok(SurrogateMinimum { alpha: r.alpha, value: r.value, attained: true, certificate })
        }
        ConvexPhi::Logistic | ConvexPhi::Exponential => {
            let comp = components(m, &terms);
            let (base, value, grad) = block_minima(m, &terms, &comp, phi, cfg);
            let attained = terms.iter().all(|t| comp[t.i] == comp[t.j]);
            let certified = grad < cfg.certify_grad;
            if attained {
                let certificate = if certified {
                    Certificate::Stationary { grad_norm: grad }
                } else {
                    Certificate::Failed { reason: format!("gradient norm {grad}") }
                };
                return Ok(SurrogateMinimum { alpha: base, value, attained, certificate });
            }
            // Components in a topological order of the condensation: the
            // direction lifts upstream blocks above downstream ones.
            let nblocks = comp.iter().max().map_or(0, |c| c + 1);
            let reach = reachability(m, |i, j| terms.iter().any(|t| t.i == i && t.j == j));
            let depth: Vec<usize> = (0..nblocks)
                .map(|b| {
                    (0..m)
                        .filter(|&j| comp[j] != b && (0..m).any(|i| comp[i] == b && reach[j][i]))
                        .map(|j| comp[j])
                        .collect::<std::collections::BTreeSet<_>>()
                        .len()
                })
                .collect();
            let direction: Vec<f64> = (0..m).map(|i| -(depth[comp[i]] as f64)).collect();
            let alpha = push_to_infinity(&base, &direction, &f, value, cfg);
            let certificate = match (&alpha, certified) {
                (Some(_), true) => Certificate::AtInfinity { direction: direction.clone(), block_grad_norm: grad },
                _ => Certificate::Failed { reason: format!("block gradient norm {grad}") },
            };
            Ok(SurrogateMinimum { alpha: alpha.unwrap_or_else(|| base.clone()), value, attained: false, certificate })
        }
    }
}

/// Moves `base + t * direction` out until the value is within tolerance of
/// `inf`.
fn push_to_infinity(
    base: &[f64],
    direction: &[f64],
    f: &dyn Fn(&[f64], Option<&mut [f64]>) -> f64,
    inf: f64,
    cfg: &LabConfig,
) -> Option<Vec<f64>> {
    let mut t = 1.0;
    while t <= 1e8 {
        let x: Vec<f64> = base.iter().zip(direction).map(|(b, d)| b + t * d).collect();
        if f(&x, None) <= inf + tol(cfg, inf) {
            return Some(x);
        }
        t *= 2.0;
    }
    None
}

/// Makes `alpha` strictly decreasing along `order` by raising earlier
/// entries where needed; each entry moves by at most the local violation
/// plus `m * 1e-9`.
fn strictify(alpha: &mut [f64], order: &[usize]) {
    for l in (0..order.len().saturating_sub(1)).rev() {
        let (a, b) = (order[l], order[l + 1]);
        let floor = alpha[b] + 1e-9 * (1.0 + alpha[b].abs());
        if alpha[a] < floor {
            alpha[a] = floor;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingStatus {
    pub ordering: Vec<usize>,
    /// Infimum of the surrogate over the ordering's region, where computed.
    pub restricted_infimum: Option<f64>,
    pub surrogate_optimal: bool,
    /// Strictly ordered point within tolerance of the global infimum.
    pub witness_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingAnalysis {
    pub minimum: SurrogateMinimum,
    pub orderings: Vec<OrderingStatus>,
    pub certified: bool,
    pub note: Option<String>,
}

/// Classifies every strict ordering as surrogate-optimal or not.
pub fn surrogate_optimal_orderings(
    law: &LimitLaw,
    surrogate: LabSurrogate,
    cfg: &LabConfig,
) -> Result<OrderingAnalysis> {
    let m = law_dim(law)?;
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::BruteForceCap(m));
    }
    let terms = surrogate.conditional_terms(law)?;
    let phi = surrogate.phi();
    let f = |x: &[f64], g: Option<&mut [f64]>| pair_terms_value(x, &terms, phi, g);
    let minimum = minimize_convex_conditional_surrogate(law, surrogate, cfg)?;
    let inf = minimum.value;
    let mut certified = minimum.certificate.is_certified();
    let mut note = None;
    let mut orderings = Vec::new();
    match phi {
        ConvexPhi::Hinge => {
            let mut best = f64::INFINITY;
            for order in all_orderings(m) {
                let (v, mut alpha) = hinge_lp(m, &terms, Some(&order))?;
                best = best.min(v);
                let optimal = v <= inf + tol(cfg, inf);
                let witness_point = optimal.then(|| {
                    strictify(&mut alpha, &order);
                    alpha
                });
                orderings.push(OrderingStatus {
                    ordering: order,
                    restricted_infimum: Some(v),
                    surrogate_optimal: optimal,
                    witness_point,
                });
            }
            if (best - inf).abs() > tol(cfg, inf) {
                certified = false;
                note = Some(format!("best ordering LP value {best} differs from global LP value {inf}"));
            }
        }
        ConvexPhi::Logistic | ConvexPhi::Exponential => {
            let comp = components(m, &terms);
            let (base, _, _) = block_minima(m, &terms, &comp, phi, cfg);
            for order in all_orderings(m) {
                let point = limit_point(&order, &base, &comp, &terms, cfg).and_then(|(shifted, dir)| {
                    let mut x = push_to_infinity(&shifted, &dir, &f, inf, cfg)?;
                    strictify(&mut x, &order);
                    Some(x)
                });
                orderings.push(OrderingStatus {
                    ordering: order,
                    restricted_infimum: None,
                    surrogate_optimal: point.is_some(),
                    witness_point: point,
                });
            }
        }
        ConvexPhi::SquaredHinge => {
            certified = false;
            note = Some("no exact ordering characterization for squared-hinge".into());
            for order in all_orderings(m) {
                orderings.push(OrderingStatus {
                    ordering: order,
                    restricted_infimum: None,
                    surrogate_optimal: false,
                    witness_point: None,
                });
            }
        }
    }
    for s in &mut orderings {
        if let Some(x) = &s.witness_point {
            if f(x, None) > inf + tol(cfg, inf) {
                certified = false;
                note = Some(format!("witness point for {:?} exceeds the infimum tolerance", s.ordering));
                s.witness_point = None;
            }
        }
    }
    if orderings.iter().all(|s| !s.surrogate_optimal) && certified {
        certified = false;
        note = Some("no ordering reaches the infimum".into());
    }
    Ok(OrderingAnalysis { minimum, orderings, certified, note })
}

/// For an infimum at infinity: whether the closed region of `order`
/// reaches the infimum. On success returns the block minimizers shifted to
/// match `order` and the direction separating consecutive segments.
///
/// `order` is cut into the finest contiguous segments that contain whole
/// components. Terms between components must point from an earlier segment
/// to a later one; inside a segment, component shifts must make the block
/// minimizers weakly consistent with `order` (difference constraints).
fn limit_point(
    order: &[usize],
    base: &[f64],
    comp: &[usize],
    terms: &[PairTerm],
    cfg: &LabConfig,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = order.len();
    let nblocks = comp.iter().max().map_or(0, |c| c + 1);
    let mut last = vec![0; nblocks];
    for (pos, &i) in order.iter().enumerate() {
        last[comp[i]] = pos;
    }
    let mut segment = vec![0; m];
    let mut seg = 0;
    let mut reach = 0;
    for (pos, &i) in order.iter().enumerate() {
        segment[i] = seg;
        reach = reach.max(last[comp[i]]);
        if reach == pos {
            seg += 1;
        }
    }
    for t in terms {
        if comp[t.i] != comp[t.j] && segment[t.i] >= segment[t.j] {
            return None;
        }
    }
    // e_b - e_a <= base_a - base_b + tie_tol for consecutive a before b.
    let mut edges = Vec::new();
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if segment[a] != segment[b] {
            continue;
        }
        let c = base[a] - base[b] + cfg.tie_tol;
        if comp[a] == comp[b] {
            if c < 0.0 {
                return None;
            }
        } else {
            edges.push((comp[a], comp[b], c));
        }
    }
    let mut shift = vec![0.0; nblocks];
    for _ in 0..=nblocks {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if shift[u] + c < shift[v] - 1e-15 {
                shift[v] = shift[u] + c;
                changed = true;
            }
        }
        if !changed {
            let shifted = (0..m).map(|i| base[i] + shift[comp[i]]).collect();
            let direction = (0..m).map(|i| -(segment[i] as f64)).collect();
            return Some((shifted, direction));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    InconsistentWitness,
    ConsistentOnInstance,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::InconsistentWitness => "INCONSISTENT WITNESS",
            Verdict::ConsistentOnInstance => "CONSISTENT ON INSTANCE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub m: usize,
    pub support: Vec<Vec<Vec<f64>>>,
    pub probabilities: Vec<f64>,
    pub mean_adjacency: Vec<Vec<f64>>,
    pub difference_graph: Vec<Vec<f64>>,
    pub low_noise: LowNoiseCheck,
}

impl Instance {
    fn describe(law: &LimitLaw) -> Result<Self> {
        let m = law_dim(law)?;
        let support = law.support().iter().map(|s| s.as_adjacency().map(|a| a.to_rows())).collect::<Result<_>>()?;
        let mean = law.mean_adjacency()?;
        let g = difference_graph(&mean);
        let diff = (0..m).map(|i| (0..m).map(|j| g.weight(i, j)).collect()).collect();
        Ok(Self {
            m,
            support,
            probabilities: law.probabilities().to_vec(),
            mean_adjacency: mean.to_rows(),
            difference_graph: diff,
            low_noise: is_low_noise(&g),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingVerdict {
    pub ordering: Vec<usize>,
    pub target_risk: f64,
    pub target_gap: f64,
    pub bayes_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub ordering: Vec<usize>,
    pub alpha: Vec<f64>,
    pub surrogate_value: f64,
    pub surrogate_infimum: f64,
    pub target_risk: f64,
    pub bayes_risk: f64,
    pub target_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub minimum: SurrogateMinimum,
    pub orderings_certified: bool,
    pub epsilon: f64,
    pub value_tol: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub verdict: Verdict,
    pub surrogate: String,
    pub target: String,
    pub bayes_risk: f64,
    pub bayes_orderings: Vec<Vec<usize>>,
    pub surrogate_min_orderings: Vec<OrderingVerdict>,
    /// Largest target gap among surrogate-optimal orderings.
    pub witness_gap: f64,
    /// Every surrogate-optimal ordering is Bayes-optimal.
    pub recovers_bayes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InconsistencyReport {
    pub schema_version: u32,
    pub instance: Instance,
    pub verdicts: Verdicts,
    pub witnesses: Vec<Witness>,
    pub certificates: Certificates,
}

impl InconsistencyReport {
    pub fn verdict(&self) -> Verdict {
        self.verdicts.verdict
    }
}

/// Compares surrogate-optimal orderings against Bayes orderings of the
/// target loss. A witness is an ordering that the surrogate treats as
/// optimal (a strict point within tolerance of the infimum exists) whose
/// target conditional risk exceeds the Bayes risk by at least `epsilon`.
pub fn inconsistency_report(
    law: &LimitLaw,
    surrogate: LabSurrogate,
    target: &dyn TargetLoss,
    cfg: &LabConfig,
) -> Result<InconsistencyReport> {
    let instance = Instance::describe(law)?;
    let bayes = bayes_conditional_minimizers(law, target)?;
    let analysis = surrogate_optimal_orderings(law, surrogate, cfg)?;
    let terms = surrogate.conditional_terms(law)?;
    let inf = analysis.minimum.value;
    let mut witnesses = Vec::new();
    let mut optimal = Vec::new();
    for s in analysis.orderings.iter().filter(|s| s.surrogate_optimal) {
        let risk = bayes.risk_of(&s.ordering).expect("every ordering is enumerated");
        let gap = risk - bayes.risk;
        optimal.push(OrderingVerdict {
            ordering: s.ordering.clone(),
            target_risk: risk,
            target_gap: gap,
            bayes_optimal: bayes.is_optimal(&s.ordering),
        });
        if let (Some(x), true) = (&s.witness_point, gap >= cfg.epsilon) {
            // Recomputed at the point itself rather than trusted from the
            // ordering classification.
            let sv = pair_terms_value(x, &terms, surrogate.phi(), None);
            let tr = conditional_target_risk(x, law, target)?;
            if analysis.certified && sv <= inf + tol(cfg, inf) && tr - bayes.risk >= cfg.epsilon {
                witnesses.push(Witness {
                    ordering: s.ordering.clone(),
                    alpha: x.clone(),
                    surrogate_value: sv,
                    surrogate_infimum: inf,
                    target_risk: tr,
                    bayes_risk: bayes.risk,
                    target_gap: tr - bayes.risk,
                });
            }
        }
    }
    let witness_gap = optimal.iter().map(|o| o.target_gap).fold(0.0, f64::max);
    let verdict = if !witnesses.is_empty() {
        Verdict::InconsistentWitness
    } else if analysis.certified && witness_gap < cfg.epsilon {
        Verdict::ConsistentOnInstance
    } else {
        Verdict::Inconclusive
    };
    Ok(InconsistencyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        instance,
        verdicts: Verdicts {
            verdict,
            surrogate: surrogate.name(),
            target: target.name(),
            bayes_risk: bayes.risk,
            bayes_orderings: bayes.orderings.clone(),
            recovers_bayes: !optimal.is_empty() && optimal.iter().all(|o| o.bayes_optimal),
            surrogate_min_orderings: optimal,
            witness_gap,
        },
        witnesses,
        certificates: Certificates {
            minimum: analysis.minimum,
            orderings_certified: analysis.certified,
            epsilon: cfg.epsilon,
            value_tol: cfg.value_tol,
            note: analysis.note,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub m: usize,
    pub budget: usize,
    /// Edge weights are `10^U(-e, e)`.
    pub log10_weight_range: f64,
    pub lab: LabConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { m: 3, budget: 10_000, log10_weight_range: 1.0, lab: LabConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub law: LimitLaw,
    pub report: InconsistencyReport,
    /// Zero-based index of the accepted candidate.
    pub candidate: usize,
    pub low_noise_candidates: usize,
}

/// Complete DAG on a random item order with log-uniform edge weights.
fn random_complete_dag(m: usize, range: f64, rng: &mut ChaCha8Rng) -> Result<AdjacencyPreference> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            edges.push((order[a], order[b], 10f64.powf(rng.gen_range(-range..range))));
        }
    }
    AdjacencyPreference::from_edges(m, &edges)
}

/// Mixture of two random complete DAGs with probability 1/2 each, drawn
/// from stream `candidate` of `seed`.
pub fn sample_two_dag_mixture(m: usize, log10_weight_range: f64, seed: u64, candidate: u64) -> Result<LimitLaw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(candidate);
    let a = random_complete_dag(m, log10_weight_range, &mut rng)?;
    let b = random_complete_dag(m, log10_weight_range, &mut rng)?;
    LimitLaw::new(vec![Structure::Adjacency(a), Structure::Adjacency(b)], vec![0.5, 0.5])
}

/// Searches two-DAG mixtures with a low-noise mean difference graph until
/// the surrogate yields a certified inconsistency witness for the pairwise
/// edge loss. Candidates are tried in order, so the first witness is
/// returned deterministically.
pub fn construct_low_noise_counterexample(
    surrogate: LabSurrogate,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<Counterexample> {
    if matches!(surrogate, LabSurrogate::Difference { .. }) {
        return Err(invalid("the difference surrogate is not a counterexample search target"));
    }
    if cfg.m < 3 {
        return Err(invalid("counterexamples need m >= 3"));
    }
    let mut low_noise_candidates = 0;
    for c in 0..cfg.budget {
        let law = sample_two_dag_mixture(cfg.m, cfg.log10_weight_range, seed, c as u64)?;
        let g = difference_graph(&law.mean_adjacency()?);
        if g.matrix().iter().all(|&w| w == 0.0) || !is_low_noise(&g).low_noise {
            continue;
        }
        low_noise_candidates += 1;
        let report = inconsistency_report(&law, surrogate, &PairwiseEdgeLoss, &cfg.lab)?;
        if report.verdict() == Verdict::InconsistentWitness {
            return Ok(Counterexample { law, report, candidate: c, low_noise_candidates });
        }
    }
    Err(Error::NoWitness(cfg.budget))
}
