use crate::error::{check_len, invalid, Error, Result};
use crate::types::{AdjacencyPreference, ComparisonPreference, ScoreStructure, Structure};

use super::gain::{DiscountFunction, GainFunction};
use super::phi::{sigmoid, softplus, ConvexPhi};
use super::target::ideal_dcg;

/// Edge penalty `h` in `sum h(Y_ij) phi(alpha_i - alpha_j)`; always `h(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyMap {
    Identity,
    /// `1(y > 0)`.
    Indicator,
    /// `y^p`, `p > 0`.
    Power(f64),
}

impl PenaltyMap {
    pub fn apply(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        match *self {
            PenaltyMap::Identity => y,
            PenaltyMap::Indicator => 1.0,
            PenaltyMap::Power(p) => y.powf(p),
        }
    }
}

/// Margin `h` in `sum_{Y_ij > 0} phi(alpha_i - alpha_j - h(Y_ij))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginMap {
    Identity,
    Constant(f64),
    Scaled(f64),
}

impl MarginMap {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            MarginMap::Identity => y,
            MarginMap::Constant(c) => c,
            MarginMap::Scaled(a) => a * y,
        }
    }
}

/// One term `weight * phi(alpha_i - alpha_j - offset)` of a pairwise surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub offset: f64,
}

/// Sum of pair terms; writes the (sub)gradient into `grad` when given.
pub fn pair_terms_value(alpha: &[f64], terms: &[PairTerm], phi: ConvexPhi, grad: Option<&mut [f64]>) -> f64 {
    let mut total = 0.0;
    match grad {
        Some(g) => {
            g.iter_mut().for_each(|x| *x = 0.0);
            for t in terms {
                let u = alpha[t.i] - alpha[t.j] - t.offset;
                total += t.weight * phi.value(u);
                let d = t.weight * phi.derivative(u);
                g[t.i] += d;
                g[t.j] -= d;
            }
        }
        None => {
            for t in terms {
                total += t.weight * phi.value(alpha[t.i] - alpha[t.j] - t.offset);
            }
        }
    }
    total
}

fn check_alpha(alpha: &[f64], m: usize) -> Result<()> {
    check_len(m, alpha.len())?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

fn eval_with_grad(alpha: &[f64], terms: &[PairTerm], phi: ConvexPhi) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; alpha.len()];
    let v = pair_terms_value(alpha, terms, phi, Some(&mut g));
    (v, g)
}

pub fn pairwise_phi_terms(y: &AdjacencyPreference, h: PenaltyMap) -> Vec<PairTerm> {
    let m = y.m();
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let w = h.apply(y.weight(i, j));
            if w != 0.0 {
                terms.push(PairTerm { i, j, weight: w, offset: 0.0 });
            }
        }
    }
    terms
}

pub fn margin_terms(y: &AdjacencyPreference, h: MarginMap) -> Vec<PairTerm> {
    let m = y.m();
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let w = y.weight(i, j);
            if w > 0.0 {
                terms.push(PairTerm { i, j, weight: 1.0, offset: h.apply(w) });
            }
        }
    }
    terms
}

pub fn difference_terms(s: &AdjacencyPreference) -> Vec<PairTerm> {
    let m = s.m();
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let w = s.weight(i, j) - s.weight(j, i);
            if w > 0.0 {
                terms.push(PairTerm { i, j, weight: w, offset: 0.0 });
            }
        }
    }
    terms
}

/// `sum_{i,j} h(Y_ij) phi(alpha_i - alpha_j)` and a subgradient.
pub fn pairwise_phi_surrogate(
    alpha: &[f64],
    y: &AdjacencyPreference,
    h: PenaltyMap,
    phi: ConvexPhi,
) -> Result<(f64, Vec<f64>)> {
    check_alpha(alpha, y.m())?;
    Ok(eval_with_grad(alpha, &pairwise_phi_terms(y, h), phi))
}

/// `sum_{Y_ij > 0} phi(alpha_i - alpha_j - h(Y_ij))` and a subgradient.
pub fn margin_surrogate(
    alpha: &[f64],
    y: &AdjacencyPreference,
    h: MarginMap,
    phi: ConvexPhi,
) -> Result<(f64, Vec<f64>)> {
    check_alpha(alpha, y.m())?;
    Ok(eval_with_grad(alpha, &margin_terms(y, h), phi))
}

/// `sum_{i,j} [s_ij - s_ji]_+ phi(alpha_i - alpha_j)` and a subgradient.
pub fn difference_surrogate(alpha: &[f64], s: &AdjacencyPreference, phi: ConvexPhi) -> Result<(f64, Vec<f64>)> {
    check_alpha(alpha, s.m())?;
    Ok(eval_with_grad(alpha, &difference_terms(s), phi))
}

/// Regression labels `G(s_j) / Z(s)`.
pub fn regression_labels(s: &ScoreStructure, gain: &GainFunction, discount: DiscountFunction) -> Result<Vec<f64>> {
    let gains = gain.values(s.as_slice())?;
    if gains.iter().any(|g| *g < 0.0) {
        return Err(invalid("regression labels need nonnegative gains"));
    }
    let z = ideal_dcg(&gains, discount);
    if z <= 0.0 {
        return Err(Error::DegenerateGains);
    }
    Ok(gains.into_iter().map(|g| g / z).collect())
}

fn squared_error(alpha: &[f64], labels: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let m = alpha.len() as f64;
    let mut total = 0.0;
    match grad {
        Some(g) => {
            for j in 0..alpha.len() {
                let r = alpha[j] - labels[j];
                total += r * r;
                g[j] = r / m;
            }
        }
        None => {
            for j in 0..alpha.len() {
                let r = alpha[j] - labels[j];
                total += r * r;
            }
        }
    }
    total / (2.0 * m)
}

/// `(1/2m) sum_j (alpha_j - G(s_j)/Z(s))^2` and its gradient.
pub fn ndcg_regression_surrogate(
    alpha: &[f64],
    s: &ScoreStructure,
    gain: &GainFunction,
    discount: DiscountFunction,
) -> Result<(f64, Vec<f64>)> {
    check_alpha(alpha, s.len())?;
    let labels = regression_labels(s, gain, discount)?;
    let mut g = vec![0.0; alpha.len()];
    let v = squared_error(alpha, &labels, Some(&mut g));
    Ok((v, g))
}

fn btl_logistic_into(alpha: &[f64], c: &ComparisonPreference, grad: Option<&mut [f64]>) -> f64 {
    let gap = alpha[c.loser] - alpha[c.winner];
    if let Some(g) = grad {
        g.iter_mut().for_each(|x| *x = 0.0);
        let p = sigmoid(gap);
        g[c.loser] = p;
        g[c.winner] = -p;
    }
    softplus(gap)
}

/// `log(1 + exp(alpha_loser - alpha_winner))` and its gradient.
pub fn btl_logistic_surrogate(alpha: &[f64], c: &ComparisonPreference) -> Result<(f64, Vec<f64>)> {
    c.validate(alpha.len())?;
    check_alpha(alpha, alpha.len())?;
    let mut g = vec![0.0; alpha.len()];
    let v = btl_logistic_into(alpha, c, Some(&mut g));
    Ok((v, g))
}

fn zhang_weights(s: &ScoreStructure, gain: &GainFunction, discount: DiscountFunction) -> Result<Option<Vec<f64>>> {
    let gains = gain.values(s.as_slice())?;
    if gains.iter().any(|g| *g < 0.0) {
        return Err(invalid("Zhang surrogate needs nonnegative gains"));
    }
    let z = ideal_dcg(&gains, discount);
    if z == 0.0 {
        return Ok(None);
    }
    Ok(Some(gains.into_iter().map(|g| g / z).collect()))
}

fn zhang_into(alpha: &[f64], weights: &[f64], phi: ConvexPhi, mut grad: Option<&mut [f64]>) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|x| *x = 0.0);
    }
    let m = alpha.len();
    let mut total = 0.0;
    for j in 0..m {
        let w = weights[j];
        if w == 0.0 {
            continue;
        }
        for l in 0..m {
            if l == j {
                continue;
            }
            let u = alpha[j] - alpha[l];
            total += w * phi.value(u);
            if let Some(g) = grad.as_deref_mut() {
                let d = w * phi.derivative(u);
                g[j] += d;
                g[l] -= d;
            }
        }
    }
    total
}

/// `sum_j (G(s_j)/Z(s)) sum_{l != j} phi(alpha_j - alpha_l)` and a
/// subgradient; 0 when all gains vanish.
pub fn zhang_ndcg_surrogate(
    alpha: &[f64],
    s: &ScoreStructure,
    gain: &GainFunction,
    discount: DiscountFunction,
    phi: ConvexPhi,
) -> Result<(f64, Vec<f64>)> {
    check_alpha(alpha, s.len())?;
    let mut g = vec![0.0; alpha.len()];
    let v = match zhang_weights(s, gain, discount)? {
        Some(w) => zhang_into(alpha, &w, phi, Some(&mut g)),
        None => 0.0,
    };
    Ok((v, g))
}

/// A convex surrogate `psi(alpha, s)` with (sub)gradients.
pub trait Surrogate: Send + Sync {
    /// Value at `alpha`; when `grad` is given it is overwritten with a
    /// (sub)gradient in `alpha`.
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64>;

    /// Whether the value is differentiable everywhere in `alpha`.
    fn is_smooth(&self) -> bool;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwisePhi {
    pub penalty: PenaltyMap,
    pub phi: ConvexPhi,
}

impl Surrogate for PairwisePhi {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let y = s.as_adjacency()?;
        check_alpha(alpha, y.m())?;
        Ok(pair_terms_value(alpha, &pairwise_phi_terms(y, self.penalty), self.phi, grad))
    }

    fn is_smooth(&self) -> bool {
        self.phi.is_smooth()
    }

    fn name(&self) -> String {
        format!("pairwise-{}", self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub margin: MarginMap,
    pub phi: ConvexPhi,
}

impl Surrogate for Margin {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let y = s.as_adjacency()?;
        check_alpha(alpha, y.m())?;
        Ok(pair_terms_value(alpha, &margin_terms(y, self.margin), self.phi, grad))
    }

    fn is_smooth(&self) -> bool {
        self.phi.is_smooth()
    }

    fn name(&self) -> String {
        format!("margin-{}", self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    pub phi: ConvexPhi,
}

impl Surrogate for Difference {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let y = s.as_adjacency()?;
        check_alpha(alpha, y.m())?;
        Ok(pair_terms_value(alpha, &difference_terms(y), self.phi, grad))
    }

    fn is_smooth(&self) -> bool {
        self.phi.is_smooth()
    }

    fn name(&self) -> String {
        format!("difference-{}", self.phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgRegression {
    pub gain: GainFunction,
    pub discount: DiscountFunction,
}

impl Surrogate for NdcgRegression {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let s = s.as_scores()?;
        check_alpha(alpha, s.len())?;
        let labels = regression_labels(s, &self.gain, self.discount)?;
        Ok(squared_error(alpha, &labels, grad))
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "regression".into()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BtlLogistic;

impl Surrogate for BtlLogistic {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let c = s.as_comparison()?;
        c.validate(alpha.len())?;
        check_alpha(alpha, alpha.len())?;
        Ok(btl_logistic_into(alpha, c, grad))
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "logistic".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zhang {
    pub gain: GainFunction,
    pub discount: DiscountFunction,
    pub phi: ConvexPhi,
}

impl Surrogate for Zhang {
    fn eval(&self, alpha: &[f64], s: &Structure, grad: Option<&mut [f64]>) -> Result<f64> {
        let s = s.as_scores()?;
        check_alpha(alpha, s.len())?;
        match zhang_weights(s, &self.gain, self.discount)? {
            Some(w) => Ok(zhang_into(alpha, &w, self.phi, grad)),
            None => {
                if let Some(g) = grad {
                    g.iter_mut().for_each(|x| *x = 0.0);
                }
                Ok(0.0)
            }
        }
    }

    fn is_smooth(&self) -> bool {
        self.phi.is_smooth()
    }

    fn name(&self) -> String {
        format!("zhang-{}", self.phi)
    }
}
