use crate::error::{check_len, invalid, Error, Result};
use crate::types::{sorted_items, AdjacencyPreference, ScoreStructure, Structure};

use super::gain::{DiscountFunction, GainFunction};

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::EmptyScores);
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Weighted count of misordered edges. A tie costs `Y_ij` once: the `i < j`
/// edge is charged, the `i > j` edge is not.
pub fn pairwise_edge_loss(alpha: &[f64], y: &AdjacencyPreference) -> Result<f64> {
    check_alpha(alpha)?;
    check_len(y.m(), alpha.len())?;
    let m = alpha.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let w = y.weight(i, j);
            if w == 0.0 {
                continue;
            }
            let wrong = if i < j { alpha[i] <= alpha[j] } else { alpha[i] < alpha[j] };
            if wrong {
                total += w;
            }
        }
    }
    Ok(total)
}

/// Largest achievable DCG: gains sorted descending against increasing discounts.
pub fn ideal_dcg(gains: &[f64], discount: DiscountFunction) -> f64 {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
    sorted.iter().enumerate().map(|(pos, g)| g * discount.weight(pos + 1)).sum()
}

fn nonnegative_gains(s: &ScoreStructure, gain: &GainFunction) -> Result<Vec<f64>> {
    let gains = gain.values(s.as_slice())?;
    if let Some(g) = gains.iter().find(|g| **g < 0.0) {
        return Err(invalid(format!("negative gain {g}; NDCG needs nonnegative gains")));
    }
    Ok(gains)
}

fn dcg_in_order(gains: &[f64], order: &[usize], discount: DiscountFunction) -> f64 {
    order.iter().enumerate().map(|(pos, &item)| gains[item] * discount.weight(pos + 1)).sum()
}

/// `1 - DCG(alpha) / Z(s)`; defined as 0 when every gain is 0.
pub fn ndcg_loss(alpha: &[f64], s: &ScoreStructure, gain: &GainFunction, discount: DiscountFunction) -> Result<f64> {
    check_alpha(alpha)?;
    check_len(s.len(), alpha.len())?;
    let gains = nonnegative_gains(s, gain)?;
    let z = ideal_dcg(&gains, discount);
    if z == 0.0 {
        return Ok(0.0);
    }
    let dcg = dcg_in_order(&gains, &sorted_items(alpha), discount);
    Ok((1.0 - dcg / z).clamp(0.0, 1.0))
}

/// Expected-reciprocal-rank loss under the cascade with stop probabilities
/// `G(s)`; requires gains in `[0, 1]` and `F(1) >= 1`.
pub fn err_loss(alpha: &[f64], s: &ScoreStructure, gain: &GainFunction, discount: DiscountFunction) -> Result<f64> {
    check_alpha(alpha)?;
    check_len(s.len(), alpha.len())?;
    let gains = gain.values(s.as_slice())?;
    if let Some(g) = gains.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(invalid(format!("ERR gain {g} outside [0, 1]")));
    }
    if discount.value(1) < 1.0 {
        return Err(invalid(format!("ERR needs F(1) >= 1, discount {discount} has F(1) < 1")));
    }
    Ok(1.0 - err_utility(&gains, &sorted_items(alpha), discount))
}

pub(crate) fn err_utility(gains: &[f64], order: &[usize], discount: DiscountFunction) -> f64 {
    let mut not_stopped = 1.0;
    let mut total = 0.0;
    for (pos, &item) in order.iter().enumerate() {
        total += discount.weight(pos + 1) * gains[item] * not_stopped;
        not_stopped *= 1.0 - gains[item];
    }
    total
}

/// A target loss `L(alpha, s)`. Every implementation here depends on
/// `alpha` only through the ordering it induces.
pub trait TargetLoss: Send + Sync {
    fn loss(&self, alpha: &[f64], s: &Structure) -> Result<f64>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PairwiseEdgeLoss;

impl TargetLoss for PairwiseEdgeLoss {
    fn loss(&self, alpha: &[f64], s: &Structure) -> Result<f64> {
        pairwise_edge_loss(alpha, s.as_adjacency()?)
    }

    fn name(&self) -> String {
        "pairwise".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgLoss {
    pub gain: GainFunction,
    pub discount: DiscountFunction,
}

impl TargetLoss for NdcgLoss {
    fn loss(&self, alpha: &[f64], s: &Structure) -> Result<f64> {
        ndcg_loss(alpha, s.as_scores()?, &self.gain, self.discount)
    }

    fn name(&self) -> String {
        format!("ndcg[{}, {}]", self.gain, self.discount)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrLoss {
    pub gain: GainFunction,
    pub discount: DiscountFunction,
}

impl TargetLoss for ErrLoss {
    fn loss(&self, alpha: &[f64], s: &Structure) -> Result<f64> {
        err_loss(alpha, s.as_scores()?, &self.gain, self.discount)
    }

    fn name(&self) -> String {
        format!("err[{}, {}]", self.gain, self.discount)
    }
}
