use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Gain map `G` applied to structure scores.
#[derive(Debug, Clone, PartialEq)]
pub enum GainFunction {
    /// `2^s - 1`, the usual NDCG gain for nonnegative relevance levels.
    Exp2MinusOne,
    /// `2^s`; positive for every real `s`, so it suits centered scores.
    Exp2,
    Identity,
    /// `min(1, max(0, s))`.
    Clamped01,
    /// `(2^s - 1) / 2^max_level` clamped into `[0, 1]`, the ERR gain for
    /// graded relevance.
    ErrExp {
        max_level: f64,
    },
    /// Gain looked up by integer relevance level.
    Table(Vec<f64>),
}

impl GainFunction {
    pub fn value(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite("structure score"));
        }
        let g = match self {
            GainFunction::Exp2MinusOne => s.exp2() - 1.0,
            GainFunction::Exp2 => s.exp2(),
            GainFunction::Identity => s,
            GainFunction::Clamped01 => s.clamp(0.0, 1.0),
            GainFunction::ErrExp { max_level } => ((s.exp2() - 1.0) / max_level.exp2()).clamp(0.0, 1.0),
            GainFunction::Table(table) => {
                if s < 0.0 || s.fract() != 0.0 || s as usize >= table.len() {
                    return Err(invalid(format!("score {s} has no entry in the gain table")));
                }
                table[s as usize]
            }
        };
        if !g.is_finite() {
            return Err(Error::NonFinite("gain"));
        }
        Ok(g)
    }

    pub fn values(&self, scores: &[f64]) -> Result<Vec<f64>> {
        scores.iter().map(|&s| self.value(s)).collect()
    }
}

impl fmt::Display for GainFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainFunction::Exp2MinusOne => write!(f, "exp2minus1"),
            GainFunction::Exp2 => write!(f, "exp2"),
            GainFunction::Identity => write!(f, "identity"),
            GainFunction::Clamped01 => write!(f, "clamped01"),
            GainFunction::ErrExp { max_level } => write!(f, "errexp:{max_level}"),
            GainFunction::Table(t) => write!(f, "table:{t:?}"),
        }
    }
}

impl FromStr for GainFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp2minus1" => Ok(GainFunction::Exp2MinusOne),
            "exp2" => Ok(GainFunction::Exp2),
            "identity" => Ok(GainFunction::Identity),
            "clamped01" => Ok(GainFunction::Clamped01),
            other => Err(invalid(format!("unknown gain '{other}' (expected exp2minus1, exp2, identity, clamped01)"))),
        }
    }
}

/// Rank discount `F`; losses use the weight `1 / F(rank)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscountFunction {
    /// `ln(1 + j)`.
    Log1p,
    /// `j`.
    Identity,
    /// `1` for `j <= k`, `+inf` beyond.
    PrecisionAt(usize),
}

impl DiscountFunction {
    /// `F(rank)` for a 1-based rank.
    pub fn value(&self, rank: usize) -> f64 {
        match *self {
            DiscountFunction::Log1p => (rank as f64).ln_1p(),
            DiscountFunction::Identity => rank as f64,
            DiscountFunction::PrecisionAt(k) => {
                if rank <= k {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `1 / F(rank)`, exactly 0 where `F` is infinite.
    pub fn weight(&self, rank: usize) -> f64 {
        match *self {
            DiscountFunction::PrecisionAt(k) => {
                if rank <= k {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 1.0 / self.value(rank),
        }
    }
}

impl fmt::Display for DiscountFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscountFunction::Log1p => write!(f, "log1p"),
            DiscountFunction::Identity => write!(f, "identity"),
            DiscountFunction::PrecisionAt(k) => write!(f, "precision@{k}"),
        }
    }
}

impl FromStr for DiscountFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log1p" => Ok(DiscountFunction::Log1p),
            "identity" => Ok(DiscountFunction::Identity),
            other => match other.strip_prefix("precision@").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(DiscountFunction::PrecisionAt(k)),
                _ => Err(invalid(format!("unknown discount '{other}' (expected log1p, identity, precision@<k>)"))),
            },
        }
    }
}
