use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Convex, nonincreasing margin function `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvexPhi {
    /// `max(1 - t, 0)`.
    Hinge,
    /// `ln(1 + e^{-t})`.
    Logistic,
    /// `e^{-t}`.
    Exponential,
    /// `max(1 - t, 0)^2`.
    SquaredHinge,
}

impl ConvexPhi {
    pub const ALL: [ConvexPhi; 4] =
        [ConvexPhi::Hinge, ConvexPhi::Logistic, ConvexPhi::Exponential, ConvexPhi::SquaredHinge];

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ConvexPhi::Hinge => (1.0 - t).max(0.0),
            ConvexPhi::Logistic => softplus(-t),
            ConvexPhi::Exponential => (-t).exp(),
            ConvexPhi::SquaredHinge => (1.0 - t).max(0.0).powi(2),
        }
    }

    /// Derivative, or the right-continuous subgradient at kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            ConvexPhi::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ConvexPhi::Logistic => -sigmoid(-t),
            ConvexPhi::Exponential => -(-t).exp(),
            ConvexPhi::SquaredHinge => -2.0 * (1.0 - t).max(0.0),
        }
    }

    /// Second derivative where it exists (0 at the hinge kink).
    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            ConvexPhi::Hinge => 0.0,
            ConvexPhi::Logistic => {
                let p = sigmoid(t);
                p * (1.0 - p)
            }
            ConvexPhi::Exponential => (-t).exp(),
            ConvexPhi::SquaredHinge => {
                if t < 1.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, ConvexPhi::Hinge)
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, ConvexPhi::Hinge)
    }

    /// Whether `phi` never reaches its infimum at a finite point, so pairs
    /// weighted in one direction only push scores apart without bound.
    pub fn infimum_at_infinity(&self) -> bool {
        matches!(self, ConvexPhi::Logistic | ConvexPhi::Exponential)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvexPhi::Hinge => "hinge",
            ConvexPhi::Logistic => "logistic",
            ConvexPhi::Exponential => "exponential",
            ConvexPhi::SquaredHinge => "squared-hinge",
        }
    }
}

impl fmt::Display for ConvexPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvexPhi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConvexPhi::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown phi '{s}' (expected hinge, logistic, exponential, squared-hinge)")))
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
