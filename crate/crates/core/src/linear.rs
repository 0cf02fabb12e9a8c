//! Closed-form affine rules for linear tensor metrics.
//!
//! For a metric that is linear in the confusion tensor with gain matrix
//! `G^j` per label, the optimal exact-budget classifier scores label `j` as
//! `a_j * eta_j + b_j` with
//!
//! ```text
//! a_j = G00 + G11 - G01 - G10      b_j = G01 - G00
//! ```
//!
//! and predicts the top k. [`gains_to_affine`] performs exactly that
//! reduction; [`closed_form_strategy`] instantiates the well-known special
//! cases (plain top-k, prior-weighted recall, balanced accuracy, power-law
//! and log prior weighting) from a vector of label priors.

use crate::classifier::AffineTopK;
use crate::confusion::GainTensor;
use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Per-label prior probabilities, all strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector {
    p: Vec<f64>,
}

impl PriorVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("prior vector is empty".into()));
        }
        for &v in &p {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "prior {v} must lie strictly inside (0, 1)"
                )));
            }
        }
        Ok(PriorVector { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// Named closed-form strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyId {
    /// Rank by raw probability: optimal for instance precision and accuracy.
    TopK,
    /// Slope `1/p_j`: optimal for macro recall.
    MacroRecall,
    /// Slope `1/(2 p_j) + 1/(2 (1-p_j))`, offset `-1/(2 (1-p_j))`: optimal
    /// for macro balanced accuracy.
    BalancedAccuracy,
    /// Slope `p_j^(-beta)`: interpolates between top-k (beta = 0) and macro
    /// recall (beta = 1).
    PowerLaw(f64),
    /// Slope `-ln(p_j)`.
    LogWeight,
}

impl StrategyId {
    pub fn validate(&self) -> Result<()> {
        if let StrategyId::PowerLaw(beta) = self {
            if !beta.is_finite() || *beta < 0.0 {
                return Err(Error::Unsupported(format!(
                    "power-law exponent {beta} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyId::TopK => write!(f, "topk"),
            StrategyId::MacroRecall => write!(f, "macro-recall"),
            StrategyId::BalancedAccuracy => write!(f, "bacc"),
            StrategyId::PowerLaw(beta) => write!(f, "pow:{beta}"),
            StrategyId::LogWeight => write!(f, "log"),
        }
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s {
            "topk" => StrategyId::TopK,
            "macro-recall" => StrategyId::MacroRecall,
            "bacc" => StrategyId::BalancedAccuracy,
            "log" => StrategyId::LogWeight,
            other => {
                if let Some(beta) = other.strip_prefix("pow:") {
                    let beta: f64 = beta.parse().map_err(|_| {
                        Error::Unsupported(format!("bad power-law exponent in {s:?}"))
                    })?;
                    StrategyId::PowerLaw(beta)
                } else {
                    return Err(Error::Unsupported(s.to_string()));
                }
            }
        };
        id.validate()?;
        Ok(id)
    }
}

/// Reduces a gain tensor (the gradient of a linear tensor metric) to the
/// optimal affine top-k rule.
pub fn gains_to_affine(gains: &GainTensor, k: usize) -> Result<AffineTopK> {
    let m = gains.m();
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for g in &gains.per_label {
        // Layout (tn, fp, fn, tp).
        a.push(g[0] + g[3] - g[1] - g[2]);
        b.push(g[1] - g[0]);
    }
    AffineTopK::new(a, b, k)
}

/// Instantiates a named closed-form strategy from label priors.
pub fn closed_form_strategy(
    strategy: &StrategyId,
    priors: &PriorVector,
    k: usize,
) -> Result<AffineTopK> {
    strategy.validate()?;
    let m = priors.len();
    let p = priors.as_slice();
    let (a, b): (Vec<f64>, Vec<f64>) = match strategy {
        StrategyId::TopK => (vec![1.0; m], vec![0.0; m]),
        StrategyId::MacroRecall => (p.iter().map(|&pj| 1.0 / pj).collect(), vec![0.0; m]),
        StrategyId::BalancedAccuracy => {
            let a = p
                .iter()
                .map(|&pj| 1.0 / (2.0 * pj) + 1.0 / (2.0 * (1.0 - pj)))
                .collect();
            let b = p.iter().map(|&pj| -1.0 / (2.0 * (1.0 - pj))).collect();
            (a, b)
        }
        StrategyId::PowerLaw(beta) => (p.iter().map(|&pj| pj.powf(-beta)).collect(), vec![0.0; m]),
        StrategyId::LogWeight => (p.iter().map(|&pj| -pj.ln()).collect(), vec![0.0; m]),
    };
    AffineTopK::new(a, b, k)
}

/// Estimates label priors from counts with additive smoothing:
/// `p_j = (count_j + add) / (n + 2 * add)`.
///
/// With `add_count = 0` the estimate is the raw frequency, which is only
/// valid when every label occurs at least once and never always.
pub fn estimate_priors(labels: &LabelMatrix, add_count: f64) -> Result<PriorVector> {
    if !add_count.is_finite() || add_count < 0.0 {
        return Err(Error::InvalidInput(format!(
            "additive smoothing count {add_count} must be finite and non-negative"
        )));
    }
    let n = labels.n();
    if n == 0 {
        return Err(Error::InvalidInput(
            "cannot estimate priors from zero instances".into(),
        ));
    }
    let denom = n as f64 + 2.0 * add_count;
    let p = labels
        .label_counts()
        .into_iter()
        .map(|c| (c as f64 + add_count) / denom)
        .collect();
    PriorVector::new(p).map_err(|_| {
        Error::InvalidInput(
            "estimated priors hit 0 or 1; use a positive additive smoothing count".into(),
        )
    })
}
