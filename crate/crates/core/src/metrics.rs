//! Confusion-matrix performance measures, their gradients, and aggregations.
//!
//! A *binary measure* maps one label's confusion matrix `(tn, fp; fn, tp)`
//! to a value in `[0, 1]`. Macro-averaging applies the measure per label and
//! takes the mean; micro-averaging applies it once to a weighted entrywise
//! average of the label matrices. Two tensor-level utilities that are not
//! binary measures are also provided: instance precision at budget `k`
//! (`sum_j tp_j / k`, linear in the tensor) and a mixed utility that blends
//! instance precision with a macro measure.
//!
//! Denominators are smoothed: every denominator factor gets `+eps`
//! (default `1e-9`), and values are clamped to `[0, 1]` afterwards.
//! Gradients differentiate the *smoothed* formulas, so they match finite
//! differences of the reported values.

use crate::confusion::{BinaryConfusion, ConfusionTensor, GainTensor};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Additive smoothing applied to every denominator factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    eps: f64,
}

impl SmoothingConfig {
    /// No smoothing at all; exact formulas.
    pub const NONE: SmoothingConfig = SmoothingConfig { eps: 0.0 };

    pub fn new(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidInput(format!(
                "smoothing eps {eps} must be finite and non-negative"
            )));
        }
        Ok(SmoothingConfig { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { eps: 1e-9 }
    }
}

/// Identifies a performance measure.
///
/// The eight plain variants are binary confusion-matrix measures (usable per
/// label, macro- or micro-averaged). [`MetricId::InstancePrecision`] and
/// [`MetricId::Mixed`] are tensor-level utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetricId {
    Accuracy,
    Precision,
    Recall,
    BalancedAccuracy,
    /// F-measure with positive parameter beta; `FBeta(1.0)` is F1.
    FBeta(f64),
    GMean,
    Jaccard,
    Auc,
    /// Instance precision at budget k: `sum_j tp_j / k`.
    InstancePrecision,
    /// `(1 - lambda) * instance precision + lambda * macro(inner)`.
    Mixed {
        lambda: f64,
        inner: Box<MetricId>,
    },
}

impl MetricId {
    /// F1 convenience constructor.
    pub fn f1() -> Self {
        MetricId::FBeta(1.0)
    }

    /// Whether this metric is a plain binary confusion-matrix measure.
    pub fn is_binary_measure(&self) -> bool {
        !matches!(self, MetricId::InstancePrecision | MetricId::Mixed { .. })
    }

    /// Validates parameters: beta positive, lambda in `[0, 1]`, and mixed
    /// inner metrics restricted to binary measures.
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricId::FBeta(beta) => {
                if !beta.is_finite() || *beta <= 0.0 {
                    return Err(Error::Unsupported(format!(
                        "fbeta parameter {beta} must be positive"
                    )));
                }
            }
            MetricId::Mixed { lambda, inner } => {
                if !lambda.is_finite() || !(0.0..=1.0).contains(lambda) {
                    return Err(Error::Unsupported(format!(
                        "mixed lambda {lambda} must lie in [0, 1]"
                    )));
                }
                if !inner.is_binary_measure() {
                    return Err(Error::Unsupported(format!(
                        "mixed inner metric {inner} must be a binary measure"
                    )));
                }
                inner.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricId::Accuracy => write!(f, "accuracy"),
            MetricId::Precision => write!(f, "precision"),
            MetricId::Recall => write!(f, "recall"),
            MetricId::BalancedAccuracy => write!(f, "bacc"),
            MetricId::FBeta(beta) if *beta == 1.0 => write!(f, "f1"),
            MetricId::FBeta(beta) => write!(f, "fbeta:{beta}"),
            MetricId::GMean => write!(f, "gmean"),
            MetricId::Jaccard => write!(f, "jaccard"),
            MetricId::Auc => write!(f, "auc"),
            MetricId::InstancePrecision => write!(f, "instp"),
            MetricId::Mixed { lambda, inner } => write!(f, "mixed:{lambda}:{inner}"),
        }
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s {
            "accuracy" => MetricId::Accuracy,
            "precision" => MetricId::Precision,
            "recall" => MetricId::Recall,
            "bacc" => MetricId::BalancedAccuracy,
            "f1" => MetricId::f1(),
            "gmean" => MetricId::GMean,
            "jaccard" => MetricId::Jaccard,
            "auc" => MetricId::Auc,
            "instp" => MetricId::InstancePrecision,
            other => {
                if let Some(beta) = other.strip_prefix("fbeta:") {
                    let beta: f64 = beta
                        .parse()
                        .map_err(|_| Error::Unsupported(format!("bad fbeta parameter in {s:?}")))?;
                    MetricId::FBeta(beta)
                } else if let Some(rest) = other.strip_prefix("mixed:") {
                    let (lambda, inner) = rest.split_once(':').ok_or_else(|| {
                        Error::Unsupported(format!(
                            "mixed metric {s:?} needs mixed:<lambda>:<inner>"
                        ))
                    })?;
                    let lambda: f64 = lambda
                        .parse()
                        .map_err(|_| Error::Unsupported(format!("bad mixed lambda in {s:?}")))?;
                    MetricId::Mixed {
                        lambda,
                        inner: Box::new(inner.parse()?),
                    }
                } else {
                    return Err(Error::Unsupported(s.to_string()));
                }
            }
        };
        id.validate()?;
        Ok(id)
    }
}

/// Guards a square-root denominator so gradients at the boundary stay
/// finite (the true derivative is unbounded there). Only active when the
/// tp*tn product is below ~2.5e-19, far outside the interior regime where
/// gradients are compared against finite differences.
const SQRT_FLOOR: f64 = 1e-9;

/// Value of a binary measure on one confusion matrix, smoothed and clamped
/// to `[0, 1]`. Errors for metrics that are not binary measures.
pub fn binary_value(id: &MetricId, c: &BinaryConfusion, s: &SmoothingConfig) -> Result<f64> {
    let eps = s.eps;
    let (tn, fp, fn_, tp) = (c.true_neg, c.false_pos, c.false_neg, c.true_pos);
    let raw = match id {
        MetricId::Accuracy => tn + tp,
        MetricId::Precision => tp / (tp + fp + eps),
        MetricId::Recall => tp / (tp + fn_ + eps),
        MetricId::BalancedAccuracy => tp / (2.0 * (tp + fn_ + eps)) + tn / (2.0 * (tn + fp + eps)),
        MetricId::FBeta(beta) => {
            let b2 = beta * beta;
            (1.0 + b2) * tp / ((1.0 + b2) * tp + b2 * fn_ + fp + eps)
        }
        MetricId::GMean => {
            let g = tp * tn / ((tp + fn_ + eps) * (tn + fp + eps));
            g.max(0.0).sqrt()
        }
        MetricId::Jaccard => tp / (tp + fp + fn_ + eps),
        MetricId::Auc => {
            let num = 2.0 * tp * tn + tp * fp + fn_ * tn;
            num / (2.0 * (tp + fn_ + eps) * (fp + tn + eps))
        }
        MetricId::InstancePrecision | MetricId::Mixed { .. } => {
            return Err(Error::NotABinaryMeasure(id.to_string()))
        }
    };
    Ok(raw.clamp(0.0, 1.0))
}

/// Gradient of a smoothed binary measure with respect to the four cells, in
/// `(tn, fp, fn, tp)` order. Matches finite differences of
/// [`binary_value`] away from the clamp boundary.
pub fn binary_gradient(
    id: &MetricId,
    c: &BinaryConfusion,
    s: &SmoothingConfig,
) -> Result<[f64; 4]> {
    let eps = s.eps;
    let (tn, fp, fn_, tp) = (c.true_neg, c.false_pos, c.false_neg, c.true_pos);
    let grad = match id {
        MetricId::Accuracy => [1.0, 0.0, 0.0, 1.0],
        MetricId::Precision => {
            let d = tp + fp + eps;
            let d2 = d * d;
            [0.0, -tp / d2, 0.0, (fp + eps) / d2]
        }
        MetricId::Recall => {
            let d = tp + fn_ + eps;
            let d2 = d * d;
            [0.0, 0.0, -tp / d2, (fn_ + eps) / d2]
        }
        MetricId::BalancedAccuracy => {
            let p = tp + fn_ + eps;
            let q = tn + fp + eps;
            let (p2, q2) = (2.0 * p * p, 2.0 * q * q);
            [(fp + eps) / q2, -tn / q2, -tp / p2, (fn_ + eps) / p2]
        }
        MetricId::FBeta(beta) => {
            let b2 = beta * beta;
            let c1 = 1.0 + b2;
            let num = c1 * tp;
            let d = c1 * tp + b2 * fn_ + fp + eps;
            let d2 = d * d;
            [
                0.0,
                -num / d2,
                -num * b2 / d2,
                c1 * (b2 * fn_ + fp + eps) / d2,
            ]
        }
        MetricId::GMean => {
            let p = tp + fn_ + eps;
            let q = tn + fp + eps;
            let g = (tp * tn / (p * q)).max(0.0);
            let denom = (2.0 * g.sqrt()).max(SQRT_FLOOR);
            let dtp = tn * (fn_ + eps) / (p * p * q);
            let dfn = -tp * tn / (p * p * q);
            let dtn = tp * (fp + eps) / (p * q * q);
            let dfp = -tp * tn / (p * q * q);
            [dtn / denom, dfp / denom, dfn / denom, dtp / denom]
        }
        MetricId::Jaccard => {
            let d = tp + fp + fn_ + eps;
            let d2 = d * d;
            [0.0, -tp / d2, -tp / d2, (fp + fn_ + eps) / d2]
        }
        MetricId::Auc => {
            let p = tp + fn_ + eps;
            let q = fp + tn + eps;
            let num = 2.0 * tp * tn + tp * fp + fn_ * tn;
            let den = 2.0 * p * q;
            let den2 = den * den;
            // Numerator and denominator partials in (tn, fp, fn, tp) order.
            let dn = [2.0 * tp + fn_, tp, tn, 2.0 * tn + fp];
            let dd = [2.0 * p, 2.0 * p, 2.0 * q, 2.0 * q];
            let mut out = [0.0; 4];
            for i in 0..4 {
                out[i] = (dn[i] * den - num * dd[i]) / den2;
            }
            out
        }
        MetricId::InstancePrecision | MetricId::Mixed { .. } => {
            return Err(Error::NotABinaryMeasure(id.to_string()))
        }
    };
    Ok(grad)
}

/// Value of a metric on a full confusion tensor: mean of the per-label
/// values for binary measures, `sum_j tp_j / k` for instance precision, and
/// the convex blend for mixed utilities.
pub fn macro_value(id: &MetricId, t: &ConfusionTensor, s: &SmoothingConfig) -> Result<f64> {
    match id {
        MetricId::InstancePrecision => {
            let tp_sum: f64 = t.labels().iter().map(|c| c.true_pos).sum();
            Ok(tp_sum / t.budget_k() as f64)
        }
        MetricId::Mixed { lambda, inner } => {
            let inst = macro_value(&MetricId::InstancePrecision, t, s)?;
            let inner_val = macro_value(inner, t, s)?;
            Ok((1.0 - lambda) * inst + lambda * inner_val)
        }
        _ => {
            let mut sum = 0.0;
            for c in t.labels() {
                sum += binary_value(id, c, s)?;
            }
            Ok(sum / t.m() as f64)
        }
    }
}

/// Gradient of [`macro_value`] with respect to every confusion cell.
pub fn macro_gradient(
    id: &MetricId,
    t: &ConfusionTensor,
    s: &SmoothingConfig,
) -> Result<GainTensor> {
    let m = t.m();
    match id {
        MetricId::InstancePrecision => {
            let g = 1.0 / t.budget_k() as f64;
            Ok(GainTensor {
                per_label: vec![[0.0, 0.0, 0.0, g]; m],
            })
        }
        MetricId::Mixed { lambda, inner } => {
            let inst = macro_gradient(&MetricId::InstancePrecision, t, s)?;
            let inner_g = macro_gradient(inner, t, s)?;
            let per_label = inst
                .per_label
                .iter()
                .zip(&inner_g.per_label)
                .map(|(gi, gm)| {
                    let mut out = [0.0; 4];
                    for i in 0..4 {
                        out[i] = (1.0 - lambda) * gi[i] + lambda * gm[i];
                    }
                    out
                })
                .collect();
            Ok(GainTensor { per_label })
        }
        _ => {
            let inv_m = 1.0 / m as f64;
            let per_label = t
                .labels()
                .iter()
                .map(|c| {
                    binary_gradient(id, c, s)
                        .map(|g| [g[0] * inv_m, g[1] * inv_m, g[2] * inv_m, g[3] * inv_m])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GainTensor { per_label })
        }
    }
}

/// Micro-averaged value: the binary measure applied to the weighted
/// entrywise average of the per-label matrices. Only defined for binary
/// measures.
pub fn micro_value(
    id: &MetricId,
    t: &ConfusionTensor,
    weights: &[f64],
    s: &SmoothingConfig,
) -> Result<f64> {
    if !id.is_binary_measure() {
        return Err(Error::NotABinaryMeasure(id.to_string()));
    }
    let avg = t.entrywise_average(weights)?;
    binary_value(id, &avg, s)
}

/// Tolerance for reconstructing the mass moves that witness the confusion
/// partial order.
const ORDER_TOL: f64 = 1e-9;

/// Decides whether `c1` dominates `c2` in the confusion partial order:
/// `c1` is reachable from `c2` by moving false-positive mass to
/// true-negative and false-negative mass to true-positive (both by
/// non-negative amounts, preserving the row sums).
pub fn is_at_least_as_good(c1: &BinaryConfusion, c2: &BinaryConfusion) -> bool {
    let neg_row_preserved =
        ((c1.true_neg + c1.false_pos) - (c2.true_neg + c2.false_pos)).abs() <= ORDER_TOL;
    let pos_row_preserved =
        ((c1.false_neg + c1.true_pos) - (c2.false_neg + c2.true_pos)).abs() <= ORDER_TOL;
    neg_row_preserved
        && pos_row_preserved
        && c1.true_neg >= c2.true_neg - ORDER_TOL
        && c1.true_pos >= c2.true_pos - ORDER_TOL
}

/// Tensor version of [`is_at_least_as_good`]: label-wise domination.
pub fn tensor_at_least_as_good(t1: &ConfusionTensor, t2: &ConfusionTensor) -> Result<bool> {
    if t1.m() != t2.m() {
        return Err(Error::Shape(format!(
            "tensors have {} and {} labels",
            t1.m(),
            t2.m()
        )));
    }
    Ok(t1
        .labels()
        .iter()
        .zip(t2.labels())
        .all(|(a, b)| is_at_least_as_good(a, b)))
}
