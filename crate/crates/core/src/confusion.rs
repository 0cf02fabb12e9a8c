//! Per-label confusion matrices, confusion tensors, and their estimators.
//!
//! A [`BinaryConfusion`] holds the four cells of one label's confusion
//! matrix as probability mass (not counts): the cells sum to one. A
//! [`ConfusionTensor`] stacks one such matrix per label together with the
//! prediction budget `k`; every classifier that always predicts exactly `k`
//! labels per instance yields a tensor whose false-positive plus
//! true-positive mass sums to `k` across labels.
//!
//! Estimators provided here:
//! - [`empirical_confusion`]: average over observed (label, prediction) rows;
//! - [`population_confusion_discrete`]: exact expectation under a discrete
//!   distribution with known per-point marginals, for fractional or k-hot
//!   assignment rows.

use crate::dataset::{LabelMatrix, PredictionMatrix};
use crate::error::{Error, Result};
use crate::oracle::DiscreteDistribution;

/// Tolerance for "these four cells sum to one" checks.
const CELL_SUM_TOL: f64 = 1e-9;

/// Tolerance for "expected positives per instance equal k" checks on
/// fractional assignment rows.
const ROW_BUDGET_TOL: f64 = 1e-6;

/// One label's confusion matrix as probability mass, laid out
/// `(tn, fp; fn, tp)`:
///
/// - `true_neg`  = P(y=0, prediction=0)
/// - `false_pos` = P(y=0, prediction=1)
/// - `false_neg` = P(y=1, prediction=0)
/// - `true_pos`  = P(y=1, prediction=1)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryConfusion {
    pub true_neg: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    pub true_pos: f64,
}

impl BinaryConfusion {
    /// Validated constructor: all cells finite and non-negative, summing to
    /// one within a small tolerance.
    pub fn new(true_neg: f64, false_pos: f64, false_neg: f64, true_pos: f64) -> Result<Self> {
        let c = BinaryConfusion {
            true_neg,
            false_pos,
            false_neg,
            true_pos,
        };
        for v in c.as_array() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "confusion cell {v} is negative or not finite"
                )));
            }
        }
        let sum: f64 = c.as_array().iter().sum();
        if (sum - 1.0).abs() > CELL_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "confusion cells sum to {sum}, expected 1"
            )));
        }
        Ok(c)
    }

    /// Unvalidated constructor for interpolation intermediates and
    /// finite-difference probes, where cells may stray off the simplex.
    pub fn from_raw_unchecked(
        true_neg: f64,
        false_pos: f64,
        false_neg: f64,
        true_pos: f64,
    ) -> Self {
        BinaryConfusion {
            true_neg,
            false_pos,
            false_neg,
            true_pos,
        }
    }

    /// Cells in `(tn, fp, fn, tp)` order.
    pub fn as_array(&self) -> [f64; 4] {
        [self.true_neg, self.false_pos, self.false_neg, self.true_pos]
    }

    /// Inverse of [`Self::as_array`]; performs no validation.
    pub fn from_array([tn, fp, fn_, tp]: [f64; 4]) -> Self {
        BinaryConfusion::from_raw_unchecked(tn, fp, fn_, tp)
    }

    /// Convex combination `(1 - alpha) * self + alpha * other`.
    pub fn mix(&self, other: &BinaryConfusion, alpha: f64) -> BinaryConfusion {
        let a = 1.0 - alpha;
        BinaryConfusion {
            true_neg: a * self.true_neg + alpha * other.true_neg,
            false_pos: a * self.false_pos + alpha * other.false_pos,
            false_neg: a * self.false_neg + alpha * other.false_neg,
            true_pos: a * self.true_pos + alpha * other.true_pos,
        }
    }
}

/// Stack of per-label confusion matrices plus the prediction budget `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTensor {
    per_label: Vec<BinaryConfusion>,
    k: usize,
}

impl ConfusionTensor {
    /// Validated constructor. Checks each matrix; does *not* require the
    /// budget identity, which only holds for tensors produced by exact-k
    /// predictions (see [`Self::verify_budget`]).
    pub fn new(per_label: Vec<BinaryConfusion>, k: usize) -> Result<Self> {
        if per_label.is_empty() {
            return Err(Error::Shape(
                "confusion tensor needs at least one label".into(),
            ));
        }
        if k < 1 || k > per_label.len() {
            return Err(Error::InvalidBudget {
                k,
                m: per_label.len(),
            });
        }
        let per_label = per_label
            .into_iter()
            .map(|c| BinaryConfusion::new(c.true_neg, c.false_pos, c.false_neg, c.true_pos))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConfusionTensor { per_label, k })
    }

    /// Unvalidated constructor for probes and interpolation intermediates.
    pub fn from_raw_unchecked(per_label: Vec<BinaryConfusion>, k: usize) -> Self {
        ConfusionTensor { per_label, k }
    }

    /// Number of labels.
    pub fn m(&self) -> usize {
        self.per_label.len()
    }

    /// Prediction budget this tensor was produced under.
    pub fn budget_k(&self) -> usize {
        self.k
    }

    /// Confusion matrix of label `j`.
    pub fn label(&self, j: usize) -> &BinaryConfusion {
        &self.per_label[j]
    }

    pub fn labels(&self) -> &[BinaryConfusion] {
        &self.per_label
    }

    /// Total predicted-positive mass, `sum_j (fp_j + tp_j)`. Equals `k` for
    /// tensors produced by exact-budget predictions.
    pub fn predicted_positive_mass(&self) -> f64 {
        self.per_label
            .iter()
            .map(|c| c.false_pos + c.true_pos)
            .sum()
    }

    /// Checks the budget identity `sum_j (fp_j + tp_j) = k` within `tol`.
    pub fn verify_budget(&self, tol: f64) -> Result<()> {
        let mass = self.predicted_positive_mass();
        if (mass - self.k as f64).abs() > tol {
            return Err(Error::BudgetViolation(format!(
                "predicted-positive mass {mass} differs from k={} by more than {tol}",
                self.k
            )));
        }
        Ok(())
    }

    /// Convex combination `(1 - alpha) * self + alpha * other`, label-wise.
    pub fn mix(&self, other: &ConfusionTensor, alpha: f64) -> Result<ConfusionTensor> {
        if self.m() != other.m() || self.k != other.k {
            return Err(Error::Shape(
                "cannot mix confusion tensors of different shape or budget".into(),
            ));
        }
        let per_label = self
            .per_label
            .iter()
            .zip(&other.per_label)
            .map(|(a, b)| a.mix(b, alpha))
            .collect();
        Ok(ConfusionTensor {
            per_label,
            k: self.k,
        })
    }

    /// Weighted entrywise average of the per-label matrices, the quantity a
    /// micro-averaged measure is evaluated on. Weights must be non-negative
    /// and sum to one.
    pub fn entrywise_average(&self, weights: &[f64]) -> Result<BinaryConfusion> {
        if weights.len() != self.m() {
            return Err(Error::Shape(format!(
                "{} weights for {} labels",
                weights.len(),
                self.m()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(
                "label weights must be non-negative and sum to 1".into(),
            ));
        }
        let mut acc = [0.0f64; 4];
        for (c, &w) in self.per_label.iter().zip(weights) {
            for (a, v) in acc.iter_mut().zip(c.as_array()) {
                *a += w * v;
            }
        }
        Ok(BinaryConfusion::from_array(acc))
    }
}

/// Gradient of a tensor metric with respect to every confusion cell, in the
/// same `(tn, fp, fn, tp)` layout as [`BinaryConfusion`]. Entry `[j]` holds
/// the four partial derivatives for label `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTensor {
    pub per_label: Vec<[f64; 4]>,
}

impl GainTensor {
    pub fn m(&self) -> usize {
        self.per_label.len()
    }
}

/// Empirical confusion tensor of observed predictions against ground truth,
/// with every instance weighted `1/n`.
///
/// Each prediction row must contain exactly `k` labels; counts are
/// accumulated as integers so the budget identity holds to rounding error.
pub fn empirical_confusion(
    predictions: &PredictionMatrix,
    labels: &LabelMatrix,
    k: usize,
) -> Result<ConfusionTensor> {
    let n = predictions.n();
    let m = predictions.m();
    if n == 0 {
        return Err(Error::Shape(
            "no instances to estimate confusion from".into(),
        ));
    }
    if labels.n() != n || labels.m() != m {
        return Err(Error::Shape(format!(
            "predictions are {n}x{m} but labels are {}x{}",
            labels.n(),
            labels.m()
        )));
    }
    if k < 1 || k > m {
        return Err(Error::InvalidBudget { k, m });
    }

    let mut tp = vec![0u64; m];
    let mut fp = vec![0u64; m];
    let mut fn_ = vec![0u64; m];
    for i in 0..n {
        let pred = predictions.row(i);
        if pred.len() != k {
            return Err(Error::BudgetViolation(format!(
                "prediction row {i} has {} labels, budget is {k}",
                pred.len()
            )));
        }
        // Sorted-merge walk over (truth, prediction) index lists.
        let truth = labels.row(i);
        let (mut a, mut b) = (0usize, 0usize);
        while a < truth.len() && b < pred.len() {
            match truth[a].cmp(&pred[b]) {
                std::cmp::Ordering::Equal => {
                    tp[truth[a] as usize] += 1;
                    a += 1;
                    b += 1;
                }
                std::cmp::Ordering::Less => {
                    fn_[truth[a] as usize] += 1;
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    fp[pred[b] as usize] += 1;
                    b += 1;
                }
            }
        }
        for &j in &truth[a..] {
            fn_[j as usize] += 1;
        }
        for &j in &pred[b..] {
            fp[j as usize] += 1;
        }
    }

    let nf = n as f64;
    let per_label = (0..m)
        .map(|j| {
            let tn = n as u64 - tp[j] - fp[j] - fn_[j];
            BinaryConfusion::from_raw_unchecked(
                tn as f64 / nf,
                fp[j] as f64 / nf,
                fn_[j] as f64 / nf,
                tp[j] as f64 / nf,
            )
        })
        .collect();
    Ok(ConfusionTensor { per_label, k })
}

/// Exact population confusion tensor of an assignment under a discrete
/// distribution.
///
/// `rows[p]` is the (possibly fractional) prediction vector for the `p`-th
/// support point: entries in `[0, 1]` summing to `k`. The distribution's
/// marginals give each point's true label probabilities.
pub fn population_confusion_discrete(
    rows: &[Vec<f64>],
    dist: &DiscreteDistribution,
    k: usize,
) -> Result<ConfusionTensor> {
    let m = dist.m();
    if rows.len() != dist.len() {
        return Err(Error::Shape(format!(
            "{} assignment rows for {} support points",
            rows.len(),
            dist.len()
        )));
    }
    if k < 1 || k > m {
        return Err(Error::InvalidBudget { k, m });
    }
    let mut acc = vec![[0.0f64; 4]; m];
    for (p, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Shape(format!(
                "assignment row {p} has length {}, expected {m}",
                row.len()
            )));
        }
        let mut row_sum = 0.0;
        for &h in row {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::InvalidInput(format!(
                    "assignment entry {h} outside [0, 1]"
                )));
            }
            row_sum += h;
        }
        if (row_sum - k as f64).abs() > ROW_BUDGET_TOL {
            return Err(Error::BudgetViolation(format!(
                "assignment row {p} sums to {row_sum}, budget is {k}"
            )));
        }
        let w = dist.weight(p);
        let eta = dist.marginals(p);
        for j in 0..m {
            let (e, h) = (eta[j], row[j]);
            acc[j][0] += w * (1.0 - e) * (1.0 - h);
            acc[j][1] += w * (1.0 - e) * h;
            acc[j][2] += w * e * (1.0 - h);
            acc[j][3] += w * e * h;
        }
    }
    Ok(ConfusionTensor {
        per_label: acc.into_iter().map(BinaryConfusion::from_array).collect(),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter() -> BinaryConfusion {
        BinaryConfusion::new(0.25, 0.25, 0.25, 0.25).unwrap()
    }

    #[test]
    fn binary_confusion_validates() {
        assert!(BinaryConfusion::new(0.5, 0.5, 0.0, 0.0).is_ok());
        assert!(BinaryConfusion::new(0.5, 0.6, 0.0, 0.0).is_err());
        assert!(BinaryConfusion::new(-0.1, 0.6, 0.25, 0.25).is_err());
        assert!(BinaryConfusion::new(f64::NAN, 0.5, 0.25, 0.25).is_err());
    }

    #[test]
    fn tensor_budget_identity() {
        let t = ConfusionTensor::new(
            vec![
                BinaryConfusion::new(0.4, 0.1, 0.1, 0.4).unwrap(),
                BinaryConfusion::new(0.3, 0.4, 0.2, 0.1).unwrap(),
            ],
            1,
        )
        .unwrap();
        assert!((t.predicted_positive_mass() - 1.0).abs() < 1e-12);
        t.verify_budget(1e-6).unwrap();
        let off = ConfusionTensor::new(vec![quarter(), quarter()], 2).unwrap();
        assert!(off.verify_budget(1e-6).is_err()); // mass 1, k = 2
    }

    #[test]
    fn mixing_is_entrywise() {
        let a = ConfusionTensor::new(vec![BinaryConfusion::new(1.0, 0.0, 0.0, 0.0).unwrap()], 1)
            .unwrap();
        let b = ConfusionTensor::new(vec![BinaryConfusion::new(0.0, 0.0, 0.0, 1.0).unwrap()], 1)
            .unwrap();
        let mixed = a.mix(&b, 0.25).unwrap();
        assert!((mixed.label(0).true_neg - 0.75).abs() < 1e-15);
        assert!((mixed.label(0).true_pos - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empirical_confusion_small_cases() {
        // Two instances, two labels, k = 1.
        // Instance 0 has both labels, predicted {0}; instance 1 has none,
        // predicted {1}.
        let labels = LabelMatrix::from_rows(2, vec![vec![0, 1], vec![]]).unwrap();
        let preds = PredictionMatrix::from_rows(2, vec![vec![0], vec![1]]).unwrap();
        let t = empirical_confusion(&preds, &labels, 1).unwrap();
        assert_eq!(t.label(0).as_array(), [0.5, 0.0, 0.0, 0.5]);
        assert_eq!(t.label(1).as_array(), [0.0, 0.5, 0.5, 0.0]);
        t.verify_budget(0.0).unwrap();

        // Single instance, perfect hit.
        let labels = LabelMatrix::from_rows(1, vec![vec![0]]).unwrap();
        let preds = PredictionMatrix::from_rows(1, vec![vec![0]]).unwrap();
        let t = empirical_confusion(&preds, &labels, 1).unwrap();
        assert_eq!(t.label(0).as_array(), [0.0, 0.0, 0.0, 1.0]);

        // Complete miss over three labels, k = 2.
        let labels = LabelMatrix::from_rows(3, vec![vec![2]]).unwrap();
        let preds = PredictionMatrix::from_rows(3, vec![vec![0, 1]]).unwrap();
        let t = empirical_confusion(&preds, &labels, 2).unwrap();
        assert_eq!(t.label(0).as_array(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.label(1).as_array(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.label(2).as_array(), [0.0, 0.0, 1.0, 0.0]);
        t.verify_budget(0.0).unwrap();
    }

    #[test]
    fn empirical_confusion_rejects_budget_violations() {
        let labels = LabelMatrix::from_rows(3, vec![vec![0]]).unwrap();
        let preds = PredictionMatrix::from_rows(3, vec![vec![0, 1]]).unwrap();
        assert!(matches!(
            empirical_confusion(&preds, &labels, 1),
            Err(Error::BudgetViolation(_))
        ));
    }

    #[test]
    fn population_confusion_two_point_example() {
        // Uniform two-point distribution over one label with marginals 0.8
        // and 0.4; always predict the label.
        let dist = DiscreteDistribution::new(vec![0.5, 0.5], vec![vec![0.8], vec![0.4]]).unwrap();
        let rows = vec![vec![1.0], vec![1.0]];
        let t = population_confusion_discrete(&rows, &dist, 1).unwrap();
        // tp = 0.5*0.8 + 0.5*0.4 = 0.6, fp = 0.4, no negatives predicted.
        assert!((t.label(0).true_pos - 0.6).abs() < 1e-15);
        assert!((t.label(0).false_pos - 0.4).abs() < 1e-15);
        assert_eq!(t.label(0).false_neg, 0.0);
        assert_eq!(t.label(0).true_neg, 0.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // explicit indices mirror the formula
    fn population_confusion_matches_naive_accumulation() {
        // Independent re-derivation: loop over points and cells directly.
        let dist = DiscreteDistribution::new(
            vec![0.2, 0.5, 0.3],
            vec![
                vec![0.1, 0.9, 0.5],
                vec![0.6, 0.2, 0.8],
                vec![0.3, 0.3, 0.4],
            ],
        )
        .unwrap();
        let rows = vec![
            vec![1.0, 0.5, 0.5],
            vec![0.0, 1.0, 1.0],
            vec![0.25, 0.75, 1.0],
        ];
        let t = population_confusion_discrete(&rows, &dist, 2).unwrap();
        for j in 0..3 {
            let mut want = [0.0f64; 4];
            for p in 0..3 {
                let w = dist.weight(p);
                let e = dist.marginals(p)[j];
                let h = rows[p][j];
                want[0] += w * (1.0 - e) * (1.0 - h);
                want[1] += w * (1.0 - e) * h;
                want[2] += w * e * (1.0 - h);
                want[3] += w * e * h;
            }
            let got = t.label(j).as_array();
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-15);
            }
        }
        t.verify_budget(1e-9).unwrap();
    }

    #[test]
    fn population_confusion_rejects_off_budget_rows() {
        let dist = DiscreteDistribution::new(vec![1.0], vec![vec![0.5, 0.5]]).unwrap();
        let rows = vec![vec![0.6, 0.6]];
        assert!(matches!(
            population_confusion_discrete(&rows, &dist, 1),
            Err(Error::BudgetViolation(_))
        ));
    }

    #[test]
    fn entrywise_average_weights_must_normalize() {
        let t = ConfusionTensor::new(vec![quarter(), quarter()], 1).unwrap();
        assert!(t.entrywise_average(&[0.5, 0.5]).is_ok());
        assert!(t.entrywise_average(&[0.7, 0.5]).is_err());
        assert!(t.entrywise_average(&[1.5, -0.5]).is_err());
    }
}
