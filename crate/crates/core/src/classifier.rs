//! Affine top-k classifiers and randomized mixtures of them.
//!
//! An [`AffineTopK`] scores label `j` as `a[j] * eta[j] + b[j]` for an
//! estimated marginal vector `eta` and switches on the `k` best labels.
//! Sparse marginal rows are supported directly: a label absent from the row
//! has `eta[j] = 0`, so its score is `b[j]`, and the per-row work stays
//! proportional to the stored entries rather than to the label count.
//!
//! A [`RandomizedClassifier`] is a finite mixture of affine rules. It can be
//! realized per instance by sampling one component, or summarized as a
//! fractional prediction row (the mixture's per-label inclusion
//! probabilities), which pairs with systematic sampling in
//! [`crate::madow`].

use crate::confusion::{empirical_confusion, BinaryConfusion, ConfusionTensor};
use crate::dataset::{KHot, LabelMatrix, MarginalMatrix, PredictionMatrix};
use crate::error::{Error, Result};
use crate::topk::topk_pairs;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Deterministic rule: predict the top `k` labels by score
/// `a[j] * eta[j] + b[j]`, ties to the smaller index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTopK {
    a: Vec<f64>,
    b: Vec<f64>,
    k: usize,
}

impl AffineTopK {
    pub fn new(a: Vec<f64>, b: Vec<f64>, k: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!(
                "coefficient vectors disagree: a has {}, b has {}",
                a.len(),
                b.len()
            )));
        }
        let m = a.len();
        if k < 1 || k > m {
            return Err(Error::InvalidBudget { k, m });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "classifier coefficients must be finite".into(),
            ));
        }
        Ok(AffineTopK { a, b, k })
    }

    /// The plain budget-k rule: unit slope, zero offset.
    pub fn plain_topk(m: usize, k: usize) -> Result<Self> {
        AffineTopK::new(vec![1.0; m], vec![0.0; m], k)
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn slopes(&self) -> &[f64] {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    /// Predicts from a dense marginal row.
    pub fn predict_dense(&self, eta: &[f64]) -> Result<KHot> {
        if eta.len() != self.m() {
            return Err(Error::Shape(format!(
                "marginal row has {} entries, classifier expects {}",
                eta.len(),
                self.m()
            )));
        }
        let mut cands: Vec<(f64, u32)> = (0..self.m())
            .map(|j| (self.a[j] * eta[j] + self.b[j], j as u32))
            .collect();
        KHot::new(self.m(), topk_pairs(&mut cands, self.k))
    }

    /// Predicts from a sparse marginal row (`indices` sorted ascending;
    /// absent labels have probability zero). `fallback` must come from
    /// [`Self::fallback_order`]. The true top-k over all m labels is always
    /// contained in the stored labels plus the k best absent ones, so the
    /// candidate set stays small.
    fn predict_sparse(&self, indices: &[u32], values: &[f64], fallback: &[u32]) -> KHot {
        let m = self.m();
        let mut cands: Vec<(f64, u32)> = Vec::with_capacity(indices.len() + self.k);
        for (&j, &eta) in indices.iter().zip(values) {
            let j_us = j as usize;
            cands.push((self.a[j_us] * eta + self.b[j_us], j));
        }
        if indices.len() < m {
            let mut taken = 0;
            for &j in fallback {
                if taken == self.k {
                    break;
                }
                if indices.binary_search(&j).is_err() {
                    cands.push((self.b[j as usize], j));
                    taken += 1;
                }
            }
        }
        KHot::new(m, topk_pairs(&mut cands, self.k)).expect("candidates are distinct in-range")
    }

    /// Label indices sorted by offset `b` descending, index ascending: the
    /// order in which absent (zero-probability) labels would be picked.
    pub fn fallback_order(&self) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.m() as u32).collect();
        order.sort_by(|&x, &y| {
            self.b[y as usize]
                .partial_cmp(&self.b[x as usize])
                .expect("offsets are finite")
                .then(x.cmp(&y))
        });
        order
    }

    /// Predicts one sparse row, building the offset ordering internally.
    /// Prefer [`Self::predict_all`] for whole matrices.
    pub fn predict_sparse_row(&self, indices: &[u32], values: &[f64]) -> Result<KHot> {
        let fallback = self.fallback_order();
        self.predict_sparse_prepared(indices, values, &fallback)
    }

    /// Predicts one sparse row with a precomputed [`Self::fallback_order`];
    /// lets callers that mix many rows and rules amortize the ordering.
    pub fn predict_sparse_prepared(
        &self,
        indices: &[u32],
        values: &[f64],
        fallback: &[u32],
    ) -> Result<KHot> {
        if indices.len() != values.len() {
            return Err(Error::Shape(
                "sparse row indices and values disagree in length".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last as usize >= self.m() {
                return Err(Error::Shape(format!(
                    "label index {last} out of range for m={}",
                    self.m()
                )));
            }
        }
        Ok(self.predict_sparse(indices, values, fallback))
    }

    /// Predicts every row of a marginal matrix. The offset ordering is built
    /// once, so sparse inputs cost O(stored entries + k) per row.
    pub fn predict_all(&self, marginals: &MarginalMatrix) -> Result<PredictionMatrix> {
        if marginals.m() != self.m() {
            return Err(Error::Shape(format!(
                "marginals have m={}, classifier expects m={}",
                marginals.m(),
                self.m()
            )));
        }
        let fallback = self.fallback_order();
        let rows = (0..marginals.n())
            .map(|i| {
                let (idx, val) = marginals.row(i);
                self.predict_sparse(idx, val, &fallback).ones().to_vec()
            })
            .collect();
        PredictionMatrix::from_rows(self.m(), rows)
    }
}

/// Predicts one instance with a deterministic affine top-k rule.
pub fn predict_deterministic(clf: &AffineTopK, eta: &[f64]) -> Result<KHot> {
    clf.predict_dense(eta)
}

/// Finite mixture of affine top-k rules with convex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedClassifier {
    components: Vec<AffineTopK>,
    weights: Vec<f64>,
}

impl RandomizedClassifier {
    /// Builds a mixture. All components must share `m` and `k`; weights must
    /// be non-negative and sum to one within `1e-9` (they are renormalized
    /// to sum exactly one).
    pub fn new(components: Vec<AffineTopK>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidClassifier(
                "mixture needs at least one component".into(),
            ));
        }
        if components.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let (m, k) = (components[0].m(), components[0].k());
        if components.iter().any(|c| c.m() != m || c.k() != k) {
            return Err(Error::InvalidClassifier(
                "mixture components disagree on label count or budget".into(),
            ));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidWeights(
                "mixture weights must be non-negative and finite".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(RandomizedClassifier {
            components,
            weights,
        })
    }

    /// Wraps a single deterministic rule as a one-component mixture.
    pub fn single(clf: AffineTopK) -> Self {
        RandomizedClassifier {
            components: vec![clf],
            weights: vec![1.0],
        }
    }

    pub fn components(&self) -> &[AffineTopK] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.components[0].m()
    }

    pub fn k(&self) -> usize {
        self.components[0].k()
    }

    /// Samples a component index proportional to the weights.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.components.len() - 1
    }

    /// Per-component offset orderings, reusable across many
    /// [`Self::fractional_row_with`] calls.
    pub fn fallback_orders(&self) -> Vec<Vec<u32>> {
        self.components.iter().map(|c| c.fallback_order()).collect()
    }

    /// Per-label inclusion probabilities of the mixture for one sparse
    /// marginal row: the weighted average of the component predictions.
    /// Sums to `k`, since every component predicts exactly `k` labels.
    pub fn fractional_row_with(
        &self,
        indices: &[u32],
        values: &[f64],
        fallbacks: &[Vec<u32>],
    ) -> Vec<f64> {
        let mut pi = vec![0.0f64; self.m()];
        for ((c, &w), fb) in self.components.iter().zip(&self.weights).zip(fallbacks) {
            let kh = c.predict_sparse(indices, values, fb);
            for &j in kh.ones() {
                pi[j as usize] += w;
            }
        }
        pi
    }

    /// Convenience wrapper around [`Self::fractional_row_with`] for single
    /// rows; builds the offset orderings on each call.
    pub fn fractional_row(&self, indices: &[u32], values: &[f64]) -> Vec<f64> {
        self.fractional_row_with(indices, values, &self.fallback_orders())
    }
}

/// Predicts one instance with a randomized classifier: samples a component,
/// then applies its deterministic rule.
pub fn predict_randomized<R: Rng + ?Sized>(
    rclf: &RandomizedClassifier,
    eta: &[f64],
    rng: &mut R,
) -> Result<KHot> {
    let i = rclf.sample_component(rng);
    rclf.components()[i].predict_dense(eta)
}

/// Expected confusion tensor of a randomized classifier: the weight-averaged
/// empirical confusion of its components' deterministic predictions.
pub fn expected_confusion_randomized(
    rclf: &RandomizedClassifier,
    marginals: &MarginalMatrix,
    labels: &LabelMatrix,
) -> Result<ConfusionTensor> {
    let m = rclf.m();
    let k = rclf.k();
    let mut acc = vec![[0.0f64; 4]; m];
    for (c, &w) in rclf.components().iter().zip(rclf.weights()) {
        let preds = c.predict_all(marginals)?;
        let tensor = empirical_confusion(&preds, labels, k)?;
        for (slot, cell) in acc.iter_mut().zip(tensor.labels()) {
            for (s, v) in slot.iter_mut().zip(cell.as_array()) {
                *s += w * v;
            }
        }
    }
    Ok(ConfusionTensor::from_raw_unchecked(
        acc.into_iter().map(BinaryConfusion::from_array).collect(),
        k,
    ))
}
