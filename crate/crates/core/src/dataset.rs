//! Dataset containers: ground-truth labels, marginal probabilities, and
//! k-hot predictions.
//!
//! All three types index instances by row and labels by column (`0..m`).
//! Label and prediction rows store sorted, distinct label indices; marginal
//! rows are stored sparsely in CSR layout so that top-k'-truncated inputs
//! with a thousand labels and a couple hundred stored entries per row stay
//! cheap to scan. A label absent from a sparse marginal row is an exact
//! zero, not "unknown".

use crate::error::{Error, Result};

/// A single k-hot prediction: exactly which labels are switched on for one
/// instance, out of `m` candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KHot {
    m: usize,
    ones: Vec<u32>,
}

impl KHot {
    /// Builds a k-hot vector from sorted-or-unsorted distinct indices.
    pub fn new(m: usize, mut ones: Vec<u32>) -> Result<Self> {
        ones.sort_unstable();
        for w in ones.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidInput(format!(
                    "duplicate label index {} in k-hot vector",
                    w[0]
                )));
            }
        }
        if let Some(&last) = ones.last() {
            if last as usize >= m {
                return Err(Error::Shape(format!(
                    "label index {last} out of range for m={m}"
                )));
            }
        }
        Ok(KHot { m, ones })
    }

    /// Number of labels (vector length).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Sorted indices of the positive entries.
    pub fn ones(&self) -> &[u32] {
        &self.ones
    }

    /// Number of positive entries.
    pub fn count(&self) -> usize {
        self.ones.len()
    }

    /// Dense 0/1 view; handy in tests and tiny problems.
    pub fn to_dense(&self) -> Vec<bool> {
        let mut v = vec![false; self.m];
        for &j in &self.ones {
            v[j as usize] = true;
        }
        v
    }
}

/// Ground-truth label sets for `n` instances over `m` labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    m: usize,
    rows: Vec<Vec<u32>>,
}

impl LabelMatrix {
    /// Builds a label matrix, sorting and deduplicating each row.
    pub fn from_rows(m: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= m {
                    return Err(Error::Shape(format!(
                        "label index {last} out of range for m={m}"
                    )));
                }
            }
            out.push(row);
        }
        Ok(LabelMatrix { m, rows: out })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sorted label indices of instance `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    /// Number of positive instances per label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.m];
        for row in &self.rows {
            for &j in row {
                counts[j as usize] += 1;
            }
        }
        counts
    }

    /// Copies the given instances (in the given order) into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        LabelMatrix {
            m: self.m,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Estimated marginal label probabilities for `n` instances over `m` labels,
/// stored as CSR with rows sorted by label index.
///
/// `truncation` records the top-k' cap applied to rows, if any; absent
/// entries are exact zeros under the prediction rules.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMatrix {
    m: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    truncation: Option<usize>,
}

impl MarginalMatrix {
    /// Builds a marginal matrix from per-row `(label, probability)` pairs.
    /// Rows are sorted by label index; duplicates and out-of-range
    /// probabilities are rejected.
    pub fn from_rows(m: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidMarginals(format!(
                        "duplicate label index {} in marginal row",
                        w[0].0
                    )));
                }
            }
            for &(j, p) in &row {
                if j as usize >= m {
                    return Err(Error::Shape(format!(
                        "label index {j} out of range for m={m}"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidMarginals(format!(
                        "probability {p} for label {j} outside [0, 1]"
                    )));
                }
                indices.push(j);
                values.push(p);
            }
            indptr.push(indices.len());
        }
        Ok(MarginalMatrix {
            m,
            indptr,
            indices,
            values,
            truncation: None,
        })
    }

    /// Builds a dense marginal matrix; every entry is stored.
    pub fn from_dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != m {
                    return Err(Error::Shape(format!(
                        "marginal row {i} has length {} but m={m}",
                        row.len()
                    )));
                }
                Ok(row
                    .into_iter()
                    .enumerate()
                    .map(|(j, p)| (j as u32, p))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(m, sparse)
    }

    pub fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Top-k' cap applied to this matrix, if any.
    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    /// Sparse view of row `i`: `(label indices, probabilities)`, sorted by
    /// label index.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Dense copy of row `i` with absent entries as zeros.
    pub fn to_dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        let (idx, val) = self.row(i);
        for (&j, &p) in idx.iter().zip(val) {
            out[j as usize] = p;
        }
        out
    }

    /// Keeps only the `kprime` largest-probability entries of each row
    /// (ties broken in favour of the smaller label index) and records the
    /// cap. Rows that already fit are untouched, so the operation is
    /// idempotent.
    pub fn truncate_top(self, kprime: usize) -> Result<Self> {
        if kprime == 0 {
            return Err(Error::InvalidInput(
                "truncation k' must be at least 1".into(),
            ));
        }
        let n = self.n();
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let (idx, val) = self.row(i);
            let mut entries: Vec<(u32, f64)> =
                idx.iter().copied().zip(val.iter().copied()).collect();
            if entries.len() > kprime {
                // Larger probability first, then smaller index.
                entries.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1)
                        .expect("probabilities are finite")
                        .then(a.0.cmp(&b.0))
                });
                entries.truncate(kprime);
            }
            rows.push(entries);
        }
        let mut out = Self::from_rows(self.m, rows)?;
        out.truncation = Some(kprime);
        Ok(out)
    }

    /// Copies the given instances (in the given order) into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(idx.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &i in idx {
            let (ix, vx) = self.row(i);
            indices.extend_from_slice(ix);
            values.extend_from_slice(vx);
            indptr.push(indices.len());
        }
        MarginalMatrix {
            m: self.m,
            indptr,
            indices,
            values,
            truncation: self.truncation,
        }
    }
}

/// Predicted label sets for `n` instances over `m` labels. Rows hold sorted
/// distinct indices; budget conformance (exactly k per row) is checked where
/// it matters, e.g. when estimating a confusion tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMatrix {
    m: usize,
    rows: Vec<Vec<u32>>,
}

impl PredictionMatrix {
    /// Builds a prediction matrix, sorting each row and rejecting duplicate
    /// or out-of-range indices.
    pub fn from_rows(m: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for mut row in rows {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidInput(format!(
                        "duplicate label index {} in prediction row",
                        w[0]
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= m {
                    return Err(Error::Shape(format!(
                        "label index {last} out of range for m={m}"
                    )));
                }
            }
            out.push(row);
        }
        Ok(PredictionMatrix { m, rows: out })
    }

    /// Assembles a matrix from per-instance k-hot vectors.
    pub fn from_khots(khots: Vec<KHot>) -> Result<Self> {
        let m = khots.first().map_or(0, KHot::m);
        for kh in &khots {
            if kh.m() != m {
                return Err(Error::Shape("k-hot vectors disagree on label count".into()));
            }
        }
        Ok(PredictionMatrix {
            m,
            rows: khots.into_iter().map(|kh| kh.ones).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sorted predicted label indices of instance `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }
}
