//! Brute-force baselines on small discrete distributions.
//!
//! For a distribution with a handful of support points, every deterministic
//! exact-budget classifier can be enumerated outright: it is just one
//! k-subset of labels per support point. That gives two reference answers to
//! compare search procedures against:
//!
//! * [`best_deterministic`] — the best single assignment, found by exhaustive
//!   scan (lexicographically first among ties);
//! * [`best_randomized_vertex_fw`] — the best randomized classifier found by
//!   a long fixed-schedule search directly over the enumerated vertices,
//!   which can strictly beat every deterministic assignment on nonlinear
//!   metrics.
//!
//! [`coupling_witness`] packages the canonical two-distribution example
//! showing that optimal decisions depend on the joint label distribution
//! through more than the marginals alone: both distributions share every
//! marginal at the first support point, yet their optimal assignments
//! disagree there.

use crate::classifier::AffineTopK;
use crate::confusion::{population_confusion_discrete, BinaryConfusion, ConfusionTensor};
use crate::error::{Error, Result};
use crate::fw::ConfusionProvider;
use crate::metrics::{macro_gradient, macro_value, MetricId, SmoothingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::fmt;

/// Default cap on the number of assignments an exhaustive scan may visit.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1_000_000;

/// A finitely supported distribution over instances: point `p` occurs with
/// probability `weight(p)` and has conditional label probabilities
/// `marginals(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
    marginals: Vec<Vec<f64>>,
}

impl DiscreteDistribution {
    /// Builds a distribution. Weights must be non-negative and sum to one
    /// within `1e-9` (they are renormalized to sum exactly one); marginal
    /// rows must share a common length with entries in `[0, 1]`.
    pub fn new(weights: Vec<f64>, marginals: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != marginals.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} support points",
                weights.len(),
                marginals.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be non-negative and finite".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        let m = marginals[0].len();
        if m == 0 {
            return Err(Error::InvalidDistribution(
                "support points carry zero labels".into(),
            ));
        }
        for (p, row) in marginals.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidDistribution(format!(
                    "support point {p} has {} marginals, expected {m}",
                    row.len()
                )));
            }
            if row
                .iter()
                .any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v))
            {
                return Err(Error::InvalidDistribution(format!(
                    "support point {p} has a marginal outside [0, 1]"
                )));
            }
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(DiscreteDistribution { weights, marginals })
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of labels.
    pub fn m(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn weight(&self, p: usize) -> f64 {
        self.weights[p]
    }

    pub fn marginals(&self, p: usize) -> &[f64] {
        &self.marginals[p]
    }

    /// First distribution of the coupling example: two equally likely
    /// points with label marginals (0.4, 0.2, 0.6) and (0.8, 0.4, 0.4).
    pub fn coupling_example_a() -> Self {
        DiscreteDistribution::new(
            vec![0.5, 0.5],
            vec![vec![0.4, 0.2, 0.6], vec![0.8, 0.4, 0.4]],
        )
        .expect("built-in distribution is valid")
    }

    /// Second distribution of the coupling example: identical to
    /// [`Self::coupling_example_a`] at the first point, but the second point
    /// has marginals (0.8, 0.4, 0.8).
    pub fn coupling_example_b() -> Self {
        DiscreteDistribution::new(
            vec![0.5, 0.5],
            vec![vec![0.4, 0.2, 0.6], vec![0.8, 0.4, 0.8]],
        )
        .expect("built-in distribution is valid")
    }
}

/// A seeded random distribution: weights proportional to unit exponentials,
/// marginals uniform on `[0, 1)`.
pub fn random_discrete_distribution(seed: u64, n: usize, m: usize) -> Result<DiscreteDistribution> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDistribution(format!(
            "cannot draw a distribution with n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights = if total > 0.0 {
        raw.into_iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    let marginals = (0..n)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();
    DiscreteDistribution::new(weights, marginals)
}

/// All k-subsets of `0..m` in lexicographic order.
fn combinations(m: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (0..k as u32).collect();
    loop {
        out.push(cur.clone());
        // Advance the rightmost position that still has room.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < (m - k + i) as u32 {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(m: usize, k: usize) -> Option<u128> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((m - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Number of deterministic assignments for `n` points, `m` labels, budget
/// `k`; `None` on overflow.
pub fn assignment_count(n: usize, m: usize, k: usize) -> Option<u128> {
    let per_point = binomial(m, k)?;
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(per_point)?;
    }
    Some(acc)
}

/// Iterator over every assignment of one k-subset per support point, in
/// lexicographic order with the first point most significant.
#[derive(Debug)]
pub struct AssignmentIter {
    combos: Vec<Vec<u32>>,
    digits: Vec<usize>,
    done: bool,
}

impl AssignmentIter {
    fn current(&self) -> Vec<Vec<u32>> {
        self.digits
            .iter()
            .map(|&d| self.combos[d].clone())
            .collect()
    }
}

impl Iterator for AssignmentIter {
    type Item = Vec<Vec<u32>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.current();
        // Odometer increment, last digit fastest.
        let base = self.combos.len();
        let mut p = self.digits.len();
        loop {
            if p == 0 {
                self.done = true;
                break;
            }
            p -= 1;
            self.digits[p] += 1;
            if self.digits[p] < base {
                break;
            }
            self.digits[p] = 0;
        }
        Some(item)
    }
}

/// Enumerates every deterministic assignment for `n` support points, or
/// fails if there are more than `limit`.
pub fn enumerate_assignments(n: usize, m: usize, k: usize, limit: u64) -> Result<AssignmentIter> {
    if n == 0 {
        return Err(Error::InvalidInput("no support points to assign".into()));
    }
    if k < 1 || k > m {
        return Err(Error::InvalidBudget { k, m });
    }
    let count = assignment_count(n, m, k);
    match count {
        Some(c) if c <= limit as u128 => {}
        _ => {
            let shown = count
                .map(|c| c.to_string())
                .unwrap_or_else(|| "more than u128 can hold".into());
            return Err(Error::SearchSpaceTooLarge(format!(
                "C({m},{k})^{n} = {shown} assignments exceeds the limit of {limit}"
            )));
        }
    }
    Ok(AssignmentIter {
        combos: combinations(m, k),
        digits: vec![0; n],
        done: false,
    })
}

/// Dense 0/1 prediction rows for an assignment (one combination per
/// support point), ready for [`crate::population_confusion_discrete`].
pub fn assignment_rows(assignment: &[Vec<u32>], m: usize) -> Vec<Vec<f64>> {
    assignment
        .iter()
        .map(|combo| {
            let mut row = vec![0.0; m];
            for &j in combo {
                row[j as usize] = 1.0;
            }
            row
        })
        .collect()
}

/// Exhaustively finds the best deterministic assignment. Returns the
/// lexicographically first maximizer together with its metric value.
pub fn best_deterministic(
    metric: &MetricId,
    dist: &DiscreteDistribution,
    k: usize,
    s: &SmoothingConfig,
    limit: u64,
) -> Result<(Vec<Vec<u32>>, f64)> {
    metric.validate()?;
    let m = dist.m();
    let mut best: Option<(Vec<Vec<u32>>, f64)> = None;
    for assignment in enumerate_assignments(dist.len(), m, k, limit)? {
        let rows = assignment_rows(&assignment, m);
        let tensor = population_confusion_discrete(&rows, dist, k)?;
        let value = macro_value(metric, &tensor, s)?;
        match &best {
            Some((_, bv)) if value <= *bv => {}
            _ => best = Some((assignment, value)),
        }
    }
    Ok(best.expect("enumeration yields at least one assignment"))
}

/// A randomized classifier expressed directly as a mixture of deterministic
/// assignments over a distribution's support.
#[derive(Debug, Clone)]
pub struct VertexMixture {
    /// `(weight, assignment)` pairs; weights sum to one.
    pub atoms: Vec<(f64, Vec<Vec<u32>>)>,
    /// Metric value of the mixture's expected confusion tensor.
    pub value: f64,
}

/// Cap on the cached vertex tensors (`assignments * 4m` floats).
const VERTEX_CACHE_FLOATS: u128 = 50_000_000;

fn flat_to_tensor(flat: &[f64], k: usize) -> ConfusionTensor {
    let per_label = flat
        .chunks_exact(4)
        .map(|c| BinaryConfusion::from_raw_unchecked(c[0], c[1], c[2], c[3]))
        .collect();
    ConfusionTensor::from_raw_unchecked(per_label, k)
}

/// Long fixed-schedule search over the enumerated assignment vertices.
///
/// Starts from the best single vertex, repeatedly moves towards the vertex
/// best aligned with the current gradient, and returns the best mixture seen
/// along the way — so the result never falls below [`best_deterministic`].
/// On nonlinear metrics it can strictly exceed every single vertex.
pub fn best_randomized_vertex_fw(
    metric: &MetricId,
    dist: &DiscreteDistribution,
    k: usize,
    s: &SmoothingConfig,
    iters: usize,
    limit: u64,
) -> Result<VertexMixture> {
    metric.validate()?;
    let m = dist.m();
    let n = dist.len();
    let fits = assignment_count(n, m, k)
        .and_then(|c| c.checked_mul(4 * m as u128))
        .is_some_and(|floats| floats <= VERTEX_CACHE_FLOATS);
    if !fits {
        return Err(Error::SearchSpaceTooLarge(format!(
            "vertex cache for C({m},{k})^{n} assignments would not fit in memory"
        )));
    }

    // Cache one flattened tensor per assignment, in enumeration order.
    let mut tensors: Vec<Vec<f64>> = Vec::new();
    for assignment in enumerate_assignments(n, m, k, limit)? {
        let rows = assignment_rows(&assignment, m);
        let tensor = population_confusion_discrete(&rows, dist, k)?;
        let mut flat = Vec::with_capacity(4 * m);
        for c in tensor.labels() {
            flat.extend_from_slice(&c.as_array());
        }
        tensors.push(flat);
    }
    let combos = combinations(m, k);
    let unrank = |mut idx: usize| -> Vec<Vec<u32>> {
        let mut digits = vec![0usize; n];
        for p in (0..n).rev() {
            digits[p] = idx % combos.len();
            idx /= combos.len();
        }
        digits.into_iter().map(|d| combos[d].clone()).collect()
    };

    // Start at the best single vertex.
    let mut start = 0usize;
    let mut start_val = f64::NEG_INFINITY;
    for (v, flat) in tensors.iter().enumerate() {
        let value = macro_value(metric, &flat_to_tensor(flat, k), s)?;
        if value > start_val {
            start = v;
            start_val = value;
        }
    }
    let mut current = tensors[start].clone();
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    weights.insert(start, 1.0);
    let mut scale = 1.0f64;
    let mut best_val = start_val;
    let mut best_atoms: Vec<(f64, usize)> = vec![(1.0, start)];

    for i in 1..=iters {
        let gains = macro_gradient(metric, &flat_to_tensor(&current, k), s)?;
        let mut flat_g = Vec::with_capacity(4 * m);
        for g in &gains.per_label {
            flat_g.extend_from_slice(g);
        }
        let dot = |flat: &[f64]| -> f64 { flat.iter().zip(&flat_g).map(|(x, g)| x * g).sum() };
        let mut target = 0usize;
        let mut target_dot = f64::NEG_INFINITY;
        for (v, flat) in tensors.iter().enumerate() {
            let d = dot(flat);
            if d > target_dot {
                target = v;
                target_dot = d;
            }
        }
        if target_dot - dot(&current) <= 1e-12 {
            break; // stationary: no vertex improves the linearization
        }
        let alpha = 2.0 / (i as f64 + 1.0);
        for (c, t) in current.iter_mut().zip(&tensors[target]) {
            *c = (1.0 - alpha) * *c + alpha * t;
        }
        if alpha == 1.0 {
            weights.clear();
            weights.insert(target, 1.0);
            scale = 1.0;
        } else {
            scale *= 1.0 - alpha;
            *weights.entry(target).or_insert(0.0) += alpha / scale;
        }
        let value = macro_value(metric, &flat_to_tensor(&current, k), s)?;
        if value > best_val {
            best_val = value;
            best_atoms = weights.iter().map(|(&v, &w)| (w * scale, v)).collect();
        }
    }

    let total: f64 = best_atoms.iter().map(|(w, _)| w).sum();
    let atoms = best_atoms
        .into_iter()
        .map(|(w, v)| (w / total, unrank(v)))
        .collect();
    Ok(VertexMixture {
        atoms,
        value: best_val,
    })
}

/// Evaluates affine rules exactly against a discrete distribution; the
/// counterpart of an empirical sample for population-level searches.
pub struct ExactDiscreteProvider<'a> {
    dist: &'a DiscreteDistribution,
    k: usize,
}

impl<'a> ExactDiscreteProvider<'a> {
    pub fn new(dist: &'a DiscreteDistribution, k: usize) -> Result<Self> {
        if k < 1 || k > dist.m() {
            return Err(Error::InvalidBudget { k, m: dist.m() });
        }
        Ok(ExactDiscreteProvider { dist, k })
    }
}

impl ConfusionProvider for ExactDiscreteProvider<'_> {
    fn num_labels(&self) -> usize {
        self.dist.m()
    }

    fn budget(&self) -> usize {
        self.k
    }

    fn confusion(&self, clf: &AffineTopK) -> Result<ConfusionTensor> {
        let m = self.dist.m();
        let rows = (0..self.dist.len())
            .map(|p| {
                let kh = clf.predict_dense(self.dist.marginals(p))?;
                let mut row = vec![0.0; m];
                for &j in kh.ones() {
                    row[j as usize] = 1.0;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        population_confusion_discrete(&rows, self.dist, self.k)
    }
}

/// Smoothing used when reproducing the reference values of the coupling
/// example.
pub const COUPLING_EPS: f64 = 1e-5;
/// Reference optimum for the first distribution (macro Jaccard, k = 2).
pub const COUPLING_REFERENCE_A: f64 = 0.453962;
/// Reference optimum for the second distribution (macro Jaccard, k = 2).
pub const COUPLING_REFERENCE_B: f64 = 0.471423;

/// Outcome of the coupling example: optimal macro-Jaccard assignments for
/// two distributions that agree on every marginal of their first support
/// point yet make opposite decisions there.
#[derive(Debug, Clone)]
pub struct CouplingWitness {
    pub value_a: f64,
    pub value_b: f64,
    pub reference_a: f64,
    pub reference_b: f64,
    pub assignment_a: Vec<Vec<u32>>,
    pub assignment_b: Vec<Vec<u32>>,
    /// The first point's decisions on labels 0 and 1 swap between the two
    /// optima even though that point's marginals are identical.
    pub first_point_flips: bool,
    /// Both optima match the reference values within `1e-6`.
    pub matches_reference: bool,
}

impl CouplingWitness {
    pub fn holds(&self) -> bool {
        self.first_point_flips && self.matches_reference
    }
}

impl fmt::Display for CouplingWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_assignment = |a: &[Vec<u32>]| {
            a.iter()
                .map(|c| {
                    let inner = c
                        .iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(",");
                    format!("{{{inner}}}")
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            f,
            "distribution A: optimum {:.9} (reference {:.6}), assignment {}",
            self.value_a,
            self.reference_a,
            fmt_assignment(&self.assignment_a)
        )?;
        writeln!(
            f,
            "distribution B: optimum {:.9} (reference {:.6}), assignment {}",
            self.value_b,
            self.reference_b,
            fmt_assignment(&self.assignment_b)
        )?;
        writeln!(
            f,
            "first-point decision flip: {}",
            if self.first_point_flips { "yes" } else { "no" }
        )?;
        write!(
            f,
            "reference values reproduced within 1e-6: {}",
            if self.matches_reference { "yes" } else { "no" }
        )
    }
}

/// Runs the coupling example end to end: exhaustive macro-Jaccard optima for
/// both built-in distributions at budget 2, evaluated with the reference
/// smoothing [`COUPLING_EPS`].
pub fn coupling_witness() -> Result<CouplingWitness> {
    let s = SmoothingConfig::new(COUPLING_EPS)?;
    let metric = MetricId::Jaccard;
    let a = DiscreteDistribution::coupling_example_a();
    let b = DiscreteDistribution::coupling_example_b();
    let (assignment_a, value_a) =
        best_deterministic(&metric, &a, 2, &s, DEFAULT_ENUMERATION_LIMIT)?;
    let (assignment_b, value_b) =
        best_deterministic(&metric, &b, 2, &s, DEFAULT_ENUMERATION_LIMIT)?;

    let has = |c: &[u32], j: u32| c.binary_search(&j).is_ok();
    let first_point_flips = has(&assignment_a[0], 0)
        && !has(&assignment_a[0], 1)
        && !has(&assignment_b[0], 0)
        && has(&assignment_b[0], 1);
    let matches_reference = (value_a - COUPLING_REFERENCE_A).abs() <= 1e-6
        && (value_b - COUPLING_REFERENCE_B).abs() <= 1e-6;

    Ok(CouplingWitness {
        value_a,
        value_b,
        reference_a: COUPLING_REFERENCE_A,
        reference_b: COUPLING_REFERENCE_B,
        assignment_a,
        assignment_b,
        first_point_flips,
        matches_reference,
    })
}
