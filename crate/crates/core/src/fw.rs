//! Frank-Wolfe search over the set of achievable confusion tensors.
//!
//! The feasible set — confusion tensors achievable by randomized
//! exact-budget classifiers — is convex, and every linear subproblem over it
//! is solved exactly by an affine top-k rule built from the current gradient
//! (see [`crate::linear::gains_to_affine`]). The loop therefore alternates:
//! take the gradient of the target metric at the current tensor, propose the
//! optimal rule for that linearization, evaluate its tensor, and move towards
//! it by a line-searched (or fixed-schedule) step. The visited rules, weighted
//! by how much mass each step kept, form a [`RandomizedClassifier`] whose
//! expected confusion is the final iterate.
//!
//! For metrics linear in the tensor the second proposal reproduces the first,
//! the line search returns a zero step, and the loop stops after two
//! iterations with the closed-form rule.

use crate::classifier::{AffineTopK, RandomizedClassifier};
use crate::confusion::{empirical_confusion, ConfusionTensor};
use crate::dataset::{LabelMatrix, MarginalMatrix};
use crate::error::{Error, Result};
use crate::linear::gains_to_affine;
use crate::metrics::{macro_gradient, macro_value, MetricId, SmoothingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt;
use std::str::FromStr;

/// How the first iterate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRule {
    /// Start from the plain top-k rule (unit slope, zero offset).
    TopK,
    /// Start from random slopes in `[0.5, 1.5)` and random offsets in
    /// `[-0.5, 0.5)`. Restarting from several seeds explores different
    /// score orderings, which helps escape poor stationary points of
    /// non-concave metrics.
    Random,
}

/// How the step size of each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Coarse grid plus golden-section refinement over `[0, 1]`.
    LineSearch,
    /// The classical schedule `alpha_i = 2 / (i + 1)`.
    FixedSchedule,
}

/// Tuning knobs for [`run_frank_wolfe`].
#[derive(Debug, Clone)]
pub struct FWConfig {
    pub max_iters: usize,
    /// Stop once the accepted step size falls below this threshold.
    pub stop_eps: f64,
    pub init: InitRule,
    pub step_rule: StepRule,
    /// Golden-section refinement iterations inside each line search.
    pub line_search_iters: usize,
    /// Seed for the random initializer (unused by [`InitRule::TopK`]).
    pub seed: u64,
    /// Smoothing applied to the objective and its gradient.
    pub smoothing: SmoothingConfig,
}

impl Default for FWConfig {
    fn default() -> Self {
        FWConfig {
            max_iters: 100,
            stop_eps: 1e-3,
            init: InitRule::TopK,
            step_rule: StepRule::LineSearch,
            line_search_iters: 60,
            seed: 0,
            smoothing: SmoothingConfig::default(),
        }
    }
}

impl FWConfig {
    fn validate(&self) -> Result<()> {
        if !self.stop_eps.is_finite() || self.stop_eps < 0.0 {
            return Err(Error::InvalidInput(format!(
                "stop threshold {} must be finite and non-negative",
                self.stop_eps
            )));
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective value after this iteration's step.
    pub objective: f64,
    /// Step size taken at this iteration (1 for the initial iterate).
    pub alpha: f64,
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    StepBelowTolerance,
    MaxIterations,
}

/// Full record of a Frank-Wolfe run.
#[derive(Debug, Clone)]
pub struct FWTrace {
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
    /// The final mixed confusion tensor.
    pub confusion: ConfusionTensor,
}

impl FWTrace {
    pub fn final_objective(&self) -> f64 {
        self.rows
            .last()
            .expect("trace has at least one row")
            .objective
    }

    pub fn iterations(&self) -> usize {
        self.rows
            .last()
            .expect("trace has at least one row")
            .iteration
    }
}

/// Result of a Frank-Wolfe run: the mixture and its trace.
#[derive(Debug, Clone)]
pub struct FWOutcome {
    pub classifier: RandomizedClassifier,
    pub trace: FWTrace,
}

/// Anything that can evaluate the expected confusion tensor of a
/// deterministic rule: an empirical sample, or an explicit distribution.
pub trait ConfusionProvider {
    fn num_labels(&self) -> usize;
    fn budget(&self) -> usize;
    fn confusion(&self, clf: &AffineTopK) -> Result<ConfusionTensor>;
}

/// Evaluates rules on an observed sample: predictions from the marginal
/// matrix, counts against the label matrix.
pub struct EmpiricalProvider<'a> {
    marginals: &'a MarginalMatrix,
    labels: &'a LabelMatrix,
    k: usize,
}

impl<'a> EmpiricalProvider<'a> {
    pub fn new(marginals: &'a MarginalMatrix, labels: &'a LabelMatrix, k: usize) -> Result<Self> {
        if marginals.n() != labels.n() || marginals.m() != labels.m() {
            return Err(Error::Shape(format!(
                "marginals are {}x{} but labels are {}x{}",
                marginals.n(),
                marginals.m(),
                labels.n(),
                labels.m()
            )));
        }
        if k < 1 || k > marginals.m() {
            return Err(Error::InvalidBudget {
                k,
                m: marginals.m(),
            });
        }
        Ok(EmpiricalProvider {
            marginals,
            labels,
            k,
        })
    }
}

impl ConfusionProvider for EmpiricalProvider<'_> {
    fn num_labels(&self) -> usize {
        self.marginals.m()
    }

    fn budget(&self) -> usize {
        self.k
    }

    fn confusion(&self, clf: &AffineTopK) -> Result<ConfusionTensor> {
        let preds = clf.predict_all(self.marginals)?;
        empirical_confusion(&preds, self.labels, self.k)
    }
}

/// The classical step schedule `2 / (i + 1)`; equals 1 at the first
/// iteration, so the initial iterate is fully replaced.
pub fn fixed_schedule_step(iteration: usize) -> f64 {
    2.0 / (iteration as f64 + 1.0)
}

/// Maximizes a function on `[0, 1]`: 33-point grid, golden-section
/// refinement of the best bracket, then an exact comparison against both
/// endpoints. Ties prefer the smaller argument, so a flat objective returns
/// exactly 0 and a linearly increasing one exactly 1.
pub fn grid_golden_maximize<F>(mut f: F, refine_iters: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const GRID: usize = 32;
    let eval = |x: f64, f: &mut F| -> Result<f64> {
        let v = f(x)?;
        if v.is_nan() {
            return Err(Error::InvalidInput(format!(
                "line-search objective is NaN at {x}"
            )));
        }
        Ok(v)
    };

    let mut grid_vals = [0.0f64; GRID + 1];
    let mut best_idx = 0usize;
    for i in 0..=GRID {
        let x = i as f64 / GRID as f64;
        grid_vals[i] = eval(x, &mut f)?;
        if grid_vals[i] > grid_vals[best_idx] {
            best_idx = i;
        }
    }

    let mut lo = best_idx.saturating_sub(1) as f64 / GRID as f64;
    let mut hi = (best_idx + 1).min(GRID) as f64 / GRID as f64;

    // Golden-section on the bracket around the best grid point.
    let gr = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let mut f1 = eval(x1, &mut f)?;
    let mut f2 = eval(x2, &mut f)?;
    for _ in 0..refine_iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = eval(x2, &mut f)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = eval(x1, &mut f)?;
        }
    }
    // x1 <= x2, so on ties the smaller argument wins.
    let (xs, fs) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };

    // Endpoints can beat the refined interior point (linear objectives do
    // exactly this). Differences within a few ulps are treated as ties:
    // mixing arithmetic jitters the objective at that scale, and reporting
    // such noise as a gain would let callers loop forever on it. Ties
    // prefer 0, then 1, then the refined interior point.
    let scale = 1.0f64
        .max(grid_vals[0].abs())
        .max(grid_vals[GRID].abs())
        .max(fs.abs());
    let tol = 4.0 * f64::EPSILON * scale;
    if fs <= grid_vals[0] + tol && grid_vals[GRID] <= grid_vals[0] + tol {
        return Ok(0.0);
    }
    if grid_vals[GRID] + tol >= fs {
        return Ok(1.0);
    }
    Ok(xs)
}

/// Line search for the step size: maximizes the metric along the segment
/// from `from` to `to` in confusion-tensor space.
pub fn line_search(
    metric: &MetricId,
    from: &ConfusionTensor,
    to: &ConfusionTensor,
    s: &SmoothingConfig,
    refine_iters: usize,
) -> Result<f64> {
    if from.m() != to.m() || from.budget_k() != to.budget_k() {
        return Err(Error::Shape(
            "line-search endpoints disagree in shape".into(),
        ));
    }
    grid_golden_maximize(
        |alpha| macro_value(metric, &from.mix(to, alpha)?, s),
        refine_iters,
    )
}

/// Runs the search against an arbitrary confusion provider.
pub fn run_frank_wolfe_with(
    metric: &MetricId,
    provider: &dyn ConfusionProvider,
    cfg: &FWConfig,
) -> Result<FWOutcome> {
    metric.validate()?;
    cfg.validate()?;
    let m = provider.num_labels();
    let k = provider.budget();

    let h0 = match cfg.init {
        InitRule::TopK => AffineTopK::plain_topk(m, k)?,
        InitRule::Random => {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            let a: Vec<f64> = (0..m).map(|_| 0.5 + rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            AffineTopK::new(a, b, k)?
        }
    };

    let mut current = provider.confusion(&h0)?;
    let mut components = vec![h0];
    let mut weights = vec![1.0f64];
    let mut rows = vec![TraceRow {
        iteration: 0,
        objective: macro_value(metric, &current, &cfg.smoothing)?,
        alpha: 1.0,
    }];
    let mut stop = StopReason::MaxIterations;

    for i in 1..=cfg.max_iters {
        let gains = macro_gradient(metric, &current, &cfg.smoothing)?;
        let proposal = gains_to_affine(&gains, k)?;
        let proposed = provider.confusion(&proposal)?;
        let alpha = match cfg.step_rule {
            StepRule::LineSearch => line_search(
                metric,
                &current,
                &proposed,
                &cfg.smoothing,
                cfg.line_search_iters,
            )?,
            StepRule::FixedSchedule => fixed_schedule_step(i),
        };
        if alpha < cfg.stop_eps {
            stop = StopReason::StepBelowTolerance;
            break;
        }
        current = current.mix(&proposed, alpha)?;
        for w in &mut weights {
            *w *= 1.0 - alpha;
        }
        weights.push(alpha);
        components.push(proposal);
        rows.push(TraceRow {
            iteration: i,
            objective: macro_value(metric, &current, &cfg.smoothing)?,
            alpha,
        });
        debug_assert!(current.verify_budget(1e-6).is_ok());
    }

    let classifier = RandomizedClassifier::new(components, weights)?;
    Ok(FWOutcome {
        classifier,
        trace: FWTrace {
            rows,
            stop,
            confusion: current,
        },
    })
}

/// Runs the search on an observed sample.
pub fn run_frank_wolfe(
    metric: &MetricId,
    marginals: &MarginalMatrix,
    labels: &LabelMatrix,
    k: usize,
    cfg: &FWConfig,
) -> Result<FWOutcome> {
    let provider = EmpiricalProvider::new(marginals, labels, k)?;
    run_frank_wolfe_with(metric, &provider, cfg)
}

/// Fraction of the sample handed to the first (estimation) part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRatio {
    /// 50/50 disjoint split.
    Half,
    /// 75/25 disjoint split.
    ThreeQuarters,
    /// No split: both parts are the full sample.
    Full,
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitRatio::Half => write!(f, "50"),
            SplitRatio::ThreeQuarters => write!(f, "75"),
            SplitRatio::Full => write!(f, "100"),
        }
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "50" => Ok(SplitRatio::Half),
            "75" => Ok(SplitRatio::ThreeQuarters),
            "100" => Ok(SplitRatio::Full),
            other => Err(Error::InvalidSplit(format!(
                "unknown split {other:?}; expected 50, 75, or 100"
            ))),
        }
    }
}

/// A dataset divided into an estimation part (for priors / closed-form fits)
/// and a search part (for confusion evaluation during the search).
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub fit_labels: LabelMatrix,
    pub fit_marginals: MarginalMatrix,
    pub search_labels: LabelMatrix,
    pub search_marginals: MarginalMatrix,
}

/// Splits a sample by a seeded permutation. [`SplitRatio::Full`] reuses the
/// whole sample for both parts in the original order; the other ratios
/// produce disjoint parts, each kept in original row order.
pub fn split_dataset(
    labels: &LabelMatrix,
    marginals: &MarginalMatrix,
    ratio: SplitRatio,
    seed: u64,
) -> Result<DatasetSplit> {
    if labels.n() != marginals.n() || labels.m() != marginals.m() {
        return Err(Error::Shape(format!(
            "labels are {}x{} but marginals are {}x{}",
            labels.n(),
            labels.m(),
            marginals.n(),
            marginals.m()
        )));
    }
    let n = labels.n();
    if let SplitRatio::Full = ratio {
        return Ok(DatasetSplit {
            fit_labels: labels.clone(),
            fit_marginals: marginals.clone(),
            search_labels: labels.clone(),
            search_marginals: marginals.clone(),
        });
    }
    let first = match ratio {
        SplitRatio::Half => n / 2,
        SplitRatio::ThreeQuarters => 3 * n / 4,
        SplitRatio::Full => unreachable!(),
    };
    if first == 0 || first == n {
        return Err(Error::InvalidSplit(format!(
            "cannot split {n} instances at ratio {ratio}: a part would be empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut fit_idx = perm[..first].to_vec();
    let mut search_idx = perm[first..].to_vec();
    fit_idx.sort_unstable();
    search_idx.sort_unstable();
    Ok(DatasetSplit {
        fit_labels: labels.select_rows(&fit_idx),
        fit_marginals: marginals.select_rows(&fit_idx),
        search_labels: labels.select_rows(&search_idx),
        search_marginals: marginals.select_rows(&search_idx),
    })
}
