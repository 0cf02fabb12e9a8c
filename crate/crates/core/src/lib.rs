//! Budget-constrained multi-label prediction: plug-in rules, metrics, and
//! search.
//!
//! This crate deals with classifiers that must switch on **exactly k** of m
//! labels per instance, and with confusion-tensor metrics for judging them:
//! macro averages of binary measures, instance precision, and convex blends
//! of the two. It provides
//!
//! * closed-form affine top-k rules for metrics linear in the confusion
//!   tensor ([`linear`]),
//! * a Frank-Wolfe search producing randomized classifiers for nonlinear
//!   metrics ([`fw`]),
//! * systematic sampling to realize fractional label-inclusion vectors as
//!   exact-k predictions ([`madow`]),
//! * brute-force baselines for small problems ([`oracle`]), and
//! * text/JSON formats for datasets, classifiers, and reports ([`io`]).

pub mod classifier;
pub mod confusion;
pub mod dataset;
pub mod error;
pub mod fw;
pub mod io;
pub mod linear;
pub mod madow;
pub mod metrics;
pub mod oracle;
pub mod topk;

pub use classifier::{
    expected_confusion_randomized, predict_deterministic, predict_randomized, AffineTopK,
    RandomizedClassifier,
};
pub use confusion::{
    empirical_confusion, population_confusion_discrete, BinaryConfusion, ConfusionTensor,
    GainTensor,
};
pub use dataset::{KHot, LabelMatrix, MarginalMatrix, PredictionMatrix};
pub use error::{Error, Result};
pub use fw::{
    run_frank_wolfe, run_frank_wolfe_with, split_dataset, ConfusionProvider, DatasetSplit,
    EmpiricalProvider, FWConfig, FWOutcome, FWTrace, InitRule, SplitRatio, StepRule, StopReason,
};
pub use linear::{closed_form_strategy, estimate_priors, gains_to_affine, PriorVector, StrategyId};
pub use madow::madow_sample;
pub use metrics::{
    binary_gradient, binary_value, is_at_least_as_good, macro_gradient, macro_value, micro_value,
    tensor_at_least_as_good, MetricId, SmoothingConfig,
};
pub use oracle::{
    assignment_rows, best_deterministic, best_randomized_vertex_fw, coupling_witness,
    enumerate_assignments, random_discrete_distribution, CouplingWitness, DiscreteDistribution,
    ExactDiscreteProvider, VertexMixture, DEFAULT_ENUMERATION_LIMIT,
};
pub use topk::topk_select;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// A seeded RNG on an independent stream: repeats and parallel workers use
/// the same seed with distinct stream indices, so results are reproducible
/// regardless of scheduling order.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
