//! Quantifying predictive multiplicity of probabilistic classifiers.
//!
//! Competing models with near-identical average loss (a Rashomon set) can
//! still assign conflicting scores to individual samples. This crate
//! measures that conflict per sample as the capacity, in bits, of the
//! channel whose rows are the sample's competing score vectors, alongside
//! the classical thresholded metrics (ambiguity and discrepancy), and
//! provides tooling to reduce a score set to at most `c` representative
//! models, to pick a small model subset that preserves mean capacity, and
//! to generate Rashomon sets for logistic regression end to end.
//!
//! The numeric core is generic over the scalar type ([`Scalar`]: `f32` or
//! `f64`); `*64` aliases for the common `f64` instantiations are exported
//! at the crate root. All capacities are in bits; logistic losses are mean
//! cross-entropy in nats.

pub mod capacity;
pub mod error;
pub mod explorer;
pub mod metrics;
pub mod reduction;
mod scalar;
pub mod simplex;
pub mod tensor;

pub use capacity::{
    ba_capacity, grid_search_capacity, info_diameter, info_radius, BaConfig, CapacityResult,
    ScoreSet, SpreadBounds,
};
pub use error::{Error, Result};
pub use explorer::{
    awp_perturb, emit_scores, generate_synthetic, label_flip_retrain, log_loss_gradient,
    log_loss_hessian, mean_log_loss, train_logistic, training_accuracy, AwpConfig, AwpOutcome,
    AwpStop, Dataset, LogisticModel, Provenance, SyntheticSpec,
};
pub use metrics::{
    ambiguity, compute_report, discrepancy, sample_capacity, summarize_capacities,
    CapacitySummary, MetricsReport,
};
pub use reduction::{caratheodory_reduce, greedy_select, GreedySelection, ReductionResult};
pub use scalar::Scalar;
pub use simplex::{
    argmax_class, entropy, kl_divergence, ProbVector, SCORE_FLOOR, SIMPLEX_SUM_TOLERANCE,
};
pub use tensor::{filter_rashomon_set, resolve_base_model, RashomonMode, RashomonSpec, ScoreTensor};

pub type ProbVector64 = ProbVector<f64>;
pub type ScoreSet64 = ScoreSet<f64>;
pub type BaConfig64 = BaConfig<f64>;
pub type CapacityResult64 = CapacityResult<f64>;
pub type SpreadBounds64 = SpreadBounds<f64>;
pub type ScoreTensor64 = ScoreTensor<f64>;
pub type RashomonSpec64 = RashomonSpec<f64>;
pub type MetricsReport64 = MetricsReport<f64>;
pub type ReductionResult64 = ReductionResult<f64>;
pub type GreedySelection64 = GreedySelection<f64>;
pub type Dataset64 = Dataset<f64>;
pub type LogisticModel64 = LogisticModel<f64>;
pub type AwpConfig64 = AwpConfig<f64>;
pub type SyntheticSpec64 = SyntheticSpec<f64>;
