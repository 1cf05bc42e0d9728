//! Tensor completion under deterministic sampling patterns.
//!
//! The crate estimates a strictly positive rank-1 weight tensor from the
//! sampling mask, uses it to form a weighted HOSVD estimate of the missing
//! entries, and can refine that estimate with a projected total-variation
//! iteration. Error metrics, bound evaluators, mask generators and a seeded
//! experiment runner sit on top.

// Validation uses `!(x >= 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod formats;
pub mod frames;
pub mod hosvd;
pub mod mask;
pub mod rng;
pub mod svd;
pub mod synth;
pub mod tensor;
pub mod tv;
pub mod weight;

pub use error::{Result, TensorError};
pub use eval::{bound_report, bound_theorem1, bound_theorem2_terms, metrics, mode_spectrum, BoundReport, ErrorMetrics};
pub use experiment::{run_experiment, ExperimentConfig, Method, TrialRecord};
pub use frames::{emit_frames, ingest_frames, FrameMeta};
pub use hosvd::{hosvd_p, hosvd_plain, hosvd_truncate, weighted_hosvd, HosvdFactors};
pub use mask::{gen_mask_nonuniform, gen_mask_uniform, SamplingPattern};
pub use synth::{add_noise, generate_smooth_tucker, generate_tucker, NoiseModel};
pub use tensor::{khatri_rao, DenseTensor, Matrix, TuckerRank};
pub use tv::{tv_complete, CompletionReport, StepSchedule, TvConfig};
pub use weight::{estimate_weight, Rank1Weight};
