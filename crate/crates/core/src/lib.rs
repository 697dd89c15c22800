//! Shapley-value data valuation without retraining.
//!
//! Training a model on a subset is replaced by kernel regression over slices
//! of one precomputed kernel matrix (an empirical NTK, or a feature-space
//! kernel for synthetic work). On top of that surrogate the crate provides
//! exact, Monte-Carlo and truncated Monte-Carlo Shapley estimators,
//! leave-one-out scores, a sign-robustness laboratory, and the removal,
//! selection and mislabel-detection evaluations.

pub mod applications;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod regression;
pub mod rng;
pub mod robustness;
pub mod shapley;
pub mod synthetic;

pub use dataset::{load_dataset, sample_complement, DistributionSpec, Example, LabeledDataset, OneHotLabels};
pub use error::{Error, Result};
pub use kernel::{read_kernel, synth_kernel, write_kernel, IndexSlice, KernelStore, Layout, SynthKernel};
pub use regression::{fit_predict, utility, EmptyModelPolicy, PredictionMatrix, RegressionState};
pub use shapley::{
    exact_shapley, freeshap, loo, tmc_freeshap, EngineConfig, KernelGame, Method, PermutationRun, ScoreTable,
    Target,
};
