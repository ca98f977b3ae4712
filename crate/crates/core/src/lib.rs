//! Perturbation-assisted sample synthesis and Monte Carlo inference.
//!
//! A fitted invertible transport `G` turns rank-matched, perturbed base draws
//! into synthetic samples; the distribution of any statistic over such samples
//! supplies p-values, confidence intervals and prediction intervals.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod error;
pub mod generators;
pub mod halton;
pub mod matrix;
pub mod metrics;
pub mod pai;
pub mod perturb;
pub mod predict;
pub mod ranks;
pub mod rng;
pub mod special;

pub use assignment::{rank_cost_matrix, solve_lsap, Assignment, CostMatrix};
pub use error::{Error, Result};
pub use generators::{
    fit_copula, fit_gaussian, pass_sample, pass_synthesize, sample_statistic_null, GeneratorModel, PassConfig,
    PassSession, TransportKind,
};
pub use halton::{halton_block, HaltonSequence};
pub use matrix::{Matrix, Permutation};
pub use metrics::{fid, gaussian_summary, ks_distance, wasserstein_exact, GaussianSummary};
pub use pai::{
    p_value, pivotal_inference, test_conditional_coherence, test_feature_significance, test_two_sample_fid, Correction,
    EmpiricalDistribution, LabeledData, Sidedness, TestConfig, TestReport,
};
pub use perturb::{perturb, BaseDistribution, PerturbationSpec};
pub use predict::{
    conformal_fit, conformal_interval, coverage_report, pai_interval, run_prediction_study, simulate_regression_data,
    PredictionInterval, RegressionData, StudyConfig,
};
pub use ranks::{empirical_ranks, match_ranks, rank_discrepancy, EmpiricalRankMap};
