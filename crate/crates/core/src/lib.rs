//! Bayesian hierarchical regression with error-prone and missing covariates.
//!
//! The model of interest (gaussian or logistic) is fitted jointly with
//! classical measurement error, Berkson error, an imputation model and an
//! optional missingness model for each affected covariate, using a blocked
//! Gibbs sampler with Pólya-Gamma augmentation for the logit levels.

pub mod config;
pub mod data;
pub mod formula;
pub mod inference;
pub mod model;
pub mod sampler;
pub mod simulate;

pub use config::{load_config, ConfigError, FitConfig};
pub use data::{Column, DataError, Dataset};
pub use formula::{parse_formula, Formula, FormulaError, Term};
pub use model::{
    assemble_joint_model, validate_spec, ErrorSpec, ErrorType, Family, GaussianPrior, JointModel,
    ModelError, ModelSpec, PrecisionPrior, PriorSpec,
};
pub use sampler::{run_chains, run_chains_with_threads, ChainConfig, Draws, SamplerError};
pub use inference::{credible_interval, effective_sample_size, split_rhat, summarize, FitSummary};
pub use simulate::{
    attenuation_factor, naive_fit, simulate_classical_repeats, simulate_missing_scenario, NaiveFit,
    RepeatsScenario, ScenarioTruth,
};
