//! Model specification and the assembled joint model.
//!
//! A [`ModelSpec`] says what the user wants: the model of interest, one block
//! of error/missingness levels per error-prone covariate, and priors.
//! [`assemble_joint_model`] checks it against a [`Dataset`] and produces the
//! immutable [`JointModel`] the sampler runs on.

mod assembly;
mod design;
mod registry;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;

pub use assembly::{assemble_joint_model, resolve_priors};
pub use design::{Factor, LevelDesign};
pub use registry::{Block, ParamInfo, Registry};
pub use validate::{validate_spec, Diagnostic, Severity};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model specification:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Prior(String),
    #[error(transparent)]
    Formula(#[from] crate::formula::FormulaError),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorType {
    Classical,
    Berkson,
    Missing,
}

impl ErrorType {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::Classical => "classical",
            ErrorType::Berkson => "berkson",
            ErrorType::Missing => "missing",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(ErrorType::Classical),
            "berkson" => Ok(ErrorType::Berkson),
            "missing" => Ok(ErrorType::Missing),
            other => Err(format!("unknown error type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(format!("unsupported family {other:?} (expected gaussian or binomial)")),
        }
    }
}

/// Gaussian prior parameterised by precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    pub mean: f64,
    pub precision: f64,
}

impl GaussianPrior {
    pub const DEFAULT: GaussianPrior = GaussianPrior { mean: 0.0, precision: 0.001 };

    pub fn new(mean: f64, precision: f64) -> Self {
        GaussianPrior { mean, precision }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionPrior {
    Gamma { shape: f64, rate: f64 },
    Fixed(f64),
}

impl PrecisionPrior {
    /// Used for any level precision the user leaves unspecified.
    pub const DEFAULT: PrecisionPrior = PrecisionPrior::Gamma { shape: 1.0, rate: 0.00005 };

    pub fn is_fixed(&self) -> bool {
        matches!(self, PrecisionPrior::Fixed(_))
    }

    pub fn default_initial(&self) -> f64 {
        match *self {
            PrecisionPrior::Gamma { shape, rate } => shape / rate,
            PrecisionPrior::Fixed(v) => v,
        }
    }
}

/// One error-prone covariate and the mechanisms acting on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpec {
    pub variable: String,
    pub types: BTreeSet<ErrorType>,
    pub repeated: bool,
    /// Per-observation multiplier on the classical error precision.
    pub scaling: Option<Vec<f64>>,
}

impl ErrorSpec {
    pub fn new(variable: &str, types: &[ErrorType]) -> Self {
        ErrorSpec {
            variable: variable.to_string(),
            types: types.iter().copied().collect(),
            repeated: false,
            scaling: None,
        }
    }

    pub fn has(&self, t: ErrorType) -> bool {
        self.types.contains(&t)
    }

    /// An imputation level exists whenever the covariate itself is unobserved somewhere.
    pub fn needs_imputation(&self) -> bool {
        self.has(ErrorType::Classical) || self.has(ErrorType::Missing)
    }
}

/// User-supplied priors. Anything left out is filled by [`resolve_priors`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorSpec {
    /// Explicit priors keyed by coefficient name, e.g. `beta.z1`.
    pub coefficients: BTreeMap<String, GaussianPrior>,
    /// Prior for `beta.<errvar>`, keyed by error variable.
    pub beta_error: BTreeMap<String, GaussianPrior>,
    /// Prior for `gamma.<errvar>`, keyed by error variable.
    pub gamma_error: BTreeMap<String, GaussianPrior>,
    /// Keyed by precision parameter name, e.g. `tau.moi`, `tau.sbp.classical`.
    pub precisions: BTreeMap<String, PrecisionPrior>,
    pub initial: BTreeMap<String, f64>,
}

/// Fully resolved priors for every parameter in a registry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorSet {
    pub coefficients: BTreeMap<String, GaussianPrior>,
    pub precisions: BTreeMap<String, PrecisionPrior>,
    pub initial: BTreeMap<String, f64>,
}

impl PriorSet {
    pub fn coefficient(&self, name: &str) -> GaussianPrior {
        self.coefficients[name]
    }

    pub fn precision(&self, name: &str) -> PrecisionPrior {
        self.precisions[name]
    }

    pub fn initial(&self, name: &str) -> f64 {
        self.initial[name]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub formula_moi: Formula,
    /// One entry per error variable; `None` is only legal for Berkson-only variables.
    pub formula_imp: Vec<Option<Formula>>,
    /// One entry per error variable, or empty when no missingness model is wanted.
    pub formula_mis: Vec<Option<Formula>>,
    pub family_moi: Family,
    pub errors: Vec<ErrorSpec>,
    pub priors: PriorSpec,
}

impl ModelSpec {
    pub fn imputation_formula(&self, k: usize) -> Option<&Formula> {
        self.formula_imp.get(k).and_then(Option::as_ref)
    }

    pub fn missingness_formula(&self, k: usize) -> Option<&Formula> {
        self.formula_mis.get(k).and_then(Option::as_ref)
    }
}

pub fn tau_moi_name() -> String {
    "tau.moi".to_string()
}

pub fn tau_name(var: &str, level: &str) -> String {
    format!("tau.{var}.{level}")
}

/// An observed version `w` of a covariate, one per classical repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalLevel {
    pub column: String,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationLevel {
    pub formula: Formula,
    pub design: crate::formula::DesignMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessLevel {
    pub formula: Formula,
    /// 1.0 where the covariate is unobserved.
    pub indicator: Vec<f64>,
    pub design: LevelDesign,
}

/// All levels attached to one error-prone covariate.
///
/// The sampler carries a *base* latent vector per variable: the quantity the
/// classical repeats measure and the imputation model describes. Without a
/// Berkson level the base is the covariate `x` entering the model of
/// interest. With a Berkson level the base is the intermediate `r` and `x`
/// is a second latent vector with `x ~ N(r, tau_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBlock {
    pub variable: String,
    pub types: BTreeSet<ErrorType>,
    pub classical: Vec<ClassicalLevel>,
    /// Multiplies the classical precision per observation.
    pub scaling: Vec<f64>,
    pub berkson: bool,
    /// Base entries held at their observed value.
    pub pinned: Vec<bool>,
    /// Observed base value where pinned; entries elsewhere are unused.
    pub pinned_values: Vec<f64>,
    pub imputation: Option<ImputationLevel>,
    pub missingness: Option<MissingnessLevel>,
    /// Rows where no version of the covariate is observed.
    pub missing_rows: Vec<usize>,
}

impl ErrorBlock {
    pub fn has(&self, t: ErrorType) -> bool {
        self.types.contains(&t)
    }

    pub fn n_levels(&self) -> usize {
        self.classical.len()
            + usize::from(self.berkson)
            + usize::from(self.imputation.is_some())
            + usize::from(self.missingness.is_some())
    }

    pub fn tau_classical(&self) -> Option<String> {
        (!self.classical.is_empty()).then(|| tau_name(&self.variable, "classical"))
    }

    pub fn tau_berkson(&self) -> Option<String> {
        self.berkson.then(|| tau_name(&self.variable, "berkson"))
    }

    pub fn tau_imp(&self) -> Option<String> {
        self.imputation.as_ref().map(|_| tau_name(&self.variable, "imp"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub n: usize,
    pub family: Family,
    pub formula_moi: Formula,
    pub response: Vec<f64>,
    pub moi_design: LevelDesign,
    pub errors: Vec<ErrorBlock>,
    pub registry: Registry,
    pub priors: PriorSet,
}

impl JointModel {
    pub fn n_levels(&self) -> usize {
        1 + self.errors.iter().map(ErrorBlock::n_levels).sum::<usize>()
    }

    pub fn error_variables(&self) -> Vec<String> {
        self.errors.iter().map(|e| e.variable.clone()).collect()
    }
}
