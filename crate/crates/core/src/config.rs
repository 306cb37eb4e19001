//! Fit configuration files (TOML).
//!
//! Keys mirror the arguments of the fitting function. Per-variable settings
//! accept either a single value, applied to every error variable, or a list
//! with one entry per error variable. A flat `error_type` list gives the
//! types of every variable; a nested list gives them per variable. Empty
//! strings in `formula_imp` / `formula_mis` mark a variable without that
//! level.
//!
//! ```toml
//! formula_moi = "y ~ x + z1 + z2"
//! formula_imp = "x ~ z1 + z2"
//! formula_mis = "m ~ z1 + z2 + x"
//! family_moi = "gaussian"
//! error_variable = "x"
//! error_type = "missing"
//! prior_prec_moi = [0.01, 0.01]
//! prior_prec_imp = [1, 0.00005]
//! initial_prec_moi = 4
//!
//! [prior_coefficients]
//! "beta.z1" = [0, 0.001]
//!
//! [sampler]
//! iterations = 5000
//! burnin = 1000
//! chains = 4
//! seed = 1
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::formula::{parse_formula, FormulaError};
use crate::model::{
    tau_name, ErrorSpec, ErrorType, Family, GaussianPrior, ModelSpec, PrecisionPrior, PriorSpec,
};
use crate::sampler::ChainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum TypeList {
    One(ErrorType),
    Flat(Vec<ErrorType>),
    Nested(Vec<Vec<ErrorType>>),
}

/// Per-observation classical error scaling: a data column or inline values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scaling {
    Column(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        SamplerSettings { iterations: c.iterations, burnin: c.burnin, thin: c.thin, chains: c.chains, seed: c.seed }
    }
}

impl From<SamplerSettings> for ChainConfig {
    fn from(s: SamplerSettings) -> Self {
        ChainConfig { iterations: s.iterations, burnin: s.burnin, thin: s.thin, chains: s.chains, seed: s.seed }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    formula_moi: String,
    formula_imp: Option<OneOrMany<String>>,
    formula_mis: Option<OneOrMany<String>>,
    family_moi: Family,
    error_variable: OneOrMany<String>,
    error_type: TypeList,
    repeated_observations: Option<OneOrMany<bool>>,
    classical_error_scaling: Option<Scaling>,
    prior_beta_error: Option<OneOrMany<[f64; 2]>>,
    prior_gamma_error: Option<OneOrMany<[f64; 2]>>,
    prior_prec_moi: Option<[f64; 2]>,
    prior_prec_classical: Option<OneOrMany<[f64; 2]>>,
    prior_prec_berkson: Option<OneOrMany<[f64; 2]>>,
    prior_prec_imp: Option<OneOrMany<[f64; 2]>>,
    initial_prec_moi: Option<f64>,
    initial_prec_classical: Option<OneOrMany<f64>>,
    initial_prec_berkson: Option<OneOrMany<f64>>,
    initial_prec_imp: Option<OneOrMany<f64>>,
    fixed_prec_moi: Option<f64>,
    fixed_prec_classical: Option<OneOrMany<f64>>,
    fixed_prec_berkson: Option<OneOrMany<f64>>,
    fixed_prec_imp: Option<OneOrMany<f64>>,
    #[serde(default)]
    prior_coefficients: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    sampler: SamplerSettings,
}

/// A parsed configuration with every per-variable list expanded to one entry
/// per error variable (or left empty when not given).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub formula_moi: String,
    pub formula_imp: Vec<String>,
    pub formula_mis: Vec<String>,
    pub family_moi: Family,
    pub error_variable: Vec<String>,
    pub error_type: Vec<Vec<ErrorType>>,
    pub repeated_observations: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_error_scaling: Option<Scaling>,
    pub prior_beta_error: Vec<[f64; 2]>,
    pub prior_gamma_error: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_prec_moi: Option<[f64; 2]>,
    pub prior_prec_classical: Vec<[f64; 2]>,
    pub prior_prec_berkson: Vec<[f64; 2]>,
    pub prior_prec_imp: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_prec_moi: Option<f64>,
    pub initial_prec_classical: Vec<f64>,
    pub initial_prec_berkson: Vec<f64>,
    pub initial_prec_imp: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_prec_moi: Option<f64>,
    pub fixed_prec_classical: Vec<f64>,
    pub fixed_prec_berkson: Vec<f64>,
    pub fixed_prec_imp: Vec<f64>,
    pub prior_coefficients: BTreeMap<String, [f64; 2]>,
    pub sampler: SamplerSettings,
}

/// Expands a one-or-k list to exactly `k` entries; absent stays empty.
fn broadcast<T: Clone>(key: &str, v: Option<Vec<T>>, k: usize) -> Result<Vec<T>, ConfigError> {
    match v {
        None => Ok(Vec::new()),
        Some(v) if v.is_empty() => Ok(Vec::new()),
        Some(v) if v.len() == k => Ok(v),
        Some(v) if v.len() == 1 => Ok(vec![v[0].clone(); k]),
        Some(v) => Err(ConfigError::Invalid(format!(
            "{key} has {} entries but there are {k} error variables",
            v.len()
        ))),
    }
}

impl FitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let error_variable = raw.error_variable.into_vec();
        let k = error_variable.len();
        let error_type = match raw.error_type {
            TypeList::One(t) => vec![vec![t]; k],
            TypeList::Flat(ts) => vec![ts; k],
            TypeList::Nested(ts) if ts.len() == k => ts,
            TypeList::Nested(ts) => {
                return Err(ConfigError::Invalid(format!(
                    "error_type lists types for {} variables but there are {k} error variables",
                    ts.len()
                )))
            }
        };
        let many = |v: Option<OneOrMany<[f64; 2]>>| v.map(OneOrMany::into_vec);
        let many_f = |v: Option<OneOrMany<f64>>| v.map(OneOrMany::into_vec);
        let mut formula_imp = broadcast("formula_imp", raw.formula_imp.map(OneOrMany::into_vec), k)?;
        if formula_imp.is_empty() {
            formula_imp = vec![String::new(); k];
        }
        let repeated = broadcast(
            "repeated_observations",
            raw.repeated_observations.map(OneOrMany::into_vec),
            k,
        )?;
        let cfg = FitConfig {
            formula_moi: raw.formula_moi,
            formula_imp,
            formula_mis: broadcast("formula_mis", raw.formula_mis.map(OneOrMany::into_vec), k)?,
            family_moi: raw.family_moi,
            error_variable,
            error_type,
            repeated_observations: if repeated.is_empty() { vec![false; k] } else { repeated },
            classical_error_scaling: raw.classical_error_scaling,
            prior_beta_error: broadcast("prior_beta_error", many(raw.prior_beta_error), k)?,
            prior_gamma_error: broadcast("prior_gamma_error", many(raw.prior_gamma_error), k)?,
            prior_prec_moi: raw.prior_prec_moi,
            prior_prec_classical: broadcast("prior_prec_classical", many(raw.prior_prec_classical), k)?,
            prior_prec_berkson: broadcast("prior_prec_berkson", many(raw.prior_prec_berkson), k)?,
            prior_prec_imp: broadcast("prior_prec_imp", many(raw.prior_prec_imp), k)?,
            initial_prec_moi: raw.initial_prec_moi,
            initial_prec_classical: broadcast("initial_prec_classical", many_f(raw.initial_prec_classical), k)?,
            initial_prec_berkson: broadcast("initial_prec_berkson", many_f(raw.initial_prec_berkson), k)?,
            initial_prec_imp: broadcast("initial_prec_imp", many_f(raw.initial_prec_imp), k)?,
            fixed_prec_moi: raw.fixed_prec_moi,
            fixed_prec_classical: broadcast("fixed_prec_classical", many_f(raw.fixed_prec_classical), k)?,
            fixed_prec_berkson: broadcast("fixed_prec_berkson", many_f(raw.fixed_prec_berkson), k)?,
            fixed_prec_imp: broadcast("fixed_prec_imp", many_f(raw.fixed_prec_imp), k)?,
            prior_coefficients: raw.prior_coefficients,
            sampler: raw.sampler,
        };
        Ok(cfg)
    }

    /// Renders back to TOML; loading the output yields an equal config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn chain_config(&self) -> ChainConfig {
        self.sampler.into()
    }

    /// Builds the model specification, resolving a scaling column against `data`.
    pub fn to_model_spec(&self, data: &Dataset) -> Result<ModelSpec, ConfigError> {
        let k = self.error_variable.len();
        let parse_opt = |s: &String| -> Result<Option<crate::formula::Formula>, ConfigError> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_formula(s)?))
            }
        };
        let formula_moi = parse_formula(&self.formula_moi)?;
        let formula_imp = self.formula_imp.iter().map(parse_opt).collect::<Result<Vec<_>, _>>()?;
        let formula_mis = self.formula_mis.iter().map(parse_opt).collect::<Result<Vec<_>, _>>()?;

        let scaling = match &self.classical_error_scaling {
            None => None,
            Some(Scaling::Values(v)) => Some(v.clone()),
            Some(Scaling::Column(c)) => {
                let col = data.column(c).ok_or_else(|| {
                    ConfigError::Invalid(format!("classical_error_scaling column {c:?} not found in data"))
                })?;
                if col.n_missing() > 0 {
                    return Err(ConfigError::Invalid(format!(
                        "classical_error_scaling column {c:?} has missing values"
                    )));
                }
                Some(col.values.clone())
            }
        };

        let mut errors = Vec::with_capacity(k);
        for (idx, var) in self.error_variable.iter().enumerate() {
            let mut e = ErrorSpec::new(var, &self.error_type[idx]);
            e.repeated = self.repeated_observations[idx];
            if e.has(ErrorType::Classical) {
                e.scaling = scaling.clone();
            }
            errors.push(e);
        }

        let mut priors = PriorSpec::default();
        let gaussian = |name: &str, p: [f64; 2]| -> Result<GaussianPrior, ConfigError> {
            if p[1] > 0.0 && p[0].is_finite() && p[1].is_finite() {
                Ok(GaussianPrior::new(p[0], p[1]))
            } else {
                Err(ConfigError::Invalid(format!("{name} must be (mean, precision > 0), got {p:?}")))
            }
        };
        for (idx, var) in self.error_variable.iter().enumerate() {
            if let Some(p) = self.prior_beta_error.get(idx) {
                priors.beta_error.insert(var.clone(), gaussian("prior_beta_error", *p)?);
            }
            if let Some(p) = self.prior_gamma_error.get(idx) {
                priors.gamma_error.insert(var.clone(), gaussian("prior_gamma_error", *p)?);
            }
        }
        for (name, p) in &self.prior_coefficients {
            priors.coefficients.insert(name.clone(), gaussian(name, *p)?);
        }

        let mut set_level = |name: String,
                             prior: Option<&[f64; 2]>,
                             initial: Option<&f64>,
                             fixed: Option<&f64>|
         -> Result<(), ConfigError> {
            if let Some(v) = fixed {
                if prior.is_some() {
                    return Err(ConfigError::Invalid(format!(
                        "{name} is given both a prior and a fixed value"
                    )));
                }
                priors.precisions.insert(name.clone(), PrecisionPrior::Fixed(*v));
            } else if let Some(p) = prior {
                priors.precisions.insert(name.clone(), PrecisionPrior::Gamma { shape: p[0], rate: p[1] });
            }
            if let Some(v) = initial {
                if fixed.is_none() {
                    priors.initial.insert(name, *v);
                }
            }
            Ok(())
        };
        let moi_given =
            self.prior_prec_moi.is_some() || self.initial_prec_moi.is_some() || self.fixed_prec_moi.is_some();
        if moi_given && self.family_moi == Family::Gaussian {
            set_level(
                "tau.moi".into(),
                self.prior_prec_moi.as_ref(),
                self.initial_prec_moi.as_ref(),
                self.fixed_prec_moi.as_ref(),
            )?;
        } else if self.fixed_prec_moi.is_some() {
            return Err(ConfigError::Invalid("the binomial model of interest has no precision to fix".into()));
        }
        for (idx, e) in errors.iter().enumerate() {
            let var = &e.variable;
            if e.has(ErrorType::Classical) {
                set_level(
                    tau_name(var, "classical"),
                    self.prior_prec_classical.get(idx),
                    self.initial_prec_classical.get(idx),
                    self.fixed_prec_classical.get(idx),
                )?;
            }
            if e.has(ErrorType::Berkson) {
                set_level(
                    tau_name(var, "berkson"),
                    self.prior_prec_berkson.get(idx),
                    self.initial_prec_berkson.get(idx),
                    self.fixed_prec_berkson.get(idx),
                )?;
            }
            if e.needs_imputation() && formula_imp.get(idx).is_some_and(Option::is_some) {
                set_level(
                    tau_name(var, "imp"),
                    self.prior_prec_imp.get(idx),
                    self.initial_prec_imp.get(idx),
                    self.fixed_prec_imp.get(idx),
                )?;
            }
        }

        Ok(ModelSpec { formula_moi, formula_imp, formula_mis, family_moi: self.family_moi, errors, priors })
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<FitConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    FitConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAMINGHAM: &str = r#"
formula_moi = "disease ~ sbp + smoking"
formula_imp = "sbp ~ smoking"
family_moi = "binomial"
error_variable = "sbp"
error_type = ["classical"]
repeated_observations = true
prior_beta_error = [0, 0.01]
prior_prec_classical = [100, 1]
prior_prec_imp = [10, 1]
initial_prec_classical = 100
initial_prec_imp = 10
"#;

    const MISSING: &str = r#"
formula_moi = "y ~ x + z1 + z2"
formula_imp = "x ~ z1 + z2"
formula_mis = "m ~ z1 + z2 + x"
family_moi = "gaussian"
error_variable = "x"
error_type = "missing"
prior_beta_error = [0, 0.001]
prior_gamma_error = [0, 0.001]
prior_prec_moi = [0.01, 0.01]
prior_prec_imp = [1, 0.00005]
initial_prec_moi = 4
initial_prec_imp = 4

[sampler]
iterations = 5000
burnin = 1000
chains = 4
seed = 7
"#;

    fn framingham_data() -> Dataset {
        Dataset::from_columns(vec![
            ("disease".into(), vec![Some(0.0), Some(1.0), Some(0.0)]),
            ("sbp1".into(), vec![Some(0.1), Some(0.3), Some(-0.2)]),
            ("sbp2".into(), vec![Some(0.2), Some(0.25), Some(-0.1)]),
            ("smoking".into(), vec![Some(1.0), Some(0.0), Some(1.0)]),
        ])
        .unwrap()
    }

    #[test]
    fn framingham_config() {
        let c = FitConfig::from_toml_str(FRAMINGHAM).unwrap();
        assert_eq!(c.error_type, vec![vec![ErrorType::Classical]]);
        assert_eq!(c.repeated_observations, vec![true]);
        assert_eq!(c.prior_prec_classical, vec![[100.0, 1.0]]);
        assert_eq!(c.initial_prec_classical, vec![100.0]);
        let spec = c.to_model_spec(&framingham_data()).unwrap();
        assert_eq!(
            spec.priors.precisions["tau.sbp.classical"],
            PrecisionPrior::Gamma { shape: 100.0, rate: 1.0 }
        );
        assert_eq!(spec.priors.initial["tau.sbp.classical"], 100.0);
        assert_eq!(spec.priors.beta_error["sbp"], GaussianPrior::new(0.0, 0.01));
        assert_eq!(c.sampler, SamplerSettings::default());
    }

    #[test]
    fn missing_config() {
        let c = FitConfig::from_toml_str(MISSING).unwrap();
        assert_eq!(c.error_type, vec![vec![ErrorType::Missing]]);
        assert_eq!(c.prior_prec_moi, Some([0.01, 0.01]));
        assert_eq!(c.prior_prec_imp, vec![[1.0, 0.00005]]);
        assert_eq!(c.repeated_observations, vec![false]);
        assert_eq!(c.sampler.seed, 7);
        assert_eq!(c.sampler.thin, 1);
    }

    #[test]
    fn omitted_coefficient_prior_uses_default() {
        let (spec, data) = {
            let c = FitConfig::from_toml_str(FRAMINGHAM).unwrap();
            let d = framingham_data();
            (c.to_model_spec(&d).unwrap(), d)
        };
        let m = crate::model::assemble_joint_model(&spec, &data).unwrap();
        assert_eq!(m.priors.coefficient("beta.smoking"), GaussianPrior::new(0.0, 0.001));
    }

    #[test]
    fn round_trip() {
        for text in [FRAMINGHAM, MISSING] {
            let c = FitConfig::from_toml_str(text).unwrap();
            let again = FitConfig::from_toml_str(&c.to_toml_string()).unwrap();
            assert_eq!(c, again);
        }
        let mut c = FitConfig::from_toml_str(MISSING).unwrap();
        c.classical_error_scaling = Some(Scaling::Values(vec![1.0, 2.5]));
        c.prior_coefficients.insert("beta.z1".into(), [0.0, 0.5]);
        c.fixed_prec_imp = vec![3.0];
        assert_eq!(FitConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_files() {
        let unknown = format!("{FRAMINGHAM}\nnot_a_key = 1\n");
        assert!(matches!(FitConfig::from_toml_str(&unknown), Err(ConfigError::Parse(_))));
        let missing_family = FRAMINGHAM.replace("family_moi = \"binomial\"\n", "");
        let err = FitConfig::from_toml_str(&missing_family).unwrap_err();
        assert!(err.to_string().contains("family_moi"), "{err}");
        let bad_pair = FRAMINGHAM.replace("[100, 1]", "[100]");
        assert!(FitConfig::from_toml_str(&bad_pair).is_err());
        let bad_len = FRAMINGHAM.replace("repeated_observations = true", "repeated_observations = [true, false]");
        assert!(matches!(FitConfig::from_toml_str(&bad_len), Err(ConfigError::Invalid(_))));
        let unknown_sampler = format!("{MISSING}\nwarmup = 3\n");
        assert!(FitConfig::from_toml_str(&unknown_sampler).is_err());
    }

    #[test]
    fn nested_error_types() {
        let text = r#"
formula_moi = "y ~ x + w"
formula_imp = ["x ~ z", ""]
family_moi = "gaussian"
error_variable = ["x", "w"]
error_type = [["classical", "missing"], ["berkson"]]
prior_prec_classical = [10, 1]
"#;
        let c = FitConfig::from_toml_str(text).unwrap();
        assert_eq!(c.error_type[1], vec![ErrorType::Berkson]);
        assert_eq!(c.prior_prec_classical.len(), 2);
        let data = Dataset::from_columns(vec![
            ("y".into(), vec![Some(1.0), Some(2.0)]),
            ("x".into(), vec![Some(1.0), None]),
            ("w".into(), vec![Some(0.0), Some(1.0)]),
            ("z".into(), vec![Some(0.0), Some(1.0)]),
        ])
        .unwrap();
        let spec = c.to_model_spec(&data).unwrap();
        assert!(spec.imputation_formula(1).is_none());
        assert!(spec.priors.precisions.contains_key("tau.x.classical"));
        assert!(!spec.priors.precisions.contains_key("tau.w.classical"));
    }

    #[test]
    fn fixed_and_prior_conflict() {
        let text = FRAMINGHAM.replace("initial_prec_classical = 100", "fixed_prec_classical = 1e8");
        let c = FitConfig::from_toml_str(&text).unwrap();
        assert!(c.to_model_spec(&framingham_data()).is_err());
    }
}
