use std::collections::BTreeSet;
use std::fmt;

use super::{ErrorType, Family, ModelSpec, PrecisionPrior};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into() }
    }

    fn warning(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Columns that carry the observed version of error variable `var`.
fn observation_columns(spec_repeated: bool, var: &str, data: &Dataset) -> Vec<String> {
    if spec_repeated {
        data.repeat_columns(var)
    } else if data.has_column(var) {
        vec![var.to_string()]
    } else {
        Vec::new()
    }
}

/// Checks a specification against a dataset. Never fails; problems come back
/// as diagnostics and any with [`Severity::Error`] block assembly.
pub fn validate_spec(spec: &ModelSpec, data: &Dataset) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = data.nrows();
    let error_vars: Vec<&str> = spec.errors.iter().map(|e| e.variable.as_str()).collect();
    // Columns whose missing cells are legitimate.
    let mut maskable: BTreeSet<String> = BTreeSet::new();
    // Columns the model reads, apart from error variables.
    let mut used: BTreeSet<String> = BTreeSet::new();

    if n == 0 {
        out.push(Diagnostic::error("dataset has no rows"));
    }

    let moi = &spec.formula_moi;
    if !data.has_column(&moi.response) {
        out.push(Diagnostic::error(format!("column {:?} not found in data", moi.response)));
    } else {
        used.insert(moi.response.clone());
        if spec.family_moi == Family::Binomial {
            let col = data.column(&moi.response).unwrap();
            if col.values.iter().zip(&col.missing).any(|(v, m)| !*m && *v != 0.0 && *v != 1.0) {
                out.push(Diagnostic::error(format!(
                    "binomial response {:?} must be coded 0/1",
                    moi.response
                )));
            }
        }
    }
    for v in moi.variables() {
        if error_vars.contains(&v) {
            continue;
        }
        if data.has_column(v) {
            used.insert(v.to_string());
        } else {
            out.push(Diagnostic::error(format!("column {v:?} not found in data")));
        }
    }

    let k = spec.errors.len();
    if spec.formula_imp.len() != k {
        out.push(Diagnostic::error(format!(
            "expected {k} imputation formula entries (one per error variable), got {}",
            spec.formula_imp.len()
        )));
    }
    if !spec.formula_mis.is_empty() && spec.formula_mis.len() != k {
        out.push(Diagnostic::error(format!(
            "expected {k} missingness formula entries (one per error variable), got {}",
            spec.formula_mis.len()
        )));
    }

    for (idx, e) in spec.errors.iter().enumerate() {
        let var = e.variable.as_str();
        if error_vars[..idx].contains(&var) {
            out.push(Diagnostic::error(format!("error variable {var:?} listed twice")));
            continue;
        }
        if e.types.is_empty() {
            out.push(Diagnostic::error(format!("error variable {var:?} has no error type")));
            continue;
        }
        if !moi.mentions(var) {
            out.push(Diagnostic::error(format!(
                "error variable {var:?} not in model of interest"
            )));
        }
        if e.repeated && !e.has(ErrorType::Classical) {
            out.push(Diagnostic::error(format!(
                "repeated observations of {var:?} require the classical error type"
            )));
        }

        let obs_cols = observation_columns(e.repeated, var, data);
        if e.repeated && obs_cols.len() < 2 {
            out.push(Diagnostic::error(format!(
                "expected at least 2 repeat columns {var}1, {var}2, ... for {var:?}, found {}",
                obs_cols.len()
            )));
        } else if obs_cols.is_empty() {
            out.push(Diagnostic::error(format!("column {var:?} not found in data")));
        }
        maskable.extend(obs_cols.iter().cloned());

        if !obs_cols.is_empty() && n > 0 {
            let unobserved = (0..n)
                .filter(|&i| obs_cols.iter().all(|c| data.column(c).unwrap().missing[i]))
                .count();
            let any_masked =
                obs_cols.iter().any(|c| data.column(c).unwrap().n_missing() > 0);
            if unobserved == n {
                out.push(Diagnostic::error(format!("error variable {var:?} is missing everywhere")));
            }
            if e.types == BTreeSet::from([ErrorType::Missing]) && !any_masked {
                out.push(Diagnostic::warning(format!(
                    "{var:?} has error type \"missing\" but is fully observed"
                )));
            }
            if !e.has(ErrorType::Missing) && any_masked {
                if e.has(ErrorType::Classical) {
                    out.push(Diagnostic::warning(format!(
                        "{var:?} has missing entries; they are imputed although error type \"missing\" was not given"
                    )));
                } else {
                    out.push(Diagnostic::error(format!(
                        "{var:?} has missing entries; add error type \"missing\""
                    )));
                }
            }
            if spec.missingness_formula(idx).is_some() && unobserved == 0 {
                out.push(Diagnostic::warning(format!(
                    "missingness model requested for {var:?}, which has no missing values"
                )));
            }
        }

        if let Some(s) = &e.scaling {
            if s.len() != n {
                out.push(Diagnostic::error(format!(
                    "classical error scaling for {var:?} has length {}, expected {n}",
                    s.len()
                )));
            } else if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                out.push(Diagnostic::error(format!(
                    "classical error scaling for {var:?} must be strictly positive"
                )));
            }
            if !e.has(ErrorType::Classical) {
                out.push(Diagnostic::warning(format!(
                    "classical error scaling given for {var:?} without classical error; ignored"
                )));
            }
        }

        if e.has(ErrorType::Classical)
            && !e.repeated
            && !spec.priors.precisions.contains_key(&super::tau_name(var, "classical"))
        {
            out.push(Diagnostic::warning(format!(
                "classical error precision of {var:?} is not identifiable without repeats or an informative prior"
            )));
        }

        match spec.imputation_formula(idx) {
            None if e.needs_imputation() => out.push(Diagnostic::error(format!(
                "imputation formula required for {var:?} (error types {})",
                e.types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
            ))),
            None => {}
            Some(f) if !e.needs_imputation() => {
                let _ = f;
                out.push(Diagnostic::warning(format!(
                    "imputation formula for Berkson-only {var:?} is not used"
                )));
            }
            Some(f) => {
                if f.response != var {
                    out.push(Diagnostic::error(format!(
                        "imputation formula response {:?} should be the error variable {var:?}",
                        f.response
                    )));
                }
                for v in f.variables() {
                    if v == var {
                        out.push(Diagnostic::error(format!(
                            "error variable {var:?} appears in its own imputation formula"
                        )));
                    } else if error_vars.contains(&v) {
                        out.push(Diagnostic::error(format!(
                            "imputation formula for {var:?} uses error variable {v:?}; only error-free covariates are allowed"
                        )));
                    } else if data.has_column(v) {
                        used.insert(v.to_string());
                    } else {
                        out.push(Diagnostic::error(format!("column {v:?} not found in data")));
                    }
                }
            }
        }

        if let Some(f) = spec.missingness_formula(idx) {
            for v in f.variables() {
                if v == var {
                    continue;
                }
                if error_vars.contains(&v) {
                    out.push(Diagnostic::error(format!(
                        "missingness formula for {var:?} uses another error variable {v:?}"
                    )));
                } else if data.has_column(v) {
                    used.insert(v.to_string());
                } else {
                    out.push(Diagnostic::error(format!("column {v:?} not found in data")));
                }
            }
        }
    }

    for c in used.difference(&maskable) {
        if let Some(col) = data.column(c) {
            let m = col.n_missing();
            if m > 0 {
                out.push(Diagnostic::error(format!(
                    "column {c:?} has {m} missing values but is not an error variable"
                )));
            }
        }
    }

    if spec.family_moi == Family::Binomial {
        if let Some(PrecisionPrior::Fixed(_)) = spec.priors.precisions.get("tau.moi") {
            out.push(Diagnostic::error(
                "the binomial model of interest has no precision to fix".to_string(),
            ));
        }
    }
    out
}
