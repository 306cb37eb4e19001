use std::collections::HashMap;

use super::{
    tau_moi_name, validate_spec, ClassicalLevel, ErrorBlock, ErrorType, Family, GaussianPrior,
    ImputationLevel, JointModel, LevelDesign, MissingnessLevel, ModelError, ModelSpec,
    PrecisionPrior, PriorSet, Registry,
};
use crate::data::Dataset;
use crate::formula::{build_design, Naming};

/// Validates `spec` against `data` and builds the joint model with priors resolved.
pub fn assemble_joint_model(spec: &ModelSpec, data: &Dataset) -> Result<JointModel, ModelError> {
    let errors: Vec<_> = validate_spec(spec, data).into_iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(ModelError::Invalid(errors));
    }

    let n = data.nrows();
    let latent_vars: Vec<String> = spec.errors.iter().map(|e| e.variable.clone()).collect();
    let moi_design =
        LevelDesign::new(&spec.formula_moi, data, &latent_vars, &Naming::ModelOfInterest)?;
    let response = data.column(&spec.formula_moi.response).expect("validated").values.clone();

    let mut blocks = Vec::with_capacity(spec.errors.len());
    for (k, e) in spec.errors.iter().enumerate() {
        let var = e.variable.as_str();
        let obs_cols = if e.repeated { data.repeat_columns(var) } else { vec![var.to_string()] };
        let unobserved: Vec<bool> = (0..n)
            .map(|i| obs_cols.iter().all(|c| data.column(c).unwrap().missing[i]))
            .collect();

        let classical: Vec<ClassicalLevel> = if e.has(ErrorType::Classical) {
            obs_cols
                .iter()
                .map(|c| {
                    let col = data.column(c).unwrap();
                    ClassicalLevel {
                        column: c.clone(),
                        values: col.values.clone(),
                        observed: col.missing.iter().map(|m| !m).collect(),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let scaling = match (&e.scaling, e.has(ErrorType::Classical)) {
            (Some(s), true) => s.clone(),
            _ => vec![1.0; n],
        };

        let (pinned, pinned_values) = if classical.is_empty() {
            let col = data.column(var).unwrap();
            let values = col.values.iter().zip(&col.missing).map(|(v, m)| if *m { 0.0 } else { *v });
            (col.missing.iter().map(|m| !m).collect(), values.collect())
        } else {
            (vec![false; n], vec![0.0; n])
        };

        let imputation = match spec.imputation_formula(k) {
            Some(f) if e.needs_imputation() => Some(ImputationLevel {
                formula: f.clone(),
                design: build_design(f, data, &HashMap::new(), &Naming::Imputation(var.into()))?,
            }),
            _ => None,
        };
        let missingness = match spec.missingness_formula(k) {
            Some(f) => Some(MissingnessLevel {
                formula: f.clone(),
                indicator: unobserved.iter().map(|&u| if u { 1.0 } else { 0.0 }).collect(),
                design: LevelDesign::new(f, data, &latent_vars, &Naming::Missingness(var.into()))?,
            }),
            None => None,
        };

        blocks.push(ErrorBlock {
            variable: var.to_string(),
            types: e.types.clone(),
            classical,
            scaling,
            berkson: e.has(ErrorType::Berkson),
            pinned,
            pinned_values,
            imputation,
            missingness,
            missing_rows: (0..n).filter(|&i| unobserved[i]).collect(),
        });
    }

    let mut names: Vec<String> = moi_design.names.clone();
    for b in &blocks {
        if let Some(imp) = &b.imputation {
            names.extend(imp.design.names.iter().cloned());
        }
        if let Some(mis) = &b.missingness {
            names.extend(mis.design.names.iter().cloned());
        }
    }
    if spec.family_moi == Family::Gaussian {
        names.push(tau_moi_name());
    }
    for b in &blocks {
        names.extend(b.tau_classical());
        names.extend(b.tau_berkson());
        names.extend(b.tau_imp());
    }
    let registry = Registry::from_names(&names, &latent_vars);

    let mut model = JointModel {
        n,
        family: spec.family_moi,
        formula_moi: spec.formula_moi.clone(),
        response,
        moi_design,
        errors: blocks,
        registry,
        priors: PriorSet::default(),
    };
    model.priors = resolve_priors(spec, &model)?;
    Ok(model)
}

fn check_gaussian(name: &str, p: GaussianPrior) -> Result<GaussianPrior, ModelError> {
    if p.mean.is_finite() && p.precision.is_finite() && p.precision > 0.0 {
        Ok(p)
    } else {
        Err(ModelError::Prior(format!(
            "prior for {name} needs a finite mean and positive precision, got ({}, {})",
            p.mean, p.precision
        )))
    }
}

fn check_precision(name: &str, p: PrecisionPrior) -> Result<PrecisionPrior, ModelError> {
    let ok = match p {
        PrecisionPrior::Gamma { shape, rate } => {
            shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0
        }
        PrecisionPrior::Fixed(v) => v.is_finite() && v > 0.0,
    };
    if ok {
        Ok(p)
    } else {
        Err(ModelError::Prior(format!("invalid precision prior for {name}: {p:?}")))
    }
}

/// Fills every coefficient and precision of the registry with a prior and
/// an initial value, taking user choices where given and defaults otherwise.
pub fn resolve_priors(spec: &ModelSpec, model: &JointModel) -> Result<PriorSet, ModelError> {
    let user = &spec.priors;
    let mut out = PriorSet::default();
    let error_vars = model.error_variables();

    for key in user.precisions.keys().chain(user.initial.keys()) {
        if model.registry.index_of(key).is_none() {
            if key == "tau.moi" && model.family == Family::Binomial {
                if let Some(PrecisionPrior::Fixed(_)) = user.precisions.get(key) {
                    return Err(ModelError::Prior(
                        "the binomial model of interest has no precision to fix".into(),
                    ));
                }
                continue;
            }
            return Err(ModelError::Prior(format!("prior given for unknown level {key:?}")));
        }
    }
    for key in user.coefficients.keys() {
        if model.registry.index_of(key).is_none() {
            return Err(ModelError::Prior(format!("prior given for unknown coefficient {key:?}")));
        }
    }

    for p in model.registry.params() {
        let name = p.name.as_str();
        if name.starts_with("tau.") {
            let prior = check_precision(
                name,
                user.precisions.get(name).copied().unwrap_or(PrecisionPrior::DEFAULT),
            )?;
            let init = match prior {
                PrecisionPrior::Fixed(v) => v,
                _ => user.initial.get(name).copied().unwrap_or_else(|| prior.default_initial()),
            };
            if !(init.is_finite() && init > 0.0) {
                return Err(ModelError::Prior(format!("initial value for {name} must be positive")));
            }
            out.precisions.insert(name.to_string(), prior);
            out.initial.insert(name.to_string(), init);
            continue;
        }
        let error_prior = error_vars.iter().find_map(|v| {
            if name == format!("beta.{v}") {
                user.beta_error.get(v)
            } else if name == format!("gamma.{v}") {
                user.gamma_error.get(v)
            } else {
                None
            }
        });
        let prior = error_prior
            .or_else(|| user.coefficients.get(name))
            .copied()
            .unwrap_or(GaussianPrior::DEFAULT);
        out.coefficients.insert(name.to_string(), check_gaussian(name, prior)?);
    }
    Ok(out)
}
