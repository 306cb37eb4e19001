use crate::model::JointModel;

/// Current values for one error-prone covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    /// Covariate entering the model of interest and the missingness model.
    pub x: Vec<f64>,
    /// Intermediate covariate under a Berkson level; `None` otherwise.
    pub r: Option<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau_classical: Option<f64>,
    pub tau_berkson: Option<f64>,
    pub tau_imp: Option<f64>,
    pub omega_mis: Vec<f64>,
}

impl ErrorState {
    /// The latent vector the classical and imputation levels describe.
    pub fn base(&self) -> &[f64] {
        self.r.as_deref().unwrap_or(&self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub beta: Vec<f64>,
    pub tau_moi: Option<f64>,
    pub omega_moi: Vec<f64>,
    pub errors: Vec<ErrorState>,
}

impl SamplerState {
    /// Coefficients at their prior means, precisions at their initial values,
    /// latents at the observed value or repeat mean where available and at
    /// the imputation predictor (with `alpha` at its prior mean) elsewhere.
    pub fn initial(model: &JointModel) -> Self {
        let p = &model.priors;
        let n = model.n;
        let prior_means = |names: &[String]| -> Vec<f64> {
            names.iter().map(|nm| p.coefficient(nm).mean).collect()
        };
        let errors = model
            .errors
            .iter()
            .map(|b| {
                let mut base = vec![f64::NAN; n];
                for i in 0..n {
                    if b.pinned[i] {
                        base[i] = b.pinned_values[i];
                        continue;
                    }
                    let obs: Vec<f64> = b
                        .classical
                        .iter()
                        .filter(|l| l.observed[i])
                        .map(|l| l.values[i])
                        .collect();
                    if !obs.is_empty() {
                        base[i] = obs.iter().sum::<f64>() / obs.len() as f64;
                    }
                }
                let alpha = b.imputation.as_ref().map_or_else(Vec::new, |l| prior_means(&l.design.names));
                if let Some(imp) = &b.imputation {
                    let d = &imp.design;
                    for (i, v) in base.iter_mut().enumerate() {
                        if !v.is_finite() {
                            *v = d.row(i).iter().zip(&alpha).map(|(a, c)| a * c).sum();
                        }
                    }
                }
                let known: Vec<f64> = base.iter().copied().filter(|v| v.is_finite()).collect();
                let fill = if known.is_empty() { 0.0 } else { known.iter().sum::<f64>() / known.len() as f64 };
                for v in &mut base {
                    if !v.is_finite() {
                        *v = fill;
                    }
                }
                let tau = |name: Option<String>| name.map(|nm| p.initial(&nm));
                ErrorState {
                    x: base.clone(),
                    r: b.berkson.then_some(base),
                    alpha,
                    gamma: b.missingness.as_ref().map_or_else(Vec::new, |l| prior_means(&l.design.names)),
                    tau_classical: tau(b.tau_classical()),
                    tau_berkson: tau(b.tau_berkson()),
                    tau_imp: tau(b.tau_imp()),
                    omega_mis: if b.missingness.is_some() { vec![0.25; n] } else { Vec::new() },
                }
            })
            .collect();
        let binomial = model.family == crate::model::Family::Binomial;
        SamplerState {
            beta: prior_means(&model.moi_design.names),
            tau_moi: (!binomial).then(|| p.initial("tau.moi")),
            omega_moi: if binomial { vec![0.25; n] } else { Vec::new() },
            errors,
        }
    }

    /// Latent covariates entering the model of interest, one slice per error variable.
    pub fn latents(&self) -> Vec<&[f64]> {
        self.errors.iter().map(|e| e.x.as_slice()).collect()
    }

    /// Parameter values in registry order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.beta.clone();
        for e in &self.errors {
            out.extend_from_slice(&e.alpha);
            out.extend_from_slice(&e.gamma);
        }
        out.extend(self.tau_moi);
        for e in &self.errors {
            out.extend(e.tau_classical);
            out.extend(e.tau_berkson);
            out.extend(e.tau_imp);
        }
        out
    }

    /// Name of the first non-finite parameter or latent value, if any.
    pub fn first_non_finite(&self, model: &JointModel) -> Option<String> {
        let names = model.registry.params();
        if let Some(j) = self.params().iter().position(|v| !v.is_finite()) {
            return Some(names[j].name.clone());
        }
        for (b, e) in model.errors.iter().zip(&self.errors) {
            if let Some(i) = e.x.iter().position(|v| !v.is_finite()) {
                return Some(format!("latent {}[{}]", b.variable, i + 1));
            }
            if let Some(i) = e.r.as_ref().and_then(|r| r.iter().position(|v| !v.is_finite())) {
                return Some(format!("latent Berkson base of {}[{}]", b.variable, i + 1));
            }
        }
        None
    }
}
