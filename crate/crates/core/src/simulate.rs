//! Scenario generators with known truth, and the naive fits they are
//! compared against.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Column, Dataset};
use crate::formula::{build_design, Formula, FormulaError, Naming};
use crate::model::Family;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("design matrix is singular; check for collinear or constant covariates")]
    Singular,
    #[error("logistic fit did not converge (possible separation)")]
    Separation,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Generating parameters of a simulated dataset, written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    /// Keyed by the parameter names a fit of the matching model reports.
    pub parameters: BTreeMap<String, f64>,
    pub x_true: Vec<f64>,
    /// True where the covariate was masked.
    pub missing: Vec<bool>,
}

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

fn std_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Covariate missing at random given `z2`:
/// `x ~ N(1 + 0.3 z1, 1)`, `logit P(m) = -1.5 - 0.5 z2`,
/// `y = 1 + 2x + 2z1 + 2z2 + N(0, 1)`.
/// Columns: `y`, `x` (masked), `x_true`, `z1`, `z2`.
pub fn simulate_missing_scenario(seed: u64, n: usize) -> Result<(Dataset, ScenarioTruth), SimulateError> {
    if n < 10 {
        return Err(SimulateError::InvalidArgument(format!("n must be at least 10, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z1 = std_normals(&mut rng, n);
    let z2 = std_normals(&mut rng, n);
    let x: Vec<f64> = z1.iter().map(|z| 1.0 + 0.3 * z + rng.sample::<f64, _>(StandardNormal)).collect();
    let m: Vec<bool> = z2.iter().map(|z| rng.random::<f64>() < logistic(-1.5 - 0.5 * z)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 2.0 * x[i] + 2.0 * z1[i] + 2.0 * z2[i] + rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut data = Dataset::default();
    let x_obs: Vec<Option<f64>> = x.iter().zip(&m).map(|(v, mi)| (!mi).then_some(*v)).collect();
    data.insert("y".into(), Column::from_values(y)).expect("fresh");
    data.insert("x".into(), Column::from_options(&x_obs)).expect("fresh");
    data.insert("x_true".into(), Column::from_values(x.clone())).expect("fresh");
    data.insert("z1".into(), Column::from_values(z1)).expect("fresh");
    data.insert("z2".into(), Column::from_values(z2)).expect("fresh");

    let parameters = [
        ("beta.0", 1.0),
        ("beta.x", 2.0),
        ("beta.z1", 2.0),
        ("beta.z2", 2.0),
        ("tau.moi", 1.0),
        ("alpha.x.0", 1.0),
        ("alpha.x.z1", 0.3),
        ("tau.x.imp", 1.0),
        ("gamma.x.0", -1.5),
        ("gamma.x.z1", 0.0),
        ("gamma.x.z2", -0.5),
        ("gamma.x", 0.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let truth =
        ScenarioTruth { scenario: "missing_mar".into(), seed, n, parameters, x_true: x, missing: m };
    Ok((data, truth))
}

/// Parameters and column names of the repeated-measurement scenario:
/// binary `z ~ Bernoulli(z_prob)`, `x ~ N(alpha_0 + alpha_z z, 1/tau_x)`,
/// repeats `w_j = x + N(0, 1/tau_u)` and a response on `(1, x, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatsScenario {
    pub response: String,
    pub covariate: String,
    pub variable: String,
    pub z_prob: f64,
    pub alpha_0: f64,
    pub alpha_z: f64,
    pub tau_x: f64,
    pub tau_u: f64,
    pub beta_0: f64,
    pub beta_x: f64,
    pub beta_z: f64,
    /// Residual precision of the gaussian response.
    pub tau_y: f64,
}

impl RepeatsScenario {
    /// Gaussian single-covariate setting with unit variances, where the
    /// reliability of the averaged repeats is exactly `k / (k + 1)`.
    pub fn attenuation() -> Self {
        RepeatsScenario {
            response: "y".into(),
            covariate: "z".into(),
            variable: "x".into(),
            z_prob: 0.5,
            alpha_0: 0.0,
            alpha_z: 0.0,
            tau_x: 1.0,
            tau_u: 1.0,
            beta_0: 1.0,
            beta_x: 2.0,
            beta_z: 1.0,
            tau_y: 1.0,
        }
    }

    /// Logistic replica of a two-visit blood-pressure cohort: standardized
    /// log blood pressure `sbp`, binary `smoking`, outcome `disease`.
    pub fn framingham() -> Self {
        RepeatsScenario {
            response: "disease".into(),
            covariate: "smoking".into(),
            variable: "sbp".into(),
            z_prob: 0.5,
            alpha_0: 0.0,
            alpha_z: -0.02,
            tau_x: 20.0,
            tau_u: 76.0,
            beta_0: -2.36,
            beta_x: 1.9,
            beta_z: 0.4,
            tau_y: 1.0,
        }
    }
}

/// Generates `k` classical-error repeats `<variable>1..<variable>k` of a
/// latent covariate plus `<variable>_true`, the covariate `z` and the response.
pub fn simulate_classical_repeats(
    seed: u64,
    n: usize,
    k: usize,
    scenario: &RepeatsScenario,
    family: Family,
) -> Result<(Dataset, ScenarioTruth), SimulateError> {
    if n == 0 {
        return Err(SimulateError::InvalidArgument("n must be positive".into()));
    }
    if k == 0 {
        return Err(SimulateError::InvalidArgument("at least one repeat is required".into()));
    }
    let s = scenario;
    if !(s.tau_x > 0.0 && s.tau_u > 0.0 && s.tau_y > 0.0) {
        return Err(SimulateError::InvalidArgument("precisions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> =
        (0..n).map(|_| if rng.random::<f64>() < s.z_prob { 1.0 } else { 0.0 }).collect();
    let sd_x = 1.0 / s.tau_x.sqrt();
    let x: Vec<f64> = z
        .iter()
        .map(|zi| s.alpha_0 + s.alpha_z * zi + sd_x * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let noise = Normal::new(0.0, 1.0 / s.tau_u.sqrt()).expect("positive sd");
    let repeats: Vec<Vec<f64>> =
        (0..k).map(|_| x.iter().map(|xi| xi + noise.sample(&mut rng)).collect()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = s.beta_0 + s.beta_x * x[i] + s.beta_z * z[i];
            match family {
                Family::Gaussian => eta + rng.sample::<f64, _>(StandardNormal) / s.tau_y.sqrt(),
                Family::Binomial => {
                    if rng.random::<f64>() < logistic(eta) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();

    let mut data = Dataset::default();
    data.insert(s.response.clone(), Column::from_values(y)).expect("fresh");
    data.insert(s.covariate.clone(), Column::from_values(z)).expect("fresh");
    for (j, w) in repeats.into_iter().enumerate() {
        data.insert(format!("{}{}", s.variable, j + 1), Column::from_values(w)).expect("fresh");
    }
    data.insert(format!("{}_true", s.variable), Column::from_values(x.clone())).expect("fresh");

    let v = &s.variable;
    let c = &s.covariate;
    let mut parameters: BTreeMap<String, f64> = [
        ("beta.0".to_string(), s.beta_0),
        (format!("beta.{v}"), s.beta_x),
        (format!("beta.{c}"), s.beta_z),
        (format!("alpha.{v}.0"), s.alpha_0),
        (format!("alpha.{v}.{c}"), s.alpha_z),
        (format!("tau.{v}.imp"), s.tau_x),
        (format!("tau.{v}.classical"), s.tau_u),
    ]
    .into_iter()
    .collect();
    if family == Family::Gaussian {
        parameters.insert("tau.moi".into(), s.tau_y);
    }
    let truth = ScenarioTruth {
        scenario: "classical_repeats".into(),
        seed,
        n,
        parameters,
        x_true: x,
        missing: vec![false; n],
    };
    Ok((data, truth))
}

/// `var_x / (var_x + var_u_effective)`: the expected multiplicative bias of a
/// naive single-covariate slope. With `k` averaged repeats pass `sigma_u^2 / k`.
///
/// # Panics
/// If either variance is not strictly positive.
pub fn attenuation_factor(var_x: f64, var_u_effective: f64) -> f64 {
    assert!(var_x > 0.0 && var_u_effective > 0.0, "variances must be positive");
    var_x / (var_x + var_u_effective)
}

/// Maximum-likelihood fit that ignores measurement error.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFit {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Rows used after dropping incomplete ones.
    pub n_used: usize,
}

impl NaiveFit {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.estimates[j], self.std_errors[j]))
    }

    /// Wald interval `estimate +- 1.96 se`.
    pub fn interval(&self, name: &str) -> Option<(f64, f64)> {
        self.get(name).map(|(b, se)| (b - 1.96 * se, b + 1.96 * se))
    }
}

/// Fits `formula` by least squares (gaussian) or logistic IRLS (binomial) on
/// complete rows. A formula variable absent from `data` but with repeat
/// columns `<v>1, <v>2, ...` is replaced by the per-row mean of its observed
/// repeats.
pub fn naive_fit(formula: &Formula, data: &Dataset, family: Family) -> Result<NaiveFit, SimulateError> {
    let n = data.nrows();
    let mut substitute: HashMap<String, Vec<f64>> = HashMap::new();
    let mut needed: Vec<&str> = vec![formula.response.as_str()];
    needed.extend(formula.variables());
    for v in &needed {
        if data.has_column(v) {
            continue;
        }
        let reps = data.repeat_columns(v);
        if reps.is_empty() {
            return Err(FormulaError::UnknownVariable(v.to_string()).into());
        }
        let mean = (0..n)
            .map(|i| {
                let obs: Vec<f64> = reps.iter().filter_map(|c| data.column(c).unwrap().get(i)).collect();
                if obs.is_empty() {
                    f64::NAN
                } else {
                    obs.iter().sum::<f64>() / obs.len() as f64
                }
            })
            .collect();
        substitute.insert(v.to_string(), mean);
    }
    let value = |v: &str, i: usize| -> f64 {
        substitute.get(v).map_or_else(|| data.column(v).unwrap().values[i], |c| c[i])
    };
    let keep: Vec<bool> = (0..n).map(|i| needed.iter().all(|v| value(v, i).is_finite())).collect();
    let sub = data.filter_rows(&keep);
    let sub_cols: HashMap<String, Vec<f64>> = substitute
        .iter()
        .map(|(k, c)| (k.clone(), c.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect()))
        .collect();
    let m = sub.nrows();
    let design = build_design(formula, &sub, &sub_cols, &Naming::ModelOfInterest)?;
    let p = design.ncols;
    if m <= p {
        return Err(SimulateError::InvalidArgument(format!(
            "{m} complete rows is too few for {p} coefficients"
        )));
    }
    let x = DMatrix::from_row_slice(m, p, &design.values);
    let y: DVector<f64> = match sub_cols.get(&formula.response) {
        Some(c) => DVector::from_vec(c.clone()),
        None => DVector::from_vec(sub.column(&formula.response).unwrap().values.clone()),
    };

    let (estimates, cov) = match family {
        Family::Gaussian => {
            let xtx = x.transpose() * &x;
            let inv = xtx.try_inverse().ok_or(SimulateError::Singular)?;
            let b = &inv * x.transpose() * &y;
            let resid = &y - &x * &b;
            let s2 = resid.norm_squared() / (m - p) as f64;
            (b, inv * s2)
        }
        Family::Binomial => irls(&x, &y)?,
    };
    Ok(NaiveFit {
        names: design.names,
        estimates: estimates.iter().copied().collect(),
        std_errors: (0..p).map(|j| cov[(j, j)].sqrt()).collect(),
        n_used: m,
    })
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), SimulateError> {
    let (m, p) = x.shape();
    let mut b = DVector::<f64>::zeros(p);
    for _ in 0..100 {
        let eta = x * &b;
        let mu = eta.map(logistic);
        let w = mu.map(|u| (u * (1.0 - u)).max(1e-12));
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtr = DVector::<f64>::zeros(p);
        for i in 0..m {
            let row = x.row(i);
            xtwx += w[i] * row.transpose() * row;
            xtr += (y[i] - mu[i]) * row.transpose();
        }
        let chol = xtwx.clone().cholesky().ok_or(SimulateError::Singular)?;
        let step = chol.solve(&xtr);
        b += &step;
        if b.iter().any(|v| !v.is_finite() || v.abs() > 1e3) {
            return Err(SimulateError::Separation);
        }
        if step.amax() < 1e-10 {
            let eta = x * &b;
            let mut info = DMatrix::<f64>::zeros(p, p);
            for i in 0..m {
                let u = logistic(eta[i]);
                let row = x.row(i);
                info += u * (1.0 - u) * row.transpose() * row;
            }
            let cov = info.try_inverse().ok_or(SimulateError::Singular)?;
            return Ok((b, cov));
        }
    }
    Err(SimulateError::Separation)
}
