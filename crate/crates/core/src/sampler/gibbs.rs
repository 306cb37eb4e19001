use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::conjugate::{update_gaussian_coefficients, update_precision};
use super::pg::pg_draw;
use super::state::SamplerState;
use super::SamplerError;
use crate::model::{ErrorBlock, Family, GaussianPrior, JointModel};

fn priors_for(model: &JointModel, names: &[String]) -> Vec<GaussianPrior> {
    names.iter().map(|n| model.priors.coefficient(n)).collect()
}

/// Row-major matrix times vector. Every design has at least one column.
fn mat_vec(values: &[f64], ncols: usize, coefs: &[f64]) -> Vec<f64> {
    values.chunks_exact(ncols).map(|row| row.iter().zip(coefs).map(|(a, b)| a * b).sum()).collect()
}

/// Draws one PG(1, eta_i) auxiliary per observation of a logit level.
pub fn update_pg_auxiliaries<R: Rng + ?Sized>(eta: &[f64], rng: &mut R) -> Result<Vec<f64>, SamplerError> {
    eta.iter().map(|&e| pg_draw(1, e, rng)).collect()
}

/// Pseudo-response `kappa / omega` for a logit level given its auxiliaries.
fn logit_pseudo_response(outcome: &[f64], omega: &[f64]) -> Vec<f64> {
    outcome.iter().zip(omega).map(|(y, w)| (y - 0.5) / w).collect()
}

fn normal<R: Rng + ?Sized>(mean: f64, precision: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + z / precision.sqrt()
}

/// Precision and precision-weighted centre contributed to latent `k` at row
/// `i` by the model of interest and the missingness model of block `k`.
fn outcome_terms(model: &JointModel, state: &SamplerState, k: usize, i: usize, lat: &[&[f64]]) -> (f64, f64) {
    let (mut prec, mut pc) = (0.0, 0.0);
    let d = &model.moi_design;
    let b = d.slope(i, k, lat, &state.beta);
    if b != 0.0 {
        let a = d.eta(i, lat, &state.beta) - b * lat[k][i];
        let y = model.response[i];
        match model.family {
            Family::Gaussian => {
                let t = state.tau_moi.expect("gaussian model has tau.moi");
                prec += b * b * t;
                pc += b * t * (y - a);
            }
            Family::Binomial => {
                let w = state.omega_moi[i];
                prec += b * b * w;
                pc += b * ((y - 0.5) - w * a);
            }
        }
    }
    if let Some(mis) = &model.errors[k].missingness {
        let es = &state.errors[k];
        let c = mis.design.slope(i, k, lat, &es.gamma);
        if c != 0.0 {
            let a = mis.design.eta(i, lat, &es.gamma) - c * lat[k][i];
            let w = es.omega_mis[i];
            prec += c * c * w;
            pc += c * ((mis.indicator[i] - 0.5) - w * a);
        }
    }
    (prec, pc)
}

fn imputation_mean(block: &ErrorBlock, alpha: &[f64]) -> Option<Vec<f64>> {
    block.imputation.as_ref().map(|imp| mat_vec(&imp.design.values, imp.design.ncols, alpha))
}

fn draw_latent<R: Rng + ?Sized>(
    prec: f64,
    pc: f64,
    block: &ErrorBlock,
    i: usize,
    rng: &mut R,
) -> Result<f64, SamplerError> {
    if !(prec > 0.0 && prec.is_finite() && pc.is_finite()) {
        return Err(SamplerError::NonFinite {
            sweep: 0,
            parameter: format!("latent {}[{}]", block.variable, i + 1),
        });
    }
    Ok(normal(pc / prec, prec, rng))
}

/// Redraws the unpinned latent entries of error variable `k` from their
/// Gaussian full conditionals: the base latent first, then the covariate
/// itself when a Berkson level separates the two.
pub fn update_latent<R: Rng + ?Sized>(
    state: &mut SamplerState,
    model: &JointModel,
    k: usize,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let snapshot: Vec<Vec<f64>> = state.errors.iter().map(|e| e.x.clone()).collect();
    let lat: Vec<&[f64]> = snapshot.iter().map(Vec::as_slice).collect();
    let block = &model.errors[k];
    let es = &state.errors[k];
    let imp_mean = imputation_mean(block, &es.alpha);
    let tau_imp = es.tau_imp.unwrap_or(0.0);
    let tau_c = es.tau_classical.unwrap_or(0.0);
    let tau_b = es.tau_berkson.unwrap_or(0.0);

    let mut base = es.base().to_vec();
    for i in 0..model.n {
        if block.pinned[i] {
            base[i] = block.pinned_values[i];
            continue;
        }
        let (mut prec, mut pc) = (0.0, 0.0);
        for lvl in &block.classical {
            if lvl.observed[i] {
                let w = block.scaling[i] * tau_c;
                prec += w;
                pc += w * lvl.values[i];
            }
        }
        if let Some(mu) = &imp_mean {
            prec += tau_imp;
            pc += tau_imp * mu[i];
        }
        if block.berkson {
            prec += tau_b;
            pc += tau_b * es.x[i];
        } else {
            let (p2, c2) = outcome_terms(model, state, k, i, &lat);
            prec += p2;
            pc += c2;
        }
        base[i] = draw_latent(prec, pc, block, i, rng)?;
    }

    if block.berkson {
        let mut x = vec![0.0; model.n];
        for i in 0..model.n {
            let (p2, c2) = outcome_terms(model, state, k, i, &lat);
            x[i] = draw_latent(tau_b + p2, tau_b * base[i] + c2, block, i, rng)?;
        }
        let es = &mut state.errors[k];
        es.x = x;
        es.r = Some(base);
    } else {
        state.errors[k].x = base;
    }
    Ok(())
}

/// One full sweep: auxiliaries, coefficient blocks, latents, precisions.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut SamplerState,
    model: &JointModel,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let n = model.n;
    let p = model.moi_design.ncols();
    let moi_x = model.moi_design.matrix(&state.latents());
    let mis_x: Vec<Option<Vec<f64>>> = model
        .errors
        .iter()
        .map(|b| b.missingness.as_ref().map(|m| m.design.matrix(&state.latents())))
        .collect();

    if model.family == Family::Binomial {
        let eta = mat_vec(&moi_x, p, &state.beta);
        state.omega_moi = update_pg_auxiliaries(&eta, rng)?;
    }
    for (k, b) in model.errors.iter().enumerate() {
        if let (Some(m), Some(xm)) = (&b.missingness, &mis_x[k]) {
            let eta = mat_vec(xm, m.design.ncols(), &state.errors[k].gamma);
            state.errors[k].omega_mis = update_pg_auxiliaries(&eta, rng)?;
        }
    }

    let beta_priors = priors_for(model, &model.moi_design.names);
    state.beta = match model.family {
        Family::Gaussian => {
            let t = state.tau_moi.expect("gaussian model has tau.moi");
            update_gaussian_coefficients(&moi_x, p, &model.response, &vec![t; n], &beta_priors, "beta", rng)?
        }
        Family::Binomial => {
            let z = logit_pseudo_response(&model.response, &state.omega_moi);
            update_gaussian_coefficients(&moi_x, p, &z, &state.omega_moi, &beta_priors, "beta", rng)?
        }
    };

    for (k, b) in model.errors.iter().enumerate() {
        if let Some(imp) = &b.imputation {
            let es = &state.errors[k];
            let t = es.tau_imp.expect("imputation level has a precision");
            let priors = priors_for(model, &imp.design.names);
            let alpha = update_gaussian_coefficients(
                &imp.design.values,
                imp.design.ncols,
                es.base(),
                &vec![t; n],
                &priors,
                "alpha",
                rng,
            )?;
            state.errors[k].alpha = alpha;
        }
    }

    for (k, b) in model.errors.iter().enumerate() {
        if let (Some(m), Some(xm)) = (&b.missingness, &mis_x[k]) {
            let es = &state.errors[k];
            let z = logit_pseudo_response(&m.indicator, &es.omega_mis);
            let priors = priors_for(model, &m.design.names);
            let gamma =
                update_gaussian_coefficients(xm, m.design.ncols(), &z, &es.omega_mis, &priors, "gamma", rng)?;
            state.errors[k].gamma = gamma;
        }
    }

    for k in 0..model.errors.len() {
        update_latent(state, model, k, rng)?;
    }

    update_precisions(state, model, rng)
}

fn update_precisions<R: Rng + ?Sized>(
    state: &mut SamplerState,
    model: &JointModel,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let n = model.n;
    let ones = vec![1.0; n];
    if model.family == Family::Gaussian {
        let x = model.moi_design.matrix(&state.latents());
        let fitted = mat_vec(&x, model.moi_design.ncols(), &state.beta);
        let resid: Vec<f64> = model.response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        state.tau_moi = Some(update_precision(&resid, &ones, model.priors.precision("tau.moi"), rng)?);
    }
    for (k, b) in model.errors.iter().enumerate() {
        let es = &state.errors[k];
        let base = es.base();
        let mut tau_classical = es.tau_classical;
        if let Some(name) = b.tau_classical() {
            let (mut resid, mut scale) = (Vec::new(), Vec::new());
            for lvl in &b.classical {
                for i in 0..n {
                    if lvl.observed[i] {
                        resid.push(lvl.values[i] - base[i]);
                        scale.push(b.scaling[i]);
                    }
                }
            }
            tau_classical = Some(update_precision(&resid, &scale, model.priors.precision(&name), rng)?);
        }
        let mut tau_berkson = es.tau_berkson;
        if let Some(name) = b.tau_berkson() {
            let resid: Vec<f64> = es.x.iter().zip(base).map(|(x, r)| x - r).collect();
            tau_berkson = Some(update_precision(&resid, &ones, model.priors.precision(&name), rng)?);
        }
        let mut tau_imp = es.tau_imp;
        if let Some(name) = b.tau_imp() {
            let mu = imputation_mean(b, &es.alpha).expect("imputation level");
            let resid: Vec<f64> = base.iter().zip(&mu).map(|(x, m)| x - m).collect();
            tau_imp = Some(update_precision(&resid, &ones, model.priors.precision(&name), rng)?);
        }
        let es = &mut state.errors[k];
        es.tau_classical = tau_classical;
        es.tau_berkson = tau_berkson;
        es.tau_imp = tau_imp;
    }
    Ok(())
}
