//! Blocked Gibbs sampler for the joint model.
//!
//! Each sweep draws the Pólya-Gamma auxiliaries of the logit levels, then the
//! coefficient blocks (`beta`, `alpha`, `gamma`), then the latent covariates,
//! then the non-fixed precisions. Chains run in parallel, each on its own
//! ChaCha8 stream derived from the seed and the chain index.

mod conjugate;
mod gibbs;
mod pg;
mod state;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::JointModel;

pub use conjugate::{precision_conditional, update_gaussian_coefficients, update_precision, GaussianConditional};
pub use gibbs::{gibbs_sweep, update_latent, update_pg_auxiliaries};
pub use pg::{pg_draw, pg_mean};
pub use state::{ErrorState, SamplerState};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("non-finite value for {parameter} at sweep {sweep}")]
    NonFinite { sweep: usize, parameter: String },
    #[error("conditional precision of {0} is not positive definite")]
    NotPositiveDefinite(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { iterations: 5000, burnin: 1000, thin: 1, chains: 4, seed: 1 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 {
            return Err(SamplerError::Config("chains must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if self.iterations <= self.burnin {
            return Err(SamplerError::Config(format!(
                "iterations ({}) must exceed burnin ({})",
                self.iterations, self.burnin
            )));
        }
        if self.retained() == 0 {
            return Err(SamplerError::Config("no draws retained after burnin and thinning".into()));
        }
        Ok(())
    }

    /// Draws kept per chain.
    pub fn retained(&self) -> usize {
        (self.iterations.saturating_sub(self.burnin)) / self.thin.max(1)
    }

    /// Whether sweep `s` (1-based) is kept.
    pub fn keeps(&self, s: usize) -> bool {
        s > self.burnin && (s - self.burnin).is_multiple_of(self.thin)
    }
}

/// Retained draws of the latent covariate at its unobserved rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDraws {
    pub variable: String,
    /// 0-based data rows.
    pub rows: Vec<usize>,
    /// Per chain, row-major `retained x rows.len()`.
    pub chains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    /// Sweep index of each retained draw.
    pub iterations: Vec<usize>,
    /// Per chain, row-major `retained x names.len()`.
    pub chains: Vec<Vec<f64>>,
    pub imputed: Vec<ImputedDraws>,
}

impl Draws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_retained(&self) -> usize {
        self.iterations.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draws of parameter `j` in chain `c`.
    pub fn chain_param(&self, c: usize, j: usize) -> Vec<f64> {
        let p = self.names.len();
        self.chains[c].iter().skip(j).step_by(p).copied().collect()
    }

    /// Draws of parameter `j`, one vector per chain.
    pub fn param(&self, j: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains()).map(|c| self.chain_param(c, j)).collect()
    }

    pub fn param_by_name(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        self.index_of(name).map(|j| self.param(j))
    }
}

struct ChainOutput {
    params: Vec<f64>,
    imputed: Vec<Vec<f64>>,
}

fn run_chain(model: &JointModel, config: &ChainConfig, chain: usize) -> Result<ChainOutput, SamplerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let mut state = SamplerState::initial(model);
    let kept = config.retained();
    let mut params = Vec::with_capacity(kept * model.registry.len());
    let mut imputed: Vec<Vec<f64>> =
        model.errors.iter().map(|b| Vec::with_capacity(kept * b.missing_rows.len())).collect();
    for s in 1..=config.iterations {
        gibbs_sweep(&mut state, model, &mut rng).map_err(|e| match e {
            SamplerError::NonFinite { parameter, .. } => SamplerError::NonFinite { sweep: s, parameter },
            other => other,
        })?;
        if let Some(parameter) = state.first_non_finite(model) {
            return Err(SamplerError::NonFinite { sweep: s, parameter });
        }
        if config.keeps(s) {
            params.extend(state.params());
            for (k, b) in model.errors.iter().enumerate() {
                let x = &state.errors[k].x;
                imputed[k].extend(b.missing_rows.iter().map(|&i| x[i]));
            }
        }
    }
    Ok(ChainOutput { params, imputed })
}

/// Runs `config.chains` chains with one worker thread per chain.
pub fn run_chains(model: &JointModel, config: &ChainConfig) -> Result<Draws, SamplerError> {
    run_chains_with_threads(model, config, config.chains)
}

/// Runs the chains on a pool of `threads` workers. Output does not depend on
/// the thread count.
pub fn run_chains_with_threads(
    model: &JointModel,
    config: &ChainConfig,
    threads: usize,
) -> Result<Draws, SamplerError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SamplerError::ThreadPool(e.to_string()))?;
    let outputs: Vec<ChainOutput> = pool.install(|| {
        (0..config.chains).into_par_iter().map(|c| run_chain(model, config, c)).collect::<Result<_, _>>()
    })?;

    let iterations = (1..=config.iterations).filter(|&s| config.keeps(s)).collect();
    let imputed = model
        .errors
        .iter()
        .enumerate()
        .map(|(k, b)| ImputedDraws {
            variable: b.variable.clone(),
            rows: b.missing_rows.clone(),
            chains: outputs.iter().map(|o| o.imputed[k].clone()).collect(),
        })
        .collect();
    Ok(Draws {
        names: model.registry.names(),
        iterations,
        chains: outputs.into_iter().map(|o| o.params).collect(),
        imputed,
    })
}
