//! Fixtures shared by the benchmarks.

use memi_core::{
    assemble_joint_model, run_chains, simulate_classical_repeats, simulate_missing_scenario, ChainConfig,
    Draws, Family, FitConfig, JointModel, RepeatsScenario,
};

const MISSING: &str = r#"
formula_moi = "y ~ x + z1 + z2"
formula_imp = "x ~ z1 + z2"
formula_mis = "m ~ z1 + z2 + x"
family_moi = "gaussian"
error_variable = "x"
error_type = "missing"
prior_prec_moi = [0.01, 0.01]
prior_prec_imp = [1, 0.00005]
initial_prec_moi = 4
initial_prec_imp = 4
"#;

const REPEATS: &str = r#"
formula_moi = "disease ~ sbp + smoking"
formula_imp = "sbp ~ smoking"
family_moi = "binomial"
error_variable = "sbp"
error_type = "classical"
repeated_observations = true
prior_beta_error = [0, 0.01]
prior_prec_classical = [100, 1]
prior_prec_imp = [10, 1]
initial_prec_classical = 100
initial_prec_imp = 10
"#;

fn assemble(config: &str, data: &memi_core::Dataset) -> JointModel {
    let cfg = FitConfig::from_toml_str(config).expect("fixture config parses");
    let spec = cfg.to_model_spec(data).expect("fixture spec builds");
    assemble_joint_model(&spec, data).expect("fixture model assembles")
}

/// Gaussian outcome with a covariate missing at random, plus a missingness model.
pub fn missing_model(n: usize) -> JointModel {
    let (data, _) = simulate_missing_scenario(1, n).expect("simulation");
    assemble(MISSING, &data)
}

/// Logistic outcome with two classical-error repeats.
pub fn repeats_model(n: usize) -> JointModel {
    let (data, _) =
        simulate_classical_repeats(1, n, 2, &RepeatsScenario::framingham(), Family::Binomial).expect("simulation");
    assemble(REPEATS, &data)
}

pub fn sample_draws(model: &JointModel, chains: usize, retained: usize) -> Draws {
    let config = ChainConfig { iterations: retained + 100, burnin: 100, thin: 1, chains, seed: 1 };
    run_chains(model, &config).expect("sampling")
}
