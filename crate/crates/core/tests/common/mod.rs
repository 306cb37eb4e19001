#![allow(dead_code)]

use memi_core::model::{assemble_joint_model, JointModel};
use memi_core::{Dataset, FitConfig};

pub const MISSING_CONFIG: &str = r#"
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
"#;

pub fn model_from(config: &str, data: &Dataset) -> JointModel {
    let cfg = FitConfig::from_toml_str(config).expect("config parses");
    let spec = cfg.to_model_spec(data).expect("spec builds");
    assemble_joint_model(&spec, data).expect("model assembles")
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
