mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use memi_core::inference::summarize;
use memi_core::sampler::{gibbs_sweep, SamplerState};
use memi_core::simulate::{simulate_classical_repeats, RepeatsScenario};
use memi_core::{
    naive_fit, parse_formula, run_chains, run_chains_with_threads, simulate_missing_scenario, ChainConfig,
    Column, Dataset, Family,
};

use common::{model_from, MISSING_CONFIG};

#[test]
fn observed_entries_stay_pinned() {
    let (data, _) = simulate_missing_scenario(4, 200).unwrap();
    let model = model_from(MISSING_CONFIG, &data);
    let col = data.column("x").unwrap();
    let mut state = SamplerState::initial(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..300 {
        gibbs_sweep(&mut state, &model, &mut rng).unwrap();
        for i in 0..data.nrows() {
            if !col.missing[i] {
                assert_eq!(state.errors[0].x[i].to_bits(), col.values[i].to_bits());
            }
        }
    }
    // the masked entries did move
    let masked: Vec<usize> = (0..data.nrows()).filter(|&i| col.missing[i]).collect();
    assert!(masked.iter().any(|&i| state.errors[0].x[i] != SamplerState::initial(&model).errors[0].x[i]));
}

#[test]
fn same_seed_same_draws_regardless_of_threads() {
    let (data, _) = simulate_missing_scenario(9, 150).unwrap();
    let model = model_from(MISSING_CONFIG, &data);
    let config = ChainConfig { iterations: 200, burnin: 50, thin: 3, chains: 3, seed: 42 };
    let a = run_chains(&model, &config).unwrap();
    let b = run_chains_with_threads(&model, &config, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_retained(), 50);
    let c = run_chains(&model, &ChainConfig { seed: 43, ..config }).unwrap();
    assert_ne!(a, c);
    // chains are distinct streams
    assert_ne!(a.chains[0], a.chains[1]);
}

#[test]
fn single_retained_draw() {
    let (data, _) = simulate_missing_scenario(1, 50).unwrap();
    let model = model_from(MISSING_CONFIG, &data);
    let config = ChainConfig { iterations: 30, burnin: 29, thin: 1, chains: 2, seed: 1 };
    let d = run_chains(&model, &config).unwrap();
    assert_eq!(d.n_retained(), 1);
    assert_eq!(d.iterations, vec![30]);
    assert!(d.chains.iter().all(|c| c.len() == d.names.len()));
}

const FRAMINGHAM: &str = r#"
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

fn swap_repeats(data: &Dataset) -> Dataset {
    let mut out = Dataset::default();
    for (name, col) in data.columns() {
        let source = match name {
            "sbp1" => data.column("sbp2").unwrap(),
            "sbp2" => data.column("sbp1").unwrap(),
            _ => col,
        };
        out.insert(name.to_string(), Column { values: source.values.clone(), missing: source.missing.clone() })
            .unwrap();
    }
    out
}

#[test]
fn repeat_order_does_not_matter() {
    let (data, _) =
        simulate_classical_repeats(12, 641, 2, &RepeatsScenario::framingham(), Family::Binomial).unwrap();
    let swapped = swap_repeats(&data);
    let config = ChainConfig { iterations: 3000, burnin: 500, thin: 1, chains: 2, seed: 8 };
    let m1 = model_from(FRAMINGHAM, &data);
    let m2 = model_from(FRAMINGHAM, &swapped);
    let s1 = summarize(&run_chains(&m1, &config).unwrap(), &m1).unwrap();
    let s2 = summarize(&run_chains(&m2, &ChainConfig { seed: 9, ..config }).unwrap(), &m2).unwrap();
    for (a, b) in s1.params.iter().zip(&s2.params) {
        assert_eq!(a.name, b.name);
        let se = (a.sd * a.sd / a.ess + b.sd * b.sd / b.ess).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se, "{}: {} vs {}", a.name, a.mean, b.mean);
    }
}

#[test]
fn classical_precision_is_recovered() {
    let (data, _) =
        simulate_classical_repeats(3, 641, 2, &RepeatsScenario::framingham(), Family::Binomial).unwrap();
    let model = model_from(FRAMINGHAM, &data);
    let config = ChainConfig { iterations: 3000, burnin: 500, thin: 1, chains: 2, seed: 2 };
    let s = summarize(&run_chains(&model, &config).unwrap(), &model).unwrap();
    let tau = s.get("tau.sbp.classical").unwrap().mean;
    assert!((65.0..=90.0).contains(&tau), "tau.sbp.classical {tau}");
}

#[test]
fn logistic_without_error_agrees_with_maximum_likelihood() {
    let s = RepeatsScenario { tau_u: 1e8, ..RepeatsScenario::framingham() };
    let (mut data, truth) = simulate_classical_repeats(6, 3000, 1, &s, Family::Binomial).unwrap();
    data.insert("sbp".into(), Column::from_values(truth.x_true.clone())).unwrap();
    let text = r#"
formula_moi = "disease ~ sbp + smoking"
family_moi = "binomial"
error_variable = []
error_type = []
"#;
    let model = model_from(text, &data);
    let config = ChainConfig { iterations: 4000, burnin: 500, thin: 1, chains: 2, seed: 4 };
    let summary = summarize(&run_chains(&model, &config).unwrap(), &model).unwrap();
    let mle = naive_fit(&parse_formula("disease ~ sbp + smoking").unwrap(), &data, Family::Binomial).unwrap();
    for name in ["beta.0", "beta.sbp", "beta.smoking"] {
        let (b, se) = mle.get(name).unwrap();
        let p = summary.get(name).unwrap();
        assert!((p.mean - b).abs() < 0.15 * se + 3.0 * p.sd / p.ess.sqrt(), "{name}: {} vs {b}", p.mean);
        assert!((p.sd / se - 1.0).abs() < 0.1, "{name}: sd {} vs se {se}", p.sd);
    }
}

const BERKSON: &str = r#"
formula_moi = "y ~ w"
family_moi = "gaussian"
error_variable = "w"
error_type = "berkson"
fixed_prec_berkson = 4
initial_prec_moi = 1
"#;

#[test]
fn berkson_level_leaves_slope_unbiased() {
    // x = w + u_b: regressing on w is unbiased for the slope but noisier.
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng) };
    let w: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let x: Vec<f64> = w.iter().map(|wi| wi + 0.5 * normal(&mut rng)).collect();
    let y: Vec<f64> = x.iter().map(|xi| 1.0 + 1.5 * xi + 0.5 * normal(&mut rng)).collect();
    let mut data = Dataset::default();
    data.insert("y".into(), Column::from_values(y)).unwrap();
    data.insert("w".into(), Column::from_values(w)).unwrap();
    let model = model_from(BERKSON, &data);
    assert_eq!(model.n_levels(), 2);
    let config = ChainConfig { iterations: 3000, burnin: 500, thin: 1, chains: 4, seed: 6 };
    let s = summarize(&run_chains(&model, &config).unwrap(), &model).unwrap();
    let b = s.get("beta.w").unwrap();
    let naive = naive_fit(&parse_formula("y ~ w").unwrap(), &data, Family::Gaussian).unwrap();
    let (slope, se) = naive.get("beta.w").unwrap();
    assert!((b.mean - slope).abs() < 0.5 * se, "beta.w {} vs regression on w {slope}", b.mean);
    assert!((slope - 1.5).abs() < 3.0 * se);
    let tau = s.get("tau.moi").unwrap();
    assert!(tau.q025 < 4.0 && 4.0 < tau.q975, "tau.moi interval ({}, {})", tau.q025, tau.q975);
}

#[test]
fn classical_berkson_and_missing_together_run() {
    let (base, _) =
        simulate_classical_repeats(5, 300, 2, &RepeatsScenario::attenuation(), Family::Gaussian).unwrap();
    let mut data = Dataset::default();
    for (name, col) in base.columns() {
        let mut col = col.clone();
        if name == "x1" {
            for i in (0..300).step_by(17) {
                col.missing[i] = true;
                col.values[i] = f64::NAN;
            }
        }
        data.insert(name.to_string(), col).unwrap();
    }
    let text = r#"
formula_moi = "y ~ x + z"
formula_imp = "x ~ z"
family_moi = "gaussian"
error_variable = "x"
error_type = ["classical", "berkson", "missing"]
repeated_observations = true
fixed_prec_berkson = 100
"#;
    let model = model_from(text, &data);
    // MOI, two repeats, Berkson, imputation
    assert_eq!(model.n_levels(), 5);
    let config = ChainConfig { iterations: 600, burnin: 100, thin: 1, chains: 2, seed: 1 };
    let draws = run_chains(&model, &config).unwrap();
    assert!(draws.chains.iter().flatten().all(|v| v.is_finite()));
    let s = summarize(&draws, &model).unwrap();
    assert!(s.get("tau.x.berkson").unwrap().sd == 0.0);
}
