//! Posterior summaries and convergence diagnostics.
//!
//! Quantiles use linear interpolation between order statistics with the
//! midpoint convention: the `p` quantile of `n` sorted draws sits at 1-based
//! position `n p + 1/2`, clamped to the sample range.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Block, JointModel, Registry};
use crate::sampler::Draws;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("no draws to summarize")]
    Empty,
    #[error("need at least {needed} draws, got {got}")]
    Insufficient { needed: usize, got: usize },
    #[error("credible level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("draws do not match the model: {0}")]
    Mismatch(String),
}

/// Quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * p + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let k = lo as usize - 1;
    sorted[k] + (h - lo) * (sorted[k + 1] - sorted[k])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Equal-tailed interval holding probability `level`.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64), InferenceError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::InvalidLevel(level));
    }
    if draws.is_empty() {
        return Err(InferenceError::Empty);
    }
    let s = sorted_copy(draws);
    let tail = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Potential scale reduction on chains split in half. Each chain needs at
/// least 4 draws; an odd middle draw is dropped.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, InferenceError> {
    if chains.is_empty() {
        return Err(InferenceError::Empty);
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(InferenceError::Insufficient { needed: 4, got: len });
    }
    let half = len / 2;
    let halves: Vec<&[f64]> =
        chains.iter().flat_map(|c| [&c[..half], &c[c.len() - half..]]).collect();
    let m = halves.len() as f64;
    let l = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_var(h)).sum::<f64>() / m;
    let b = l * sample_var(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (l - 1.0) / l * w + b / l;
    Ok((var_plus / w).sqrt())
}

/// Effective sample size with its zero-variance flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when every draw is identical; `value` is then the draw count.
    pub degenerate: bool,
}

fn autocov(v: &[f64], m: f64, lag: usize) -> f64 {
    let n = v.len();
    (0..n - lag).map(|i| (v[i] - m) * (v[i + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain ESS from autocorrelations truncated by Geyer's initial
/// monotone positive sequence.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<Ess, InferenceError> {
    if chains.is_empty() {
        return Err(InferenceError::Empty);
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let total = n * chains.len();
    if total < 10 || n < 2 {
        return Err(InferenceError::Insufficient { needed: 10, got: total });
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let first = chains[0][0];
    if chains.iter().all(|c| c.iter().all(|v| *v == first)) {
        return Ok(Ess { value: total as f64, degenerate: true });
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_var(c)).sum::<f64>() / chains.len() as f64;
    let b = if chains.len() > 1 { nf * sample_var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    let rho = |t: usize| -> f64 {
        let acov = chains.iter().zip(&means).map(|(c, m)| autocov(c, *m, t)).sum::<f64>()
            / chains.len() as f64;
        1.0 - (w - acov) / var_plus
    };

    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        t += 2;
    }
    // Antithetic chains can push tau below 1; cap ESS at total * log10(total).
    let tau = tau.max(1.0 / (total as f64).log10().max(1.0));
    Ok(Ess { value: total as f64 / tau, degenerate: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub block: Block,
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
    /// NaN when there are too few draws.
    pub rhat: f64,
    /// NaN when there are too few draws.
    pub ess: f64,
    pub ess_degenerate: bool,
}

/// Model description echoed at the top of a summary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryHeader {
    pub formula_moi: String,
    pub formula_imp: Vec<String>,
    pub formula_mis: Vec<String>,
    /// Error variable with its error types.
    pub error_types: Vec<(String, Vec<String>)>,
}

impl SummaryHeader {
    pub fn from_model(model: &JointModel) -> Self {
        SummaryHeader {
            formula_moi: model.formula_moi.to_string(),
            formula_imp: model
                .errors
                .iter()
                .filter_map(|b| b.imputation.as_ref().map(|l| l.formula.to_string()))
                .collect(),
            formula_mis: model
                .errors
                .iter()
                .filter_map(|b| b.missingness.as_ref().map(|l| l.formula.to_string()))
                .collect(),
            error_types: model
                .errors
                .iter()
                .map(|b| (b.variable.clone(), b.types.iter().map(|t| t.to_string()).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub header: SummaryHeader,
    /// Registry order.
    pub params: Vec<ParamSummary>,
    pub n_chains: usize,
    pub n_draws: usize,
}

/// Section titles in print order.
pub fn section_title(block: Block, error_coefficients: &[String]) -> String {
    match block {
        Block::MoiFixed => "Fixed effects for model of interest:".into(),
        Block::ErrorCoefficient => {
            "Coefficient for variable with measurement error and/or missingness:".into()
        }
        Block::Imputation => "Fixed effects for imputation model:".into(),
        Block::Missingness => "Fixed effects for missingness model:".into(),
        Block::Precision if error_coefficients.is_empty() => "Model hyperparameters:".into(),
        Block::Precision => {
            format!("Model hyperparameters (apart from {}):", error_coefficients.join(", "))
        }
    }
}

/// Formats with about five significant digits, like the usual R print-out.
fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NA".into() } else if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{v:.4e}");
    }
    let decimals = (4 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

impl FitSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn section(&self, block: Block) -> impl Iterator<Item = &ParamSummary> {
        self.params.iter().filter(move |p| p.block == block)
    }

    pub fn max_rhat(&self) -> f64 {
        self.params.iter().map(|p| p.rhat).filter(|r| !r.is_nan()).fold(f64::NAN, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.params.iter().map(|p| p.ess).filter(|r| !r.is_nan()).fold(f64::NAN, f64::min)
    }

    /// Fixed-width text with one section per parameter block.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let h = &self.header;
        let _ = writeln!(out, "Formula for model of interest:\n{}\n", h.formula_moi);
        if !h.formula_imp.is_empty() {
            let _ = writeln!(out, "Formula for imputation model:\n{}\n", h.formula_imp.join("\n"));
        }
        if !h.formula_mis.is_empty() {
            let _ = writeln!(out, "Formula for missingness model:\n{}\n", h.formula_mis.join("\n"));
        }
        if !h.error_types.is_empty() {
            let _ = writeln!(out, "Error types:");
            for (v, t) in &h.error_types {
                let _ = writeln!(out, "{v}: {}", t.join(", "));
            }
            out.push('\n');
        }
        let error_coefs: Vec<String> =
            self.section(Block::ErrorCoefficient).map(|p| p.name.clone()).collect();
        let cols = ["mean", "sd", "0.025quant", "0.5quant", "0.975quant", "rhat", "ess"];
        for block in Block::ALL {
            let rows: Vec<&ParamSummary> = self.section(block).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{}", section_title(block, &error_coefs));
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|p| {
                    vec![
                        fmt_num(p.mean),
                        fmt_num(p.sd),
                        fmt_num(p.q025),
                        fmt_num(p.q500),
                        fmt_num(p.q975),
                        if p.rhat.is_nan() { "NA".into() } else { format!("{:.3}", p.rhat) },
                        if p.ess.is_nan() { "NA".into() } else { format!("{:.0}", p.ess) },
                    ]
                })
                .collect();
            let label_w = rows.iter().map(|p| p.label.len()).max().unwrap_or(0);
            let widths: Vec<usize> = (0..cols.len())
                .map(|j| cells.iter().map(|r| r[j].len()).chain([cols[j].len()]).max().unwrap())
                .collect();
            let mut line = " ".repeat(label_w);
            for (c, w) in cols.iter().zip(&widths) {
                let _ = write!(line, " {c:>w$}");
            }
            let _ = writeln!(out, "{line}");
            for (p, r) in rows.iter().zip(&cells) {
                let mut line = format!("{:<label_w$}", p.label);
                for (c, w) in r.iter().zip(&widths) {
                    let _ = write!(line, " {c:>w$}");
                }
                let _ = writeln!(out, "{line}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Posterior draws: {} chain(s) x {} retained",
            self.n_chains, self.n_draws
        );
        out
    }

    /// Comma-separated table with a fixed column order.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("parameter,section,mean,sd,q025,q500,q975,rhat,ess\n");
        for p in &self.params {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.name,
                p.block.as_str(),
                p.mean,
                p.sd,
                p.q025,
                p.q500,
                p.q975,
                p.rhat,
                p.ess
            );
        }
        out
    }
}

/// Pooled moments and quantiles plus per-parameter diagnostics.
pub fn summarize(draws: &Draws, model: &JointModel) -> Result<FitSummary, InferenceError> {
    summarize_draws(draws, &model.registry, SummaryHeader::from_model(model))
}

/// As [`summarize`] but from a registry alone, for draws read back from disk.
pub fn summarize_draws(
    draws: &Draws,
    registry: &Registry,
    header: SummaryHeader,
) -> Result<FitSummary, InferenceError> {
    if draws.n_chains() == 0 || draws.n_retained() == 0 {
        return Err(InferenceError::Empty);
    }
    if draws.names != registry.names() {
        return Err(InferenceError::Mismatch(format!(
            "draws have parameters {:?}, model has {:?}",
            draws.names,
            registry.names()
        )));
    }
    let params = registry
        .params()
        .iter()
        .enumerate()
        .map(|(j, info)| {
            let chains = draws.param(j);
            let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
            let s = sorted_copy(&pooled);
            let m = mean(&s);
            let sd = if s.len() > 1 { sample_var(&s).max(0.0).sqrt() } else { 0.0 };
            let ess = effective_sample_size(&chains).ok();
            ParamSummary {
                name: info.name.clone(),
                block: info.block,
                label: info.label.clone(),
                mean: m,
                sd,
                q025: quantile_sorted(&s, 0.025),
                q500: quantile_sorted(&s, 0.5),
                q975: quantile_sorted(&s, 0.975),
                rhat: split_rhat(&chains).unwrap_or(f64::NAN),
                ess: ess.map_or(f64::NAN, |e| e.value),
                ess_degenerate: ess.is_some_and(|e| e.degenerate),
            }
        })
        .collect();
    Ok(FitSummary { header, params, n_chains: draws.n_chains(), n_draws: draws.n_retained() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn interpolated_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        let grid: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&grid, 0.95).unwrap();
        assert!((lo - 3.0).abs() < 1e-12 && (hi - 98.0).abs() < 1e-12, "{lo} {hi}");
        assert_eq!(credible_interval(&[2.0; 10], 0.9).unwrap(), (2.0, 2.0));
        let sym = [-3.0, -1.0, 0.0, 1.0, 3.0];
        let (lo, hi) = credible_interval(&sym, 0.5).unwrap();
        assert_eq!(lo, -hi);
        assert!(credible_interval(&sym, 1.0).is_err());
    }

    #[test]
    fn rhat_examples() {
        let a = iid(1, 1000);
        let r = split_rhat(&[a.clone(), a.clone()]).unwrap();
        assert!((0.99..=1.02).contains(&r), "{r}");
        let r = split_rhat(&[vec![0.0; 100], vec![1.0; 100]]).unwrap();
        assert!(r > 1.2);
        let r = split_rhat(&[iid(2, 1000)]).unwrap();
        assert!((0.99..=1.02).contains(&r), "{r}");
        assert!(split_rhat(&[vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn ess_examples() {
        let e = effective_sample_size(&[iid(3, 1000)]).unwrap();
        assert!((800.0..=1200.0).contains(&e.value), "{}", e.value);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ar = vec![0.0; 10_000];
        for t in 1..ar.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            ar[t] = 0.9 * ar[t - 1] + z;
        }
        let e = effective_sample_size(&[ar]).unwrap();
        let target = 10_000.0 * 0.1 / 1.9;
        assert!((e.value - target).abs() < 0.3 * target, "{} vs {target}", e.value);
        let c = effective_sample_size(&[vec![5.0; 40]]).unwrap();
        assert_eq!(c, Ess { value: 40.0, degenerate: true });
        assert!(effective_sample_size(&[vec![1.0, 2.0]]).is_err());
    }

    fn toy_draws(chains: Vec<Vec<f64>>) -> (Draws, Registry) {
        let n = chains[0].len() / 2;
        let draws = Draws {
            names: vec!["beta.0".into(), "tau.moi".into()],
            iterations: (1..=n).collect(),
            chains,
            imputed: vec![],
        };
        let reg = Registry::from_names(&draws.names, &[]);
        (draws, reg)
    }

    #[test]
    fn constant_draws_summary() {
        let (d, reg) = toy_draws(vec![[3.0, 1.0].repeat(20)]);
        let s = summarize_draws(&d, &reg, SummaryHeader::default()).unwrap();
        let p = s.get("beta.0").unwrap();
        assert_eq!((p.mean, p.sd, p.q025, p.q500, p.q975), (3.0, 0.0, 3.0, 3.0, 3.0));
        assert!(p.ess_degenerate);
    }

    #[test]
    fn four_draws_median() {
        let (d, reg) = toy_draws(vec![vec![1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0]]);
        let s = summarize_draws(&d, &reg, SummaryHeader::default()).unwrap();
        let p = s.get("beta.0").unwrap();
        assert_eq!((p.mean, p.q500), (2.5, 2.5));
    }

    #[test]
    fn chain_permutation_leaves_pooled_summary_unchanged() {
        let a: Vec<f64> = iid(5, 200);
        let b: Vec<f64> = iid(6, 200);
        let (d1, reg) = toy_draws(vec![a.clone(), b.clone()]);
        let (d2, _) = toy_draws(vec![b, a]);
        let s1 = summarize_draws(&d1, &reg, SummaryHeader::default()).unwrap();
        let s2 = summarize_draws(&d2, &reg, SummaryHeader::default()).unwrap();
        for (p, q) in s1.params.iter().zip(&s2.params) {
            assert_eq!((p.mean, p.q025, p.q500, p.q975), (q.mean, q.q025, q.q500, q.q975));
        }
    }

    #[test]
    fn sections_partition_registry_and_render() {
        let names = ["beta.0", "beta.z1", "beta.x", "alpha.x.0", "gamma.x.0", "gamma.x", "tau.moi", "tau.x.imp"];
        let reg = Registry::from_names(&names, &["x".to_string()]);
        let draws = Draws {
            names: names.iter().map(|s| s.to_string()).collect(),
            iterations: (1..=50).collect(),
            chains: vec![iid(9, 50 * names.len()).iter().map(|v| v.abs() + 0.1).collect()],
            imputed: vec![],
        };
        let s = summarize_draws(&draws, &reg, SummaryHeader::default()).unwrap();
        let total: usize = Block::ALL.iter().map(|b| s.section(*b).count()).sum();
        assert_eq!(total, names.len());
        let text = s.render_text();
        for h in [
            "Fixed effects for model of interest:",
            "Coefficient for variable with measurement error and/or missingness:",
            "Fixed effects for imputation model:",
            "Fixed effects for missingness model:",
            "Model hyperparameters (apart from beta.x, gamma.x):",
            "Precision for x imp model",
        ] {
            assert!(text.contains(h), "missing {h:?} in\n{text}");
        }
        let csv = s.render_csv();
        assert!(csv.starts_with("parameter,section,mean,sd,q025,q500,q975,rhat,ess\n"));
        assert_eq!(csv.lines().count(), names.len() + 1);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(2.036781), "2.0368");
        assert_eq!(fmt_num(-0.019587), "-0.019587");
        assert_eq!(fmt_num(75.902), "75.902");
        assert_eq!(fmt_num(f64::NAN), "NA");
    }
}
