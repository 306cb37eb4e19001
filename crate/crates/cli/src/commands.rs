use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use memi_core::data::{read_csv, save_csv};
use memi_core::inference::{summarize_draws, SummaryHeader};
use memi_core::model::{Registry, Severity};
use memi_core::{
    assemble_joint_model, naive_fit, parse_formula, run_chains_with_threads, simulate_classical_repeats,
    simulate_missing_scenario, summarize, validate_spec, Column, Dataset, Draws, Family, FitConfig,
    FitSummary, JointModel, NaiveFit, RepeatsScenario,
};

use crate::error::CliError;
use crate::output::{
    parse_draws, read_bytes, render_draws, render_imputations, render_provenance, write_file,
};

/// R-hat above which `fit` and `compare` print a convergence warning.
pub const RHAT_WARNING: f64 = 1.05;

/// Progress messages go to stderr unless quiet; `always` ignores quiet.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub fn always(&self, msg: &str) {
        eprintln!("{msg}");
    }
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub config: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    /// Overrides the seed in the config.
    pub seed: Option<u64>,
    /// Defaults to the number of chains.
    pub threads: Option<usize>,
    pub quiet: bool,
}

pub struct FitOutcome {
    pub config: FitConfig,
    pub data: Dataset,
    pub model: JointModel,
    pub draws: Draws,
    pub summary: FitSummary,
    pub warnings: Vec<String>,
}

/// One line naming every column with masked cells.
pub fn masked_report(data: &Dataset) -> String {
    let parts: Vec<String> = data
        .columns()
        .filter(|(_, c)| c.n_missing() > 0)
        .map(|(name, c)| format!("{name} {}/{}", c.n_missing(), data.nrows()))
        .collect();
    if parts.is_empty() {
        "masked cells: none".into()
    } else {
        format!("masked cells: {}", parts.join(", "))
    }
}

fn load_inputs(args: &FitArgs, log: Log) -> Result<(FitConfig, Vec<u8>, Dataset, Vec<u8>), CliError> {
    let config_bytes = read_bytes(&args.config)?;
    let text = String::from_utf8(config_bytes.clone())
        .map_err(|_| CliError::Validation(format!("config: {} is not UTF-8", args.config.display())))?;
    let mut config = FitConfig::from_toml_str(&text)?;
    if let Some(seed) = args.seed {
        config.sampler.seed = seed;
    }
    let data_bytes = read_bytes(&args.data)?;
    let data = read_csv(data_bytes.as_slice())?;
    log.always(&masked_report(&data));
    Ok((config, config_bytes, data, data_bytes))
}

fn build_model(config: &FitConfig, data: &Dataset, log: Log) -> Result<JointModel, CliError> {
    let spec = config.to_model_spec(data)?;
    for d in validate_spec(&spec, data) {
        if d.severity == Severity::Warning {
            log.always(&format!("warning: {}", d.message));
        }
    }
    Ok(assemble_joint_model(&spec, data)?)
}

/// Loads, validates, samples, summarizes and writes every run artifact.
pub fn fit(args: &FitArgs) -> Result<FitOutcome, CliError> {
    let log = Log { quiet: args.quiet };
    let (config, config_bytes, data, data_bytes) = load_inputs(args, log)?;
    let model = build_model(&config, &data, log)?;
    let chain = config.chain_config();
    let threads = args.threads.unwrap_or(chain.chains).max(1);
    log.info(&format!(
        "sampling {} chain(s) x {} sweeps ({} burnin, thin {}) on {} thread(s)",
        chain.chains, chain.iterations, chain.burnin, chain.thin, threads
    ));
    let draws = run_chains_with_threads(&model, &chain, threads)?;
    let summary = summarize(&draws, &model)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_file(&args.out.join("draws.csv"), &render_draws(&draws))?;
    write_file(&args.out.join("summary.txt"), &summary.render_text())?;
    write_file(&args.out.join("summary.csv"), &summary.render_csv())?;
    write_file(&args.out.join("imputations.csv"), &render_imputations(&draws.imputed, &data))?;
    let provenance = render_provenance(
        &args.config,
        &config_bytes,
        &args.data,
        &data_bytes,
        config.sampler.seed,
        &config.to_toml_string(),
    );
    write_file(&args.out.join("provenance.txt"), &provenance)?;

    let mut warnings = Vec::new();
    if let Some(worst) = summary.params.iter().filter(|p| p.rhat.is_finite()).max_by(|a, b| a.rhat.total_cmp(&b.rhat))
    {
        if worst.rhat > RHAT_WARNING {
            warnings.push(format!(
                "warning: split R-hat for {} is {:.3} (> {RHAT_WARNING}); chains have not converged, run longer",
                worst.name, worst.rhat
            ));
        }
    }
    for w in &warnings {
        log.always(w);
    }
    if !args.quiet {
        print!("{}", summary.render_text());
    }
    log.info(&format!("wrote draws.csv, summary.txt, summary.csv, imputations.csv, provenance.txt to {}", args.out.display()));
    Ok(FitOutcome { config, data, model, draws, summary, warnings })
}

/// Dataset with each error variable replaced by its `<v>_true` column, or
/// None when some variable has no truth column.
pub fn with_true_covariates(data: &Dataset, variables: &[String]) -> Option<Dataset> {
    if variables.is_empty() {
        return None;
    }
    let mut out = Dataset::default();
    for (name, col) in data.columns() {
        if !variables.iter().any(|v| v == name) {
            out.insert(name.to_string(), col.clone()).ok()?;
        }
    }
    for v in variables {
        let truth = data.column(&format!("{v}_true"))?;
        let col = Column { values: truth.values.clone(), missing: truth.missing.clone() };
        out.insert(v.clone(), col).ok()?;
    }
    Some(out)
}

/// Coefficient estimate with its 95% interval under one of the compared fits.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub parameter: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub struct CompareOutcome {
    pub fit: FitOutcome,
    pub naive: NaiveFit,
    pub correct: Option<NaiveFit>,
    pub rows: Vec<CompareRow>,
}

fn naive_rows(label: &str, fit: &NaiveFit) -> Vec<CompareRow> {
    fit.names
        .iter()
        .map(|name| {
            let (b, _) = fit.get(name).unwrap();
            let (lo, hi) = fit.interval(name).unwrap();
            CompareRow { model: label.into(), parameter: name.clone(), estimate: b, lower: lo, upper: hi }
        })
        .collect()
}

pub fn render_compare_text(outcome: &CompareOutcome) -> String {
    let models: Vec<&str> = if outcome.correct.is_some() {
        vec!["corrected", "naive", "correct_x"]
    } else {
        vec!["corrected", "naive"]
    };
    let params: Vec<&str> = outcome.naive.names.iter().map(String::as_str).collect();
    let cell = |m: &str, p: &str| -> String {
        outcome
            .rows
            .iter()
            .find(|r| r.model == m && r.parameter == p)
            .map_or_else(|| "-".into(), |r| format!("{:.4} [{:.4}, {:.4}]", r.estimate, r.lower, r.upper))
    };
    let mut table: Vec<Vec<String>> = vec![std::iter::once("parameter".to_string())
        .chain(models.iter().map(|m| m.to_string()))
        .collect()];
    for p in &params {
        table.push(std::iter::once(p.to_string()).chain(models.iter().map(|m| cell(m, p))).collect());
    }
    let widths: Vec<usize> =
        (0..table[0].len()).map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
    let mut out = String::from("Model of interest coefficients: estimate [95% interval]\n");
    for row in &table {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    let n = outcome.fit.data.nrows();
    let _ = writeln!(out, "corrected: posterior mean and equal-tailed interval of the joint model");
    let averaged = if outcome.fit.config.repeated_observations.iter().any(|r| *r) { ", repeats averaged" } else { "" };
    let _ = writeln!(
        out,
        "naive: maximum likelihood with Wald interval, complete cases ({} of {n} rows){averaged}",
        outcome.naive.n_used
    );
    if let Some(c) = &outcome.correct {
        let _ = writeln!(out, "correct_x: as naive but using the true covariate ({} of {n} rows)", c.n_used);
    }
    out
}

pub fn render_compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("model,parameter,estimate,lower,upper\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.model, r.parameter, r.estimate, r.lower, r.upper);
    }
    out
}

/// Runs `fit`, then the naive fit and, when truth columns exist, the fit on
/// the true covariate; writes compare.txt and compare.csv next to the fit.
pub fn compare(args: &FitArgs) -> Result<CompareOutcome, CliError> {
    let fit = fit(args)?;
    let log = Log { quiet: args.quiet };
    let formula = parse_formula(&fit.config.formula_moi).map_err(|e| CliError::Validation(format!("formula: {e}")))?;
    let family = fit.config.family_moi;
    let naive = naive_fit(&formula, &fit.data, family)?;
    let correct = match with_true_covariates(&fit.data, &fit.config.error_variable) {
        Some(d) => Some(naive_fit(&formula, &d, family)?),
        None => None,
    };

    let mut rows: Vec<CompareRow> = naive
        .names
        .iter()
        .filter_map(|name| {
            fit.summary.get(name).map(|p| CompareRow {
                model: "corrected".into(),
                parameter: name.clone(),
                estimate: p.mean,
                lower: p.q025,
                upper: p.q975,
            })
        })
        .collect();
    rows.extend(naive_rows("naive", &naive));
    if let Some(c) = &correct {
        rows.extend(naive_rows("correct_x", c));
    }
    let outcome = CompareOutcome { fit, naive, correct, rows };
    let text = render_compare_text(&outcome);
    write_file(&args.out.join("compare.txt"), &text)?;
    write_file(&args.out.join("compare.csv"), &render_compare_csv(&outcome.rows))?;
    if !args.quiet {
        print!("\n{text}");
    }
    log.info(&format!("wrote compare.txt, compare.csv to {}", args.out.display()));
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    MissingMar,
    ClassicalRepeats,
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub scenario: Scenario,
    pub seed: u64,
    pub n: usize,
    /// Number of repeat columns for `classical_repeats`.
    pub repeats: usize,
    /// Gaussian uses the unit-variance attenuation scenario, binomial the
    /// logistic blood-pressure replica.
    pub family: Family,
    pub out: PathBuf,
    pub quiet: bool,
}

/// `data.csv` -> `data.truth.toml`.
pub fn truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.truth.toml"))
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let log = Log { quiet: args.quiet };
    if args.n == 0 {
        return Err(CliError::Validation("simulate: n must be positive".into()));
    }
    let (data, truth) = match args.scenario {
        Scenario::MissingMar => simulate_missing_scenario(args.seed, args.n)?,
        Scenario::ClassicalRepeats => {
            let scenario = match args.family {
                Family::Gaussian => RepeatsScenario::attenuation(),
                Family::Binomial => RepeatsScenario::framingham(),
            };
            simulate_classical_repeats(args.seed, args.n, args.repeats, &scenario, args.family)?
        }
    };
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    save_csv(&data, &args.out)?;
    let sidecar = truth_path(&args.out);
    let text = toml::to_string(&truth).map_err(|e| CliError::Io(format!("truth: {e}")))?;
    write_file(&sidecar, &text)?;
    log.info(&format!("wrote {} and {}", args.out.display(), sidecar.display()));
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SummaryArgs {
    pub draws: PathBuf,
    pub config: PathBuf,
    /// Directory for summary.txt and summary.csv; print only when absent.
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

/// Summary header recovered from a config alone.
pub fn header_from_config(config: &FitConfig) -> Result<SummaryHeader, CliError> {
    let norm = |s: &String| -> Result<Option<String>, CliError> {
        if s.trim().is_empty() {
            return Ok(None);
        }
        parse_formula(s).map(|f| Some(f.to_string())).map_err(|e| CliError::Validation(format!("formula: {e}")))
    };
    Ok(SummaryHeader {
        formula_moi: norm(&config.formula_moi)?.unwrap_or_default(),
        formula_imp: config.formula_imp.iter().map(norm).collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect(),
        formula_mis: config.formula_mis.iter().map(norm).collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect(),
        error_types: config
            .error_variable
            .iter()
            .zip(&config.error_type)
            .map(|(v, ts)| (v.clone(), ts.iter().map(|t| t.to_string()).collect()))
            .collect(),
    })
}

/// Re-renders a summary from a draws file.
pub fn summary(args: &SummaryArgs) -> Result<FitSummary, CliError> {
    let text = fs::read_to_string(&args.draws).map_err(|e| CliError::io(&args.draws, e))?;
    let draws = parse_draws(&text)?;
    let config = memi_core::load_config(&args.config)?;
    let registry = Registry::from_names(&draws.names, &config.error_variable);
    let summary = summarize_draws(&draws, &registry, header_from_config(&config)?)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_file(&out.join("summary.txt"), &summary.render_text())?;
        write_file(&out.join("summary.csv"), &summary.render_csv())?;
    }
    if !args.quiet {
        print!("{}", summary.render_text());
    }
    Ok(summary)
}
