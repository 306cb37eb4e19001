//! File formats written by `fit` and read back by `summary`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use memi_core::inference::quantile_sorted;
use memi_core::sampler::ImputedDraws;
use memi_core::{Dataset, Draws};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DRAWS_HEADER: &str = "chain,iteration,parameter,value";

/// Long format, one line per (chain, retained sweep, parameter). Chains are
/// numbered from 1; values use the shortest representation that round-trips.
pub fn render_draws(draws: &Draws) -> String {
    let p = draws.names.len();
    let mut out = String::with_capacity(draws.n_chains() * draws.n_retained() * p * 24);
    out.push_str(DRAWS_HEADER);
    out.push('\n');
    for (c, chain) in draws.chains.iter().enumerate() {
        for (t, sweep) in draws.iterations.iter().enumerate() {
            for (j, name) in draws.names.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", c + 1, sweep, name, chain[t * p + j]);
            }
        }
    }
    out
}

/// Parses a file written by [`render_draws`]. Imputed values are not stored
/// there, so the result has none.
pub fn parse_draws(text: &str) -> Result<Draws, CliError> {
    let bad = |line: usize, msg: &str| CliError::Validation(format!("draws file line {line}: {msg}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DRAWS_HEADER) {
        return Err(bad(1, &format!("expected header {DRAWS_HEADER:?}")));
    }
    let mut rows: Vec<(usize, usize, &str, f64)> = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(lineno, "expected 4 fields"));
        }
        let chain: usize = fields[0].parse().map_err(|_| bad(lineno, "bad chain"))?;
        let sweep: usize = fields[1].parse().map_err(|_| bad(lineno, "bad iteration"))?;
        let value: f64 = fields[3].parse().map_err(|_| bad(lineno, "bad value"))?;
        rows.push((chain, sweep, fields[2], value));
    }
    let Some(&(first_chain, first_sweep, _, _)) = rows.first() else {
        return Err(CliError::Validation("draws file has no draws".into()));
    };
    let names: Vec<String> = rows
        .iter()
        .take_while(|r| r.0 == first_chain && r.1 == first_sweep)
        .map(|r| r.2.to_string())
        .collect();
    let p = names.len();
    let mut iterations: Vec<usize> = Vec::new();
    for r in rows.iter().step_by(p).take_while(|r| r.0 == first_chain) {
        iterations.push(r.1);
    }
    let per_chain = p * iterations.len();
    if !rows.len().is_multiple_of(per_chain) {
        return Err(CliError::Validation("draws file: chains have unequal lengths".into()));
    }
    let mut chains: Vec<Vec<f64>> = Vec::new();
    for (c, block) in rows.chunks(per_chain).enumerate() {
        for (k, r) in block.iter().enumerate() {
            if r.0 != block[0].0 || r.1 != iterations[k / p] || r.2 != names[k % p] {
                return Err(CliError::Validation(format!(
                    "draws file: chain {} is not laid out like chain {first_chain}",
                    c + 1
                )));
            }
        }
        chains.push(block.iter().map(|r| r.3).collect());
    }
    Ok(Draws { names, iterations, chains, imputed: Vec::new() })
}

pub const IMPUTATIONS_HEADER: &str = "row,variable,mean,sd,q025,q975,truth";

/// Posterior marginals of each imputed entry. Rows are numbered from 1 as in
/// the data file; `truth` comes from a `<variable>_true` column when present.
pub fn render_imputations(imputed: &[ImputedDraws], data: &Dataset) -> String {
    let mut out = String::from(IMPUTATIONS_HEADER);
    out.push('\n');
    for block in imputed {
        let truth = data.column(&format!("{}_true", block.variable));
        let m = block.rows.len();
        for (r, &row) in block.rows.iter().enumerate() {
            let mut v: Vec<f64> =
                block.chains.iter().flat_map(|c| c.iter().skip(r).step_by(m.max(1)).copied()).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let t = truth.and_then(|c| c.get(row)).map_or_else(|| "NA".to_string(), |t| t.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row + 1,
                block.variable,
                mean,
                sd,
                quantile_sorted(&v, 0.025),
                quantile_sorted(&v, 0.975),
                t
            );
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance is a loadable config: the run facts are TOML comments above
/// the effective configuration.
pub fn render_provenance(
    config_path: &Path,
    config_bytes: &[u8],
    data_path: &Path,
    data_bytes: &[u8],
    seed: u64,
    effective_config: &str,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# memi {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config: {} sha256={}", config_path.display(), sha256_hex(config_bytes));
    let _ = writeln!(out, "# data: {} sha256={}", data_path.display(), sha256_hex(data_bytes));
    let _ = writeln!(out, "# seed: {seed}");
    out.push_str("# effective configuration follows\n");
    out.push_str(effective_config);
    out
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
