use crate::data::Dataset;
use crate::formula::{Formula, FormulaError, Naming, Term};

/// A design column factor: either fixed data or the latent covariate of
/// error variable `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Data(Vec<f64>),
    Latent(usize),
}

impl Factor {
    fn value(&self, i: usize, latents: &[&[f64]]) -> f64 {
        match self {
            Factor::Data(v) => v[i],
            Factor::Latent(k) => latents[*k][i],
        }
    }

    fn is_latent(&self, k: usize) -> bool {
        matches!(self, Factor::Latent(j) if *j == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnSpec {
    Intercept,
    Main(Factor),
    Interaction(Factor, Factor),
}

/// Design for a level whose columns may involve latent covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDesign {
    pub names: Vec<String>,
    pub nrows: usize,
    columns: Vec<ColumnSpec>,
}

impl LevelDesign {
    /// `latent_vars[k]` is the name of error variable `k`; any term variable
    /// matching one of them becomes a latent factor.
    pub fn new(
        formula: &Formula,
        data: &Dataset,
        latent_vars: &[String],
        naming: &Naming,
    ) -> Result<Self, FormulaError> {
        let n = data.nrows();
        let factor = |name: &str| -> Result<Factor, FormulaError> {
            if let Some(k) = latent_vars.iter().position(|v| v == name) {
                return Ok(Factor::Latent(k));
            }
            let col =
                data.column(name).ok_or_else(|| FormulaError::UnknownVariable(name.to_string()))?;
            if let Some(row) = col.values.iter().position(|v| !v.is_finite()) {
                return Err(FormulaError::NonFinite { column: name.to_string(), row });
            }
            Ok(Factor::Data(col.values.clone()))
        };
        let mut columns = Vec::with_capacity(formula.ncols());
        if formula.intercept {
            columns.push(ColumnSpec::Intercept);
        }
        for term in &formula.terms {
            columns.push(match term {
                Term::Main(v) => ColumnSpec::Main(factor(v)?),
                Term::Interaction(a, b) => ColumnSpec::Interaction(factor(a)?, factor(b)?),
            });
        }
        Ok(LevelDesign { names: naming.coefficient_names(formula), nrows: n, columns })
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn depends_on(&self, k: usize) -> bool {
        self.columns.iter().any(|c| match c {
            ColumnSpec::Intercept => false,
            ColumnSpec::Main(f) => f.is_latent(k),
            ColumnSpec::Interaction(a, b) => a.is_latent(k) || b.is_latent(k),
        })
    }

    /// Writes the full row-major matrix into `out` (length nrows * ncols).
    pub fn fill(&self, latents: &[&[f64]], out: &mut [f64]) {
        let p = self.ncols();
        debug_assert_eq!(out.len(), self.nrows * p);
        for i in 0..self.nrows {
            let row = &mut out[i * p..(i + 1) * p];
            for (j, col) in self.columns.iter().enumerate() {
                row[j] = match col {
                    ColumnSpec::Intercept => 1.0,
                    ColumnSpec::Main(f) => f.value(i, latents),
                    ColumnSpec::Interaction(a, b) => a.value(i, latents) * b.value(i, latents),
                };
            }
        }
    }

    pub fn matrix(&self, latents: &[&[f64]]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols()];
        self.fill(latents, &mut out);
        out
    }

    /// Linear predictor at row `i`.
    pub fn eta(&self, i: usize, latents: &[&[f64]], coefs: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(coefs)
            .map(|(col, c)| match col {
                ColumnSpec::Intercept => *c,
                ColumnSpec::Main(f) => c * f.value(i, latents),
                ColumnSpec::Interaction(a, b) => c * a.value(i, latents) * b.value(i, latents),
            })
            .sum()
    }

    /// Derivative of the linear predictor at row `i` with respect to latent `k`.
    ///
    /// The predictor is linear in each latent covariate, so this is the exact
    /// coefficient multiplying `latents[k][i]`.
    pub fn slope(&self, i: usize, k: usize, latents: &[&[f64]], coefs: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(coefs)
            .map(|(col, c)| match col {
                ColumnSpec::Main(f) if f.is_latent(k) => *c,
                ColumnSpec::Interaction(a, b) if a.is_latent(k) => c * b.value(i, latents),
                ColumnSpec::Interaction(a, b) if b.is_latent(k) => c * a.value(i, latents),
                _ => 0.0,
            })
            .sum()
    }
}
