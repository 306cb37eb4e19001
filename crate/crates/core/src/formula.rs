//! Model formulas of the form `response ~ term + term + ...` and the design
//! matrices built from them.
//!
//! Supported syntax is deliberately small: main effects, two-way interactions
//! written `a:b`, an explicit `1`, and a leading `-1` to drop the intercept.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("formula must contain exactly one '~': {0:?}")]
    MissingTilde(String),
    #[error("formula has an empty response")]
    EmptyResponse,
    #[error("formula has an empty right-hand side")]
    EmptyRhs,
    #[error("malformed term {0:?}")]
    MalformedToken(String),
    #[error("unsupported formula syntax in {0:?}: only main effects, `a:b` and `-1` are allowed")]
    Unsupported(String),
    #[error("duplicate term {0:?}")]
    DuplicateTerm(String),
    #[error("response {0:?} also appears on the right-hand side")]
    ResponseInTerms(String),
    #[error("interaction {0:?} must join two distinct variables")]
    DegenerateInteraction(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("column {column:?} has a missing or non-finite value at row {row}")]
    NonFinite { column: String, row: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Main(String),
    Interaction(String, String),
}

impl Term {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Term::Main(v) => vec![v.as_str()],
            Term::Interaction(a, b) => vec![a.as_str(), b.as_str()],
        }
    }

    pub fn involves(&self, var: &str) -> bool {
        self.variables().contains(&var)
    }

    fn key(&self) -> Vec<&str> {
        let mut vars = self.variables();
        vars.sort_unstable();
        vars
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Main(v) => f.write_str(v),
            Term::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    pub terms: Vec<Term>,
    pub intercept: bool,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_term(token: &str) -> Result<Term, FormulaError> {
    if token.contains(['*', '(', ')', '^', '|', '/', '%', '-', '~']) {
        return Err(FormulaError::Unsupported(token.to_string()));
    }
    let parts: Vec<&str> = token.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [v] if is_identifier(v) => Ok(Term::Main(v.to_string())),
        [a, b] if is_identifier(a) && is_identifier(b) => {
            if a == b {
                Err(FormulaError::DegenerateInteraction(token.to_string()))
            } else {
                Ok(Term::Interaction(a.to_string(), b.to_string()))
            }
        }
        [_, _, _, ..] => Err(FormulaError::Unsupported(token.to_string())),
        _ => Err(FormulaError::MalformedToken(token.to_string())),
    }
}

/// Parses `response ~ rhs`. Whitespace is insignificant.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let sides: Vec<&str> = text.split('~').collect();
    if sides.len() != 2 {
        return Err(FormulaError::MissingTilde(text.to_string()));
    }
    let response = sides[0].trim();
    if response.is_empty() {
        return Err(FormulaError::EmptyResponse);
    }
    if !is_identifier(response) {
        return Err(FormulaError::MalformedToken(response.to_string()));
    }
    let rhs = sides[1].trim();
    if rhs.is_empty() {
        return Err(FormulaError::EmptyRhs);
    }

    let mut intercept = true;
    let mut terms: Vec<Term> = Vec::new();
    for (pos, raw) in rhs.split('+').enumerate() {
        let token: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        if token.is_empty() {
            return Err(FormulaError::MalformedToken(raw.to_string()));
        }
        match token.as_str() {
            "-1" if pos == 0 => intercept = false,
            "-1" | "0" => return Err(FormulaError::Unsupported(token)),
            "1" => {}
            _ => {
                let term = parse_term(&token)?;
                if term.involves(response) {
                    return Err(FormulaError::ResponseInTerms(response.to_string()));
                }
                if terms.iter().any(|t| t.key() == term.key()) {
                    return Err(FormulaError::DuplicateTerm(term.to_string()));
                }
                terms.push(term);
            }
        }
    }
    if !intercept && terms.is_empty() {
        return Err(FormulaError::EmptyRhs);
    }
    Ok(Formula { response: response.to_string(), terms, intercept })
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ ", self.response)?;
        let mut parts: Vec<String> = Vec::new();
        if !self.intercept {
            parts.push("-1".to_string());
        } else if self.terms.is_empty() {
            parts.push("1".to_string());
        }
        parts.extend(self.terms.iter().map(Term::to_string));
        f.write_str(&parts.join(" + "))
    }
}

impl Formula {
    /// All variable names referenced on the right-hand side, in order of first use.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for v in self.terms.iter().flat_map(Term::variables) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.terms.iter().any(|t| t.involves(var))
    }

    pub fn ncols(&self) -> usize {
        usize::from(self.intercept) + self.terms.len()
    }
}

/// How coefficient names are derived for a model level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Naming {
    /// `beta.0`, `beta.<var>`.
    ModelOfInterest,
    /// `alpha.<errvar>.0`, `alpha.<errvar>.<var>`.
    Imputation(String),
    /// `gamma.<errvar>.0`, `gamma.<errvar>.<var>`, and `gamma.<errvar>` for the error variable itself.
    Missingness(String),
}

impl Naming {
    pub fn intercept_name(&self) -> String {
        match self {
            Naming::ModelOfInterest => "beta.0".to_string(),
            Naming::Imputation(v) => format!("alpha.{v}.0"),
            Naming::Missingness(v) => format!("gamma.{v}.0"),
        }
    }

    pub fn term_name(&self, term: &Term) -> String {
        match self {
            Naming::ModelOfInterest => format!("beta.{term}"),
            Naming::Imputation(v) => format!("alpha.{v}.{term}"),
            Naming::Missingness(v) => match term {
                Term::Main(t) if t == v => format!("gamma.{v}"),
                _ => format!("gamma.{v}.{term}"),
            },
        }
    }

    pub fn coefficient_names(&self, formula: &Formula) -> Vec<String> {
        let mut names = Vec::with_capacity(formula.ncols());
        if formula.intercept {
            names.push(self.intercept_name());
        }
        names.extend(formula.terms.iter().map(|t| self.term_name(t)));
        names
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ncols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }
}

/// Builds the design matrix for `formula` over `data`.
///
/// `substitute` supplies whole columns that take precedence over the dataset,
/// which is how the sampler injects current latent covariate values.
pub fn build_design(
    formula: &Formula,
    data: &Dataset,
    substitute: &HashMap<String, Vec<f64>>,
    naming: &Naming,
) -> Result<DesignMatrix, FormulaError> {
    let n = data.nrows();
    let lookup = |name: &str| -> Result<&[f64], FormulaError> {
        if let Some(v) = substitute.get(name) {
            return Ok(v.as_slice());
        }
        data.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| FormulaError::UnknownVariable(name.to_string()))
    };
    let check = |name: &str, col: &[f64]| -> Result<(), FormulaError> {
        if col.len() != n {
            return Err(FormulaError::UnknownVariable(name.to_string()));
        }
        match col.iter().position(|v| !v.is_finite()) {
            Some(row) => Err(FormulaError::NonFinite { column: name.to_string(), row }),
            None => Ok(()),
        }
    };

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(formula.ncols());
    if formula.intercept {
        columns.push(vec![1.0; n]);
    }
    for term in &formula.terms {
        match term {
            Term::Main(v) => {
                let col = lookup(v)?;
                check(v, col)?;
                columns.push(col.to_vec());
            }
            Term::Interaction(a, b) => {
                let (ca, cb) = (lookup(a)?, lookup(b)?);
                check(a, ca)?;
                check(b, cb)?;
                columns.push(ca.iter().zip(cb).map(|(x, y)| x * y).collect());
            }
        }
    }

    let ncols = columns.len();
    let mut values = vec![0.0; n * ncols];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[i * ncols + j] = *v;
        }
    }
    Ok(DesignMatrix { nrows: n, ncols, values, names: naming.coefficient_names(formula) })
}
