use std::fmt;

/// Summary section a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    MoiFixed,
    ErrorCoefficient,
    Imputation,
    Missingness,
    Precision,
}

impl Block {
    pub const ALL: [Block; 5] =
        [Block::MoiFixed, Block::ErrorCoefficient, Block::Imputation, Block::Missingness, Block::Precision];

    pub fn as_str(self) -> &'static str {
        match self {
            Block::MoiFixed => "moi",
            Block::ErrorCoefficient => "error",
            Block::Imputation => "imputation",
            Block::Missingness => "missingness",
            Block::Precision => "hyperparameter",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub block: Block,
    /// Row label in the printed summary.
    pub label: String,
}

/// Ordered parameter names with their block assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Registry {
    params: Vec<ParamInfo>,
    error_variables: Vec<String>,
}

fn classify(name: &str, error_vars: &[String]) -> (Block, String) {
    if let Some(rest) = name.strip_prefix("tau.") {
        if rest == "moi" {
            return (Block::Precision, "Precision for model of interest".into());
        }
        if let Some((var, level)) = rest.rsplit_once('.') {
            return (Block::Precision, format!("Precision for {var} {level} model"));
        }
        return (Block::Precision, name.into());
    }
    for v in error_vars {
        if name == format!("beta.{v}") || name == format!("gamma.{v}") {
            return (Block::ErrorCoefficient, name.into());
        }
    }
    let block = if name.starts_with("alpha.") {
        Block::Imputation
    } else if name.starts_with("gamma.") {
        Block::Missingness
    } else {
        Block::MoiFixed
    };
    (block, name.into())
}

impl Registry {
    /// Rebuilds a registry from parameter names alone; the block of each name
    /// follows from the naming convention and the error variable list.
    pub fn from_names<S: AsRef<str>>(names: &[S], error_vars: &[String]) -> Self {
        let params = names
            .iter()
            .map(|n| {
                let (block, label) = classify(n.as_ref(), error_vars);
                ParamInfo { name: n.as_ref().to_string(), block, label }
            })
            .collect();
        Registry { params, error_variables: error_vars.to_vec() }
    }

    pub fn params(&self) -> &[ParamInfo] {
        &self.params
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn error_variables(&self) -> &[String] {
        &self.error_variables
    }

    pub fn in_block(&self, block: Block) -> impl Iterator<Item = (usize, &ParamInfo)> {
        self.params.iter().enumerate().filter(move |(_, p)| p.block == block)
    }
}
