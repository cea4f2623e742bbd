use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChemError {
    #[error("SMILES error at position {pos} in {input:?}: {msg}")]
    Smiles {
        input: String,
        pos: usize,
        msg: String,
    },
    #[error("duplicate map number {0}")]
    DuplicateMap(u32),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("reaction error: {0}")]
    Reaction(String),
    #[error("product atom {index} ({symbol}) has no map number")]
    UnmappedProductAtom { index: usize, symbol: String },
    #[error("product map number {0} does not occur among reactant atoms")]
    MissingReactantMap(u32),
    #[error("descriptor {what} value {value} outside table of size {size}")]
    Descriptor {
        what: &'static str,
        value: i64,
        size: usize,
    },
    #[error("tokenizer could not match {residual:?} at position {pos}")]
    Token { pos: usize, residual: String },
    #[error("invalid selectivity input: {0}")]
    Selectivity(String),
}

pub type Result<T> = std::result::Result<T, ChemError>;
