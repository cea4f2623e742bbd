use thiserror::Error;

#[derive(Debug, Error)]
pub enum RalignError {
    #[error(transparent)]
    Chem(#[from] chem::ChemError),
    #[error(transparent)]
    Tensor(#[from] ndiff::TensorError),
    #[error(transparent)]
    Data(#[from] ralign_data::DataError),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
}

impl RalignError {
    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            RalignError::Chem(_) => "chem",
            RalignError::Tensor(_) => "tensor",
            RalignError::Data(_) => "data",
            RalignError::Config(_) => "config",
            RalignError::Checkpoint(_) => "checkpoint",
            RalignError::Io(_) => "io",
            RalignError::Json(_) => "io",
            RalignError::Diverged { .. } => "diverged",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "data" => 3,
            "chem" => 4,
            "checkpoint" => 5,
            "io" => 6,
            "tensor" => 7,
            _ => 8,
        }
    }
}

pub type Result<T> = std::result::Result<T, RalignError>;
