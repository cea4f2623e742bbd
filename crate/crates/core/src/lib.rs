//! Reaction-center aligned graph encoders with sequence and pooled heads.

pub mod attention;
pub mod beam;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
pub mod train;
pub mod vocab;

pub use config::{Task, TrainConfig};
pub use error::{RalignError, Result};
pub use eval::{evaluate, predict_row, EvalReport, Prediction};
pub use features::ReactionInput;
pub use model::{Model, Scaler};
pub use train::{fit, train_task, train_task_with, Control, EpochRecord, TrainOutcome};
