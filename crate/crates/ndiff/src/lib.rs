//! Dense f64 tensors with tape-based reverse-mode differentiation, an Adam
//! optimizer and a finite-difference gradient checker.

mod error;
pub mod gradcheck;
mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::DropoutKey;
pub use optim::Adam;
pub use params::{ParamGrads, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
