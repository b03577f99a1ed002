pub mod activations;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inception;
mod linalg;
pub mod model_space;
pub mod network;
pub mod tensor;
pub mod train_eval;
