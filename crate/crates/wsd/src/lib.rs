//! From-scratch bidirectional-LSTM word-sense-disambiguation engine:
//! corpus ingestion, embedding loading, manually derived backpropagation
//! through time, SGD-with-momentum training, evaluation, and checkpointing.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod reg;
pub mod train;

pub use config::{AblationMode, TrainConfig};
pub use error::{Result, WsdError};
