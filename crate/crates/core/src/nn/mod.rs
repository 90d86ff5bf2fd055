//! Small dense, convolutional and recurrent networks trained with RMSProp.
//!
//! Parameters live in one flat `Vec<f64>` per model; layers address it
//! through [`params::Segment`] views.

pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use models::{argmax, Cnn, LstmNet, Mlp};
pub use optim::RmsProp;
pub use train::{Differentiable, Mode, TrainLog, TrainParams};
