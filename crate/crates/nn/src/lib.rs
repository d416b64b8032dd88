//! Convolutional encoder-decoder for phase-correction regression.
//!
//! Everything runs on the CPU in NCHW layout with hand-written backward
//! passes. Networks are generic over [`Float`] so gradient checks can run
//! in `f64` while training runs in `f32`.

pub mod checkpoint;
pub mod error;
pub mod float;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMetadata};
pub use error::{Error, Result};
pub use float::Float;
pub use layers::Mode;
pub use loss::{mse_loss, mse_loss_grad};
pub use network::{build_network, ConvSpec, DecoderStage, EncoderStage, Network, NetworkSpec};
pub use optim::{Adam, AdamConfig};
pub use tensor::Tensor;
pub use train::{train, train_step, TrainOptions, TrainReport, TrainingSet};
