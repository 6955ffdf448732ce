//! Temporally structured embedding training.

pub mod embedder;
pub mod loss;
pub mod model_io;
pub mod scale;

pub use embedder::{train_toy_embedder, FrameEmbedder, TrainConfig, TrainedModel, TrainingCorpus};
pub use loss::{
    joint_softmax, similarity, tacos_gradients, tacos_loss, BatchLoss, ClusterCenters, Gradients,
    LossItem, LossOutput,
};
pub use scale::{update_scale, AdaptiveScale};
