//! The (dilated) point convolution layer, the stacked network with
//! segmentation and classification heads, and the training loop.

mod layer;
mod neighborhood;
mod network;
mod train;

pub use layer::{layer_backward, layer_forward, LayerTape, PointConvLayer};
pub use neighborhood::{LayerNeighborhoods, Neighborhoods};
pub use network::{
    argmax_rows, loss_and_grad, loss_targets, network_backward, network_forward, network_forward_with,
    parameter_count, trunk_backward, trunk_forward, LayerSpec, LossOutput, Mode, Network, NetworkConfig,
    NetworkGrads, NetworkTape, TrunkOutput,
};
pub use train::{evaluate, train, EpochRecord, TrainConfig, TrainState};
