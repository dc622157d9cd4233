//! Dilated point convolutions on 3D point clouds.
//!
//! A point convolution aggregates, for every point, the features of a local
//! neighborhood weighted by a learned kernel MLP evaluated at relative
//! positions. The dilated variant takes the `k·d` nearest neighbors in sorted
//! order and keeps every `d`-th one, which enlarges the receptive field
//! without adding parameters.
//!
//! Modules:
//! * [`pointcloud`]: data model, file formats, crops, synthetic scenes
//! * [`spatial`]: kd-tree k-NN, dilated neighbor selection, brute-force oracle
//! * [`nn`]: matrices, MLPs, loss, Adam, checkpoints
//! * [`dpc`]: the point convolution layer, network and training loop
//! * [`receptive`]: receptive-field tracing and export
//! * [`metrics`]: confusion matrix, mIoU, mAcc, oAcc

pub mod dpc;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pointcloud;
pub mod receptive;
pub mod spatial;

pub use error::{Error, Result};
