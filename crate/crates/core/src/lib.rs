//! Image compression by overfitting a sinusoidal MLP to an image, sparsifying
//! it under a bits-per-pixel budget and storing the surviving weights at
//! half precision.
//!
//! The pieces, in pipeline order:
//!
//! - [`imageio`]: images as coordinate/RGB datasets, PSNR.
//! - [`siren`]: the network, its forward pass and analytic gradients.
//! - [`hardconcrete`]: stochastic L0 gates and their deterministic medians.
//! - [`bpp`]: binary16 casting and bit accounting.
//! - [`optim`]: Adam and projected dual ascent.
//! - [`trainer`]: dense, constrained and magnitude-pruning training loops.
//! - [`codec`]: the `.l0ne` file format.
//! - [`cli`]: the `sparse-inr` command.

pub mod bpp;
pub mod cli;
pub mod codec;
pub mod error;
pub mod hardconcrete;
pub mod imageio;
pub mod optim;
pub mod real;
pub mod siren;
pub mod trainer;

pub use error::{DecodeError, Error, Result};
pub use hardconcrete::{GateParams, HardConcreteConfig};
pub use imageio::PixelDataset;
pub use siren::{SirenConfig, SirenParams};
pub use trainer::{train, Method, MetricsLog, TrainConfig, TrainedModel};
