//! Minimal CPU building blocks for the reconstruction, agent and policy
//! networks: single-sample activations, im2col convolutions, pooling,
//! learned upsampling, dense layers, a named parameter store with
//! checkpoints, and Adam.

pub mod act;
pub mod adam;
pub mod desc;
pub mod gemm;
pub mod layers;
pub mod params;

pub use act::Act;
pub use adam::{Adam, AdamConfig};
pub use desc::LayerDesc;
pub use layers::{conv_out, lrelu, lrelu_backward, sigmoid, sum_pool, sum_pool_backward, Conv2d, Conv3dTime, Linear, Upsample};
pub use params::{Grads, Param, ParamId, ParamStore};
