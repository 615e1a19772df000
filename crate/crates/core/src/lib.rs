//! Differentiable geometry for unsupervised depth and ego-motion estimation:
//! back-projection, ego-motion warping with principled masks, ICP-based 3-d
//! alignment loss with approximate gradients, photometric/SSIM/smoothness
//! losses, and a direct optimizer that descends them on synthetic pairs.

pub mod camera;
pub mod error;
pub mod icp;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod optimize;
pub mod pyramid;
pub mod se3;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
