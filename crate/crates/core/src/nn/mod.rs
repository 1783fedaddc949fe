//! Parameters, layers and optimizer shared by the U-Net and control branches.

mod adam;
mod layers;
mod params;

pub use adam::Adam;
pub use layers::{timestep_embed, Conv, GroupNorm, Init, Linear, ResBlock};
pub use params::{Bound, ParamId, ParamStore};
