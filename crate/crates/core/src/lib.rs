pub mod adi;
pub mod error;
pub mod mc_sim;
pub mod models;
pub mod pipeline;
pub mod realized;
pub mod spectral;

pub use error::{Error, Result};
pub use models::{HestonParams, JumpParams, SwapSpec};
