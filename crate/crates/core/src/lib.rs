//! Single-exemplar adversarial-expansion training and discriminator-guided
//! sampling of seamlessly tileable albedo + normal texture stacks.

pub mod cli;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod sampler;
pub mod stack_io;
pub mod tileability;
pub mod trainer;

pub use error::{Error, Result};
pub use stack_io::{CropSpec, MapKind, TextureStack};
