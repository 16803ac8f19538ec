pub mod error;
pub mod numerics;
pub mod oracle;
pub mod regimes;
pub mod surface_bounds;
pub mod verifier;

pub use error::{Error, Result};
