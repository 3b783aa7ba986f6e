//! File formats, the processing pipeline and the command-line front end
//! for two-layer 3D photos. The algorithms live in [`layered3d_core`].

pub mod bundle;
pub mod dataset;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
pub use layered3d_core;
