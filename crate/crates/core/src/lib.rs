//! Two-layer 3D photo construction and rendering.
//!
//! Everything in this crate is a pure function over in-memory rasters and
//! works without `std` (only `alloc` is required). File formats, the
//! pipeline driver and the command line live in the `layered3d` crate.
//!
//! The flow from a photo to a novel view is:
//!
//! 1. [`layering::preprocess_disparity`] smooths and dilates the disparity.
//! 2. [`layering::visibility_map`] gives the soft foreground opacity, and
//!    [`layering::disocclusion_map`] marks background that may become visible.
//! 3. [`inpaint::inpaint_rgbd`] fills that region from the far side of each
//!    depth edge.
//! 4. [`view::synthesize_view`] meshes both layers, rasterizes them into the
//!    new camera and composites foreground over background.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
pub mod filter;
pub mod geometry;
pub mod inpaint;
pub mod layering;
pub mod metrics;
mod par;
pub mod raster;
pub mod render;
pub mod view;

pub use error::{Error, Result};
pub use raster::{DisparityMap, GradientField, ImageBuffer, Plane};
