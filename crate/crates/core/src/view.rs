//! The two-layer scene and novel-view synthesis from it.

use crate::geometry::{build_mesh, CameraIntrinsics, CameraPose, DepthMapping, TriangleMesh};
use crate::layering::VisibilityMap;
use crate::render::{composite, render_layer, Composite, RenderedLayer};
use crate::{DisparityMap, Error, ImageBuffer, Result};

/// Foreground RGB + visibility + disparity over an inpainted RGB-D background.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBundle {
    pub fg_rgb: ImageBuffer,
    pub fg_visibility: VisibilityMap,
    pub fg_disparity: DisparityMap,
    pub bg_rgb: ImageBuffer,
    pub bg_disparity: DisparityMap,
    pub intrinsics: CameraIntrinsics,
    pub mapping: DepthMapping,
}

impl LayerBundle {
    pub fn validate(&self) -> Result<()> {
        let dims = (self.intrinsics.width, self.intrinsics.height);
        self.fg_rgb.ensure_dims(dims)?;
        self.fg_visibility.ensure_dims(dims)?;
        self.fg_disparity.ensure_dims(dims)?;
        self.bg_rgb.ensure_dims(dims)?;
        self.bg_disparity.ensure_dims(dims)?;
        if self.fg_rgb.channels() != self.bg_rgb.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.fg_rgb.channels(),
                found: self.bg_rgb.channels(),
            });
        }
        self.intrinsics.validate()?;
        self.mapping.validate()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.intrinsics.width, self.intrinsics.height)
    }
}

/// Meshes for both layers; build once and reuse across poses.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMeshes {
    pub fg: TriangleMesh,
    pub bg: TriangleMesh,
}

pub fn build_layer_meshes(bundle: &LayerBundle, downsample: usize) -> Result<LayerMeshes> {
    bundle.validate()?;
    let (k, m) = (&bundle.intrinsics, &bundle.mapping);
    Ok(LayerMeshes {
        fg: build_mesh(&bundle.fg_disparity, k, m, downsample)?,
        bg: build_mesh(&bundle.bg_disparity, k, m, downsample)?,
    })
}

/// Renders foreground (with its visibility resampled) and background.
pub fn render_layers(
    bundle: &LayerBundle,
    meshes: &LayerMeshes,
    pose: &CameraPose,
) -> Result<(RenderedLayer, RenderedLayer)> {
    let k = &bundle.intrinsics;
    let fg = render_layer(&meshes.fg, &bundle.fg_rgb, Some(bundle.fg_visibility.plane()), pose, k)?;
    let bg = render_layer(&meshes.bg, &bundle.bg_rgb, None, pose, k)?;
    Ok((fg, bg))
}

/// Full-resolution meshes, both layers rendered, foreground composited over background.
pub fn synthesize_view(bundle: &LayerBundle, pose: &CameraPose) -> Result<ImageBuffer> {
    let meshes = build_layer_meshes(bundle, 1)?;
    Ok(synthesize_view_with(bundle, &meshes, pose)?.image)
}

pub fn synthesize_view_with(bundle: &LayerBundle, meshes: &LayerMeshes, pose: &CameraPose) -> Result<Composite> {
    let (fg, bg) = render_layers(bundle, meshes, pose)?;
    composite(&fg, &bg)
}
