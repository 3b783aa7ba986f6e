//! Pinhole camera model, rigid poses, disparity back-projection and grid meshes.
//!
//! Pixel coordinates put pixel centres on integers: pixel `(x, y)` is at
//! `(x, y)` in image space, so the principal point of a `W×H` image with a
//! centred optical axis is `((W-1)/2, (H-1)/2)`. Camera space is x right,
//! y down, z forward.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::{DisparityMap, Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = dot(v, v).sqrt();
    (n > 0.0 && n.is_finite()).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// `fx = fy = 0.8 · max(W, H)` with the principal point at the image centre.
    pub fn default_for(width: usize, height: usize) -> Self {
        let f = 0.8 * width.max(height) as f64;
        Self {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidParameter("focal lengths must be > 0"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidParameter("principal point must lie inside the image"));
        }
        Ok(())
    }

    /// Camera-space point to pixel coordinates. `None` behind the camera.
    #[inline]
    pub fn project(&self, p: Vec3) -> Option<[f64; 2]> {
        (p[2] > 0.0).then(|| [self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy])
    }

    /// Pixel plus depth to camera-space point.
    #[inline]
    pub fn back_project(&self, x: f64, y: f64, z: f64) -> Vec3 {
        [z * (x - self.cx) / self.fx, z * (y - self.cy) / self.fy, z]
    }
}

/// Rigid camera-from-world transform: `p_cam = R · p_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub const fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Validates orthonormality and `det = +1` within 1e-6.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let col = |k: usize| [r[0][k], r[1][k], r[2][k]];
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot(col(i), col(j)) - expected).abs() > 1e-6 {
                    return Err(Error::InvalidParameter("rotation is not orthonormal"));
                }
            }
        }
        if (dot(r[0], cross(r[1], r[2])) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter("rotation determinant is not +1"));
        }
        if !self.translation.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite"));
        }
        Ok(())
    }

    /// Camera whose optical centre moves by `offset` in canonical camera
    /// coordinates, orientation unchanged.
    pub fn from_camera_offset(offset: Vec3) -> Self {
        Self {
            translation: [-offset[0], -offset[1], -offset[2]],
            ..Self::identity()
        }
    }

    /// Camera at `eye` looking at `target`, keeping the image vertical axis
    /// in the plane spanned by the viewing direction and world `+y`.
    pub fn look_at(eye: Vec3, target: Vec3) -> Result<Self> {
        let forward = normalize([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]])
            .ok_or(Error::InvalidParameter("look-at target coincides with eye"))?;
        let right = normalize(cross([0.0, 1.0, 0.0], forward))
            .ok_or(Error::InvalidParameter("viewing direction parallel to +y"))?;
        let down = cross(forward, right);
        let rotation = [right, down, forward];
        let translation = [-dot(rotation[0], eye), -dot(rotation[1], eye), -dot(rotation[2], eye)];
        Ok(Self { rotation, translation })
    }

    #[inline]
    pub fn transform(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        [
            dot(r[0], p) + self.translation[0],
            dot(r[1], p) + self.translation[1],
            dot(r[2], p) + self.translation[2],
        ]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        let a = &self.rotation;
        let b = &other.rotation;
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        let t = self.transform(other.translation);
        CameraPose {
            rotation,
            translation: t,
        }
    }

    /// Optical centre in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3 {
        let r = &self.rotation;
        let t = self.translation;
        [
            -(r[0][0] * t[0] + r[1][0] * t[1] + r[2][0] * t[2]),
            -(r[0][1] * t[0] + r[1][1] * t[1] + r[2][1] * t[2]),
            -(r[0][2] * t[0] + r[1][2] * t[1] + r[2][2] * t[2]),
        ]
    }
}

/// Disparity to depth: `z = 1 / max(d, d_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthMapping {
    pub d_min: f64,
}

impl Default for DepthMapping {
    fn default() -> Self {
        Self { d_min: 0.01 }
    }
}

impl DepthMapping {
    pub fn new(d_min: f64) -> Result<Self> {
        let m = Self { d_min };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min < 1.0) {
            return Err(Error::InvalidParameter("d_min must be in (0, 1)"));
        }
        Ok(())
    }
}

#[inline]
pub fn disparity_to_depth(d: f32, mapping: &DepthMapping) -> f64 {
    1.0 / (d as f64).max(mapping.d_min)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Per-vertex texture coordinates in `[0, 1]²`, pixel-centre aligned.
    pub texcoords: Vec<[f64; 2]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() != self.texcoords.len() {
            return Err(Error::InvalidParameter("one texcoord per vertex required"));
        }
        let n = self.vertices.len() as u32;
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::InvalidParameter("triangle index out of range"));
        }
        Ok(())
    }
}

/// Grid sample positions along one axis: every `step`-th pixel plus the last.
fn grid_axis(len: usize, step: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).step_by(step).collect();
    if v.last() != Some(&(len - 1)) {
        v.push(len - 1);
    }
    v
}

/// Back-projects every grid pixel and connects 4-neighbours into two
/// triangles per cell, split along the top-left to bottom-right diagonal.
///
/// With `downsample > 1` only every `downsample`-th pixel (plus the last
/// row and column) becomes a vertex; intrinsics stay at full resolution.
pub fn build_mesh(
    d: &DisparityMap,
    intr: &CameraIntrinsics,
    mapping: &DepthMapping,
    downsample: usize,
) -> Result<TriangleMesh> {
    if downsample == 0 {
        return Err(Error::InvalidParameter("mesh downsample must be >= 1"));
    }
    let (w, h) = d.dims();
    if (w, h) != (intr.width, intr.height) {
        return Err(Error::DimensionMismatch {
            expected: (intr.width, intr.height),
            found: (w, h),
        });
    }
    if w == 0 || h == 0 {
        return Ok(TriangleMesh::default());
    }
    let xs = grid_axis(w, downsample);
    let ys = grid_axis(h, downsample);
    let mut mesh = TriangleMesh {
        vertices: Vec::with_capacity(xs.len() * ys.len()),
        texcoords: Vec::with_capacity(xs.len() * ys.len()),
        triangles: Vec::with_capacity(2 * (xs.len().saturating_sub(1)) * (ys.len().saturating_sub(1))),
    };
    for &y in &ys {
        for &x in &xs {
            let z = disparity_to_depth(d.get(x, y), mapping);
            mesh.vertices.push(intr.back_project(x as f64, y as f64, z));
            mesh.texcoords
                .push([(x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64]);
        }
    }
    let gw = xs.len() as u32;
    for j in 0..ys.len().saturating_sub(1) as u32 {
        for i in 0..gw.saturating_sub(1) {
            let a = j * gw + i;
            let b = a + 1;
            let c = a + gw;
            let e = c + 1;
            mesh.triangles.push([a, b, e]);
            mesh.triangles.push([a, e, c]);
        }
    }
    Ok(mesh)
}

/// Poses along a circle in the image plane with an optional forward bob.
///
/// Frame `k` places the camera at
/// `(r·cos θ - r, r·sin θ, depth_offset·(1 - cos θ))`, `θ = 2πk/frame_count`,
/// looking at `(0, 0, target_depth)`. Frame 0 with zero depth offset is the
/// identity.
pub fn circular_path(radius: f64, depth_offset: f64, frame_count: usize, target_depth: f64) -> Result<Vec<CameraPose>> {
    if frame_count == 0 {
        return Err(Error::InvalidParameter("frame_count must be >= 1"));
    }
    if !(target_depth > 0.0 && target_depth.is_finite()) {
        return Err(Error::InvalidParameter("target_depth must be > 0"));
    }
    (0..frame_count)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / frame_count as f64;
            let (s, c) = theta.sin_cos();
            let eye = [radius * c - radius, radius * s, depth_offset * (1.0 - c)];
            CameraPose::look_at(eye, [0.0, 0.0, target_depth])
        })
        .collect()
}
