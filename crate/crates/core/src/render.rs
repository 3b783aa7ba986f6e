//! Software rasterizer: z-buffered, perspective-correct texturing, near-plane
//! clipping, no culling. Plus over-compositing of two rendered layers.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::geometry::{CameraIntrinsics, CameraPose, TriangleMesh, Vec3};
use crate::{Error, ImageBuffer, Plane, Result};

/// Fragments closer than this (camera-space z) are clipped.
pub const Z_NEAR: f64 = 1e-3;

/// Barycentric slack so pixels exactly on a shared edge are never dropped by
/// rounding; the depth test resolves the double hit.
const EDGE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedLayer {
    pub rgb: ImageBuffer,
    /// Resampled alpha texture; 0 where uncovered.
    pub alpha: Plane,
    /// 1 where some triangle covers the pixel centre, else 0.
    pub coverage: Plane,
    /// Camera-space depth of the visible fragment; `+inf` where uncovered.
    pub zbuffer: Plane,
}

#[derive(Clone, Copy)]
struct ClipVertex {
    p: Vec3,
    uv: [f64; 2],
}

fn lerp_vertex(a: &ClipVertex, b: &ClipVertex, t: f64) -> ClipVertex {
    ClipVertex {
        p: [
            a.p[0] + (b.p[0] - a.p[0]) * t,
            a.p[1] + (b.p[1] - a.p[1]) * t,
            a.p[2] + (b.p[2] - a.p[2]) * t,
        ],
        uv: [a.uv[0] + (b.uv[0] - a.uv[0]) * t, a.uv[1] + (b.uv[1] - a.uv[1]) * t],
    }
}

/// Sutherland–Hodgman against `z >= Z_NEAR`. Returns up to four vertices.
fn clip_near(tri: &[ClipVertex; 3], out: &mut [ClipVertex; 4]) -> usize {
    let mut n = 0;
    for i in 0..3 {
        let a = &tri[i];
        let b = &tri[(i + 1) % 3];
        let a_in = a.p[2] >= Z_NEAR;
        let b_in = b.p[2] >= Z_NEAR;
        if a_in {
            out[n] = *a;
            n += 1;
        }
        if a_in != b_in {
            let t = (Z_NEAR - a.p[2]) / (b.p[2] - a.p[2]);
            out[n] = lerp_vertex(a, b, t);
            n += 1;
        }
    }
    n
}

struct Target<'a> {
    intr: &'a CameraIntrinsics,
    depth: Vec<f64>,
    uv: Vec<[f64; 2]>,
}

impl Target<'_> {
    fn raster(&mut self, v: [&ClipVertex; 3]) {
        let (w, h) = (self.intr.width, self.intr.height);
        let mut s = [[0.0f64; 2]; 3];
        let mut iz = [0.0f64; 3];
        for k in 0..3 {
            let z = v[k].p[2];
            s[k] = [
                self.intr.fx * v[k].p[0] / z + self.intr.cx,
                self.intr.fy * v[k].p[1] / z + self.intr.cy,
            ];
            iz[k] = 1.0 / z;
        }
        let area = (s[1][0] - s[0][0]) * (s[2][1] - s[0][1]) - (s[1][1] - s[0][1]) * (s[2][0] - s[0][0]);
        if !(area.abs() > 1e-12) {
            return;
        }
        let min_x = s.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        if max_x < -0.5 || max_y < -0.5 || min_x > w as f64 - 0.5 || min_y > h as f64 - 0.5 {
            return;
        }
        let x0 = (min_x - 1e-6).ceil().max(0.0) as usize;
        let y0 = (min_y - 1e-6).ceil().max(0.0) as usize;
        let x1 = ((max_x + 1e-6).floor().min(w as f64 - 1.0)).max(0.0) as usize;
        let y1 = ((max_y + 1e-6).floor().min(h as f64 - 1.0)).max(0.0) as usize;
        let inv_area = 1.0 / area;
        // Edge function of edge (a, b) at p, normalized to a barycentric.
        let edge = |a: [f64; 2], b: [f64; 2], px: f64, py: f64| {
            ((b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])) * inv_area
        };
        let uvz: [[f64; 2]; 3] = core::array::from_fn(|k| [v[k].uv[0] * iz[k], v[k].uv[1] * iz[k]]);
        for py in y0..=y1 {
            let fy = py as f64;
            for px in x0..=x1 {
                let fx = px as f64;
                let b0 = edge(s[1], s[2], fx, fy);
                let b1 = edge(s[2], s[0], fx, fy);
                let b2 = edge(s[0], s[1], fx, fy);
                if b0 < -EDGE_EPS || b1 < -EDGE_EPS || b2 < -EDGE_EPS {
                    continue;
                }
                let inv_z = b0 * iz[0] + b1 * iz[1] + b2 * iz[2];
                if !(inv_z > 0.0) {
                    continue;
                }
                let z = 1.0 / inv_z;
                let i = py * w + px;
                if z < self.depth[i] {
                    self.depth[i] = z;
                    self.uv[i] = [
                        (b0 * uvz[0][0] + b1 * uvz[1][0] + b2 * uvz[2][0]) * z,
                        (b0 * uvz[0][1] + b1 * uvz[1][1] + b2 * uvz[2][1]) * z,
                    ];
                }
            }
        }
    }
}

/// Renders `mesh` as seen from `pose`, texturing with `rgb_texture` and
/// resampling `alpha_texture` alongside (it is not used for blending here).
/// Without an alpha texture, alpha equals coverage.
pub fn render_layer(
    mesh: &TriangleMesh,
    rgb_texture: &ImageBuffer,
    alpha_texture: Option<&Plane>,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<RenderedLayer> {
    mesh.validate()?;
    intr.validate()?;
    if rgb_texture.width() == 0 || rgb_texture.height() == 0 {
        return Err(Error::TooSmall {
            width: rgb_texture.width(),
            height: rgb_texture.height(),
            min: 1,
        });
    }
    let (w, h) = (intr.width, intr.height);
    let cam: Vec<Vec3> = mesh.vertices.iter().map(|&p| pose.transform(p)).collect();
    let mut target = Target {
        intr,
        depth: vec![f64::INFINITY; w * h],
        uv: vec![[0.0; 2]; w * h],
    };
    let mut clipped = [ClipVertex {
        p: [0.0; 3],
        uv: [0.0; 2],
    }; 4];
    for tri in &mesh.triangles {
        let verts: [ClipVertex; 3] = core::array::from_fn(|k| ClipVertex {
            p: cam[tri[k] as usize],
            uv: mesh.texcoords[tri[k] as usize],
        });
        if verts.iter().all(|v| v.p[2] >= Z_NEAR) {
            target.raster([&verts[0], &verts[1], &verts[2]]);
            continue;
        }
        let n = clip_near(&verts, &mut clipped);
        for k in 1..n.saturating_sub(1) {
            target.raster([&clipped[0], &clipped[k], &clipped[k + 1]]);
        }
    }

    let ch = rgb_texture.channels();
    let (tw, th) = (rgb_texture.width() as f64, rgb_texture.height() as f64);
    let mut rgb = vec![0.0f32; w * h * ch];
    let mut alpha = Plane::new(w, h, 0.0);
    let mut coverage = Plane::new(w, h, 0.0);
    let mut zbuffer = Plane::new(w, h, f32::INFINITY);
    let mut px = [0.0f32; 4];
    for i in 0..w * h {
        if !target.depth[i].is_finite() {
            continue;
        }
        let [u, v] = target.uv[i];
        rgb_texture.sample_bilinear_into(u * tw - 0.5, v * th - 0.5, &mut px);
        rgb[i * ch..(i + 1) * ch].copy_from_slice(&px[..ch]);
        let a = match alpha_texture {
            Some(t) => t.sample_bilinear(u * t.width() as f64 - 0.5, v * t.height() as f64 - 0.5),
            None => 1.0,
        };
        alpha.data_mut()[i] = a.clamp(0.0, 1.0);
        coverage.data_mut()[i] = 1.0;
        zbuffer.data_mut()[i] = target.depth[i] as f32;
    }
    Ok(RenderedLayer {
        rgb: ImageBuffer::from_vec(w, h, ch, rgb)?,
        alpha,
        coverage,
        zbuffer,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub image: ImageBuffer,
    /// Pixels covered by neither layer (left black).
    pub uncovered: usize,
}

/// `out = A·fg + (1 - A)·bg` with `A = fg.alpha · fg.coverage`.
pub fn composite(fg: &RenderedLayer, bg: &RenderedLayer) -> Result<Composite> {
    let dims = fg.rgb.dims();
    bg.rgb.ensure_dims(dims)?;
    fg.alpha.ensure_dims(dims)?;
    fg.coverage.ensure_dims(dims)?;
    bg.coverage.ensure_dims(dims)?;
    let ch = fg.rgb.channels();
    if bg.rgb.channels() != ch {
        return Err(Error::ChannelMismatch {
            expected: ch,
            found: bg.rgb.channels(),
        });
    }
    let n = dims.0 * dims.1;
    let mut out = vec![0.0f32; n * ch];
    let mut uncovered = 0;
    for i in 0..n {
        let fg_cov = fg.coverage.data()[i];
        if fg_cov == 0.0 && bg.coverage.data()[i] == 0.0 {
            uncovered += 1;
            continue;
        }
        let a = fg.alpha.data()[i] * fg_cov;
        for c in 0..ch {
            let f = fg.rgb.data()[i * ch + c];
            let b = bg.rgb.data()[i * ch + c];
            out[i * ch + c] = (a * f + (1.0 - a) * b).clamp(f.min(b), f.max(b));
        }
    }
    Ok(Composite {
        image: ImageBuffer::from_vec(dims.0, dims.1, ch, out)?,
        uncovered,
    })
}
