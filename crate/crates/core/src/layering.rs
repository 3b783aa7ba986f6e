//! Soft layering: foreground visibility from disparity gradients, soft
//! disocclusion/occlusion maps along scanlines, and matte fusion.
//!
//! For a pixel `p` and the scanline neighbours `p + k·dir` with
//! `1 <= |k| <= m` along the two image axes, the disocclusion excess is
//!
//! ```text
//! e(p) = max_k [ D(p) - D(p + k·dir) - rho·|k| ]
//! S(p) = tanh(gamma · max(e(p), 0))
//! ```
//!
//! Rewriting `e(p) = D(p) - min_k (D(p + k·dir) + rho·|k|)` turns each axis
//! into a sliding-window minimum of a linearly penalized sequence, which a
//! monotone deque evaluates in O(1) amortized per pixel regardless of `m`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::filter::{gaussian_blur, max_pool_dilate, resize_bilinear, sobel_gradient};
use crate::par;
use crate::{DisparityMap, Error, Plane, Result};

/// Largest `f32` strictly below one. `tanh` saturates to exactly 1.0 in
/// single precision for large arguments; soft masks keep the open bound.
const BELOW_ONE: f32 = 0.999_999_94;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VisibilityParams {
    /// Sharpness of the visibility falloff with squared gradient magnitude.
    pub beta: f32,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self { beta: 100.0 }
    }
}

impl VisibilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter("beta must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DisocclusionParams {
    /// Disparity allowance per pixel of distance.
    pub rho: f32,
    /// Steepness of the tanh.
    pub gamma: f32,
    /// Scanline half-extent `m` in pixels.
    pub neighborhood: usize,
    /// Compute on a `1/f` downsampled disparity and upsample the result.
    pub downsample_factor: usize,
}

impl Default for DisocclusionParams {
    fn default() -> Self {
        Self {
            rho: 0.005,
            gamma: 5.0,
            neighborhood: 64,
            downsample_factor: 1,
        }
    }
}

impl DisocclusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter("rho must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter("gamma must be > 0"));
        }
        if self.neighborhood == 0 {
            return Err(Error::InvalidParameter("neighborhood must be >= 1"));
        }
        if self.downsample_factor == 0 {
            return Err(Error::InvalidParameter("downsample_factor must be >= 1"));
        }
        Ok(())
    }
}

macro_rules! unit_plane {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Plane);

        impl $name {
            /// Validates that every value is finite and inside `[0, 1]`.
            pub fn new(plane: Plane) -> Result<Self> {
                let bad = plane
                    .data()
                    .iter()
                    .filter(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
                    .count();
                if bad > 0 {
                    return Err(Error::OutOfRange { count: bad });
                }
                Ok(Self(plane))
            }

            pub fn constant(width: usize, height: usize, value: f32) -> Self {
                Self(Plane::new(width, height, value.clamp(0.0, 1.0)))
            }

            pub fn plane(&self) -> &Plane {
                &self.0
            }

            pub fn into_plane(self) -> Plane {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Plane;

            fn deref(&self) -> &Plane {
                &self.0
            }
        }
    };
}

unit_plane!(
    /// Per-pixel foreground opacity in `[0, 1]`.
    VisibilityMap
);
unit_plane!(
    /// Soft (dis)occlusion mask; computed maps stay in `[0, 1)`.
    SoftMask
);

/// Foreground alpha matte plus the dilation radius used to build the
/// boundary band around it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatteInput {
    matte: Plane,
    pub dilation_radius: usize,
}

impl MatteInput {
    pub fn new(matte: Plane, dilation_radius: usize) -> Result<Self> {
        let bad = matte
            .data()
            .iter()
            .filter(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
            .count();
        if bad > 0 {
            return Err(Error::OutOfRange { count: bad });
        }
        Ok(Self { matte, dilation_radius })
    }

    pub fn matte(&self) -> &Plane {
        &self.matte
    }
}

/// Blur then max-pool the disparity, clamped back into `[0, 1]`.
pub fn preprocess_disparity(d: &DisparityMap, sigma: f32, pool_radius: usize) -> Result<DisparityMap> {
    let blurred = gaussian_blur(d, sigma)?;
    Ok(max_pool_dilate(&blurred, pool_radius))
}

/// `A = exp(-beta · |∇D|²)` with the 1/8-scaled Sobel gradient.
pub fn visibility_map(d: &DisparityMap, params: &VisibilityParams) -> Result<VisibilityMap> {
    params.validate()?;
    let g = sobel_gradient(d.plane())?;
    let beta = params.beta as f64;
    let data = g
        .magnitude_sq
        .iter()
        .map(|&m| (-beta * m as f64).exp() as f32)
        .collect();
    Ok(VisibilityMap(Plane::from_vec(g.width, g.height, data)?))
}

/// Folds the penalized window minimum of `line` into `out`:
/// `out[x] = min(out[x], min_{1<=|k|<=m} line[x+k] + rho·|k|)`, skipping
/// offsets that leave the line.
fn penalized_window_min(line: &[f64], m: usize, rho: f64, out: &mut [f64], dq: &mut VecDeque<usize>) {
    let n = line.len();
    // Neighbours to the right: key(j) = line[j] + rho·j, window (x, x+m].
    dq.clear();
    for x in (0..n).rev() {
        let j = x + 1;
        if j < n {
            let key = line[j] + rho * j as f64;
            while dq.back().is_some_and(|&b| line[b] + rho * b as f64 >= key) {
                dq.pop_back();
            }
            dq.push_back(j);
        }
        while dq.front().is_some_and(|&f| f > x + m) {
            dq.pop_front();
        }
        if let Some(&f) = dq.front() {
            let cand = line[f] + rho * (f - x) as f64;
            if cand < out[x] {
                out[x] = cand;
            }
        }
    }
    // Neighbours to the left: key(j) = line[j] - rho·j, window [x-m, x).
    dq.clear();
    for x in 0..n {
        if x >= 1 {
            let j = x - 1;
            let key = line[j] - rho * j as f64;
            while dq.back().is_some_and(|&b| line[b] - rho * b as f64 >= key) {
                dq.pop_back();
            }
            dq.push_back(j);
        }
        while dq.front().is_some_and(|&f| f + m < x) {
            dq.pop_front();
        }
        if let Some(&f) = dq.front() {
            let cand = line[f] + rho * (x - f) as f64;
            if cand < out[x] {
                out[x] = cand;
            }
        }
    }
}

/// Row-wise penalized minima of a row-major grid.
fn row_minima(values: &[f64], width: usize, m: usize, rho: f64) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; values.len()];
    par::for_each_row(&mut out, width, |y, row| {
        let mut dq = VecDeque::with_capacity(m + 1);
        penalized_window_min(&values[y * width..(y + 1) * width], m, rho, row, &mut dq);
    });
    out
}

fn transpose(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut t = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            t[x * height + y] = values[y * width + x];
        }
    }
    t
}

/// Full-resolution soft disocclusion without the downsampling path.
fn scanline_soft_mask(d: &Plane, m: usize, rho: f64, gamma: f64) -> Plane {
    let (w, h) = d.dims();
    let values: Vec<f64> = d.data().iter().map(|&v| v as f64).collect();
    let rows = row_minima(&values, w, m, rho);
    let cols_t = row_minima(&transpose(&values, w, h), h, m, rho);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let nearest = rows[i].min(cols_t[x * h + y]);
            let excess = values[i] - nearest;
            // No in-bounds neighbour gives -inf here; relu maps it to zero.
            let s = (gamma * excess.max(0.0)).tanh() as f32;
            data.push(s.min(BELOW_ONE));
        }
    }
    Plane::from_vec(w, h, data).expect("dimensions preserved")
}

/// Soft disocclusion map: high on the near (high-disparity) side of a depth edge,
/// where background may be revealed when the camera moves.
pub fn disocclusion_map(d: &DisparityMap, params: &DisocclusionParams) -> Result<SoftMask> {
    params.validate()?;
    let (w, h) = d.dims();
    let (rho, gamma) = (params.rho as f64, params.gamma as f64);
    let f = params.downsample_factor;
    if f == 1 {
        return Ok(SoftMask(scanline_soft_mask(d.plane(), params.neighborhood, rho, gamma)));
    }
    let small = resize_bilinear(d.plane(), w.div_ceil(f), h.div_ceil(f))?;
    let s = scanline_soft_mask(&small, params.neighborhood, rho, gamma);
    let up = resize_bilinear(&s, w, h)?;
    Ok(SoftMask(up.map(|v| v.clamp(0.0, BELOW_ONE))))
}

/// Soft occlusion map: the mirrored band on the far side of a depth edge,
/// i.e. `max_k [D(p + k·dir) - D(p) - rho·|k|]` squashed the same way.
/// Computed as the disocclusion map of `1 - D`.
pub fn occlusion_map(d: &DisparityMap, params: &DisocclusionParams) -> Result<SoftMask> {
    disocclusion_map(&d.complement(), params)
}

/// `A' = A · (1 - (dilate(M) - M) · (1 - S_hat))`, clamped into `[0, 1]`.
pub fn fuse_matte_visibility(a: &VisibilityMap, matte: &MatteInput, s_hat: &SoftMask) -> Result<VisibilityMap> {
    let dims = a.dims();
    matte.matte.ensure_dims(dims)?;
    s_hat.ensure_dims(dims)?;
    let dilated = max_pool_dilate(&matte.matte, matte.dilation_radius);
    let data = a
        .data()
        .iter()
        .zip(dilated.data())
        .zip(matte.matte.data())
        .zip(s_hat.data())
        .map(|(((&a, &mbar), &m), &s)| {
            debug_assert!(mbar >= m);
            (a * (1.0 - (mbar - m) * (1.0 - s))).clamp(0.0, 1.0)
        })
        .collect();
    Ok(VisibilityMap(Plane::from_vec(dims.0, dims.1, data)?))
}
