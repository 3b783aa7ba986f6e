//! Raster containers shared by every stage.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::{Error, Result};

/// A single-channel float grid stored row-major.
///
/// No value range is enforced here; the typed wrappers ([`DisparityMap`],
/// [`crate::layering::VisibilityMap`], ...) carry the range invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, fill: f32) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with clamp-to-edge addressing.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample at continuous pixel coordinates where integer
    /// coordinates are pixel centres. Clamp-to-edge outside the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f32 {
        let (x0, x1, fx) = bilinear_taps(x, self.width);
        let (y0, y1, fy) = bilinear_taps(y, self.height);
        let top = lerp(self.get(x0, y0) as f64, self.get(x1, y0) as f64, fx);
        let bottom = lerp(self.get(x0, y1) as f64, self.get(x1, y1) as f64, fx);
        lerp(top, bottom, fy) as f32
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }

    fn count_outside_unit(&self) -> usize {
        self.data
            .iter()
            .filter(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
            .count()
    }
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Integer taps and fractional weight for one bilinear axis.
#[inline]
pub(crate) fn bilinear_taps(pos: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let p = if pos.is_nan() { 0.0 } else { pos.clamp(0.0, max) };
    let i0 = p.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, p - i0 as f64)
}

/// Interleaved multi-channel image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, fill: f32) -> Result<Self> {
        Self::from_vec(width, height, channels, vec![fill; width * height * channels])
    }

    /// Wraps interleaved samples. Rejects channel counts other than 1, 3 or 4,
    /// wrong buffer lengths and samples that are not finite values in `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                found: data.len(),
            });
        }
        let bad = data
            .iter()
            .filter(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
            .count();
        if bad > 0 {
            return Err(Error::OutOfRange { count: bad });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    /// Builds an image from equally sized planes, clamping into `[0, 1]`.
    pub fn from_planes(planes: &[Plane]) -> Result<Self> {
        let first = planes.first().ok_or(Error::UnsupportedChannels(0))?;
        let dims = first.dims();
        for p in planes {
            p.ensure_dims(dims)?;
        }
        let channels = planes.len();
        let mut data = Vec::with_capacity(dims.0 * dims.1 * channels);
        for i in 0..dims.0 * dims.1 {
            for p in planes {
                let v = p.data[i];
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self::from_vec(dims.0, dims.1, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    pub fn planes(&self) -> Vec<Plane> {
        (0..self.channels).map(|c| self.channel(c)).collect()
    }

    /// First three channels as RGB. Grey images are replicated.
    pub fn to_rgb(&self) -> ImageBuffer {
        match self.channels {
            3 => self.clone(),
            1 => {
                let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
                ImageBuffer {
                    width: self.width,
                    height: self.height,
                    channels: 3,
                    data,
                }
            }
            _ => {
                let data = self
                    .data
                    .chunks_exact(self.channels)
                    .flat_map(|px| [px[0], px[1], px[2]])
                    .collect();
                ImageBuffer {
                    width: self.width,
                    height: self.height,
                    channels: 3,
                    data,
                }
            }
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }

    /// Bilinear sample of all channels at pixel-centre coordinates.
    pub fn sample_bilinear_into(&self, x: f64, y: f64, out: &mut [f32]) {
        let (x0, x1, fx) = bilinear_taps(x, self.width);
        let (y0, y1, fy) = bilinear_taps(y, self.height);
        let (p00, p10) = (self.pixel(x0, y0), self.pixel(x1, y0));
        let (p01, p11) = (self.pixel(x0, y1), self.pixel(x1, y1));
        for c in 0..self.channels.min(out.len()) {
            let top = lerp(p00[c] as f64, p10[c] as f64, fx);
            let bottom = lerp(p01[c] as f64, p11[c] as f64, fx);
            out[c] = lerp(top, bottom, fy) as f32;
        }
    }
}

/// Normalized disparity (inverse depth) in `[0, 1]`; larger is nearer.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap(Plane);

impl DisparityMap {
    /// Validates that every value is finite and inside `[0, 1]`.
    pub fn new(plane: Plane) -> Result<Self> {
        match plane.count_outside_unit() {
            0 => Ok(Self(plane)),
            count => Err(Error::OutOfRange { count }),
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(Plane::from_vec(width, height, data)?)
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self(Plane::new(width, height, value.clamp(0.0, 1.0)))
    }

    /// Clamps into `[0, 1]`; NaN becomes 0.
    pub fn clamped(plane: Plane) -> Self {
        Self(plane.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    /// `1 - D` at every pixel.
    pub fn complement(&self) -> Self {
        Self(self.0.map(|v| 1.0 - v))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }
}

impl Deref for DisparityMap {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

/// Sobel response of a disparity map.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    /// `gx² + gy²` per pixel.
    pub magnitude_sq: Vec<f32>,
}
