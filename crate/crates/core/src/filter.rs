//! Separable filters with clamp-to-edge borders.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::raster::{bilinear_taps, lerp};
use crate::{DisparityMap, Error, GradientField, ImageBuffer, Plane, Result};

/// Rasters that can be filtered one channel plane at a time.
pub trait PlaneMap: Sized {
    fn map_planes(&self, f: impl Fn(&Plane) -> Plane) -> Self;
}

impl PlaneMap for Plane {
    fn map_planes(&self, f: impl Fn(&Plane) -> Plane) -> Self {
        f(self)
    }
}

impl PlaneMap for DisparityMap {
    fn map_planes(&self, f: impl Fn(&Plane) -> Plane) -> Self {
        DisparityMap::clamped(f(self.plane()))
    }
}

impl PlaneMap for ImageBuffer {
    fn map_planes(&self, f: impl Fn(&Plane) -> Plane) -> Self {
        let planes: Vec<Plane> = self.planes().iter().map(f).collect();
        ImageBuffer::from_planes(&planes).expect("filters preserve plane dimensions")
    }
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * (sigma as f64) * (sigma as f64);
    let taps: Vec<f64> = (-radius..=radius).map(|k| (-((k * k) as f64) / denom).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter().map(|t| (t / sum) as f32).collect()
}

fn convolve_rows(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = src.dims();
    let mut out = Plane::new(w, h, 0.0);
    for y in 0..h {
        let row = &src.data()[y * w..(y + 1) * w];
        let dst = &mut out.data_mut()[y * w..(y + 1) * w];
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for (i, k) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += k * row[sx];
            }
            *d = acc;
        }
    }
    out
}

fn convolve_cols(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = src.dims();
    let mut out = Plane::new(w, h, 0.0);
    let data = src.data();
    for y in 0..h {
        let dst = &mut out.data_mut()[y * w..(y + 1) * w];
        for (i, k) in kernel.iter().enumerate() {
            let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            let row = &data[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += k * s;
            }
        }
    }
    out
}

fn blur_plane(p: &Plane, sigma: f32) -> Plane {
    let kernel = gaussian_kernel(sigma);
    convolve_cols(&convolve_rows(p, &kernel), &kernel)
}

/// Separable Gaussian blur. `sigma == 0` returns the input unchanged.
pub fn gaussian_blur<R: PlaneMap + Clone>(img: &R, sigma: f32) -> Result<R> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("sigma must be finite and >= 0"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    Ok(img.map_planes(|p| blur_plane(p, sigma)))
}

fn dilate_plane(p: &Plane, radius: usize) -> Plane {
    let (w, h) = p.dims();
    let r = radius as isize;
    let mut rows = Plane::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let lo = (x as isize - r).max(0) as usize;
            let hi = ((x as isize + r) as usize).min(w - 1);
            let m = p.data()[y * w + lo..=y * w + hi]
                .iter()
                .fold(f32::NEG_INFINITY, |a, &b| a.max(b));
            rows.set(x, y, m);
        }
    }
    let mut out = Plane::new(w, h, 0.0);
    for y in 0..h {
        let lo = (y as isize - r).max(0) as usize;
        let hi = ((y as isize + r) as usize).min(h - 1);
        for x in 0..w {
            let m = (lo..=hi).map(|sy| rows.get(x, sy)).fold(f32::NEG_INFINITY, f32::max);
            out.set(x, y, m);
        }
    }
    out
}

/// Maximum over the `(2r+1)²` window around each pixel. `radius == 0` is the identity.
pub fn max_pool_dilate<R: PlaneMap + Clone>(img: &R, radius: usize) -> R {
    if radius == 0 {
        return img.clone();
    }
    img.map_planes(|p| dilate_plane(p, radius))
}

/// 3×3 Sobel gradient scaled by 1/8, so a ramp of slope 1 px⁻¹ yields |gx| = 1.
pub fn sobel_gradient(d: &Plane) -> Result<GradientField> {
    let (w, h) = d.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let n = w * h;
    let (mut gx, mut gy, mut mag) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let at = |xx, yy| d.get(xx, yy);
            let sx = (at(xp, ym) + 2.0 * at(xp, y) + at(xp, yp)) - (at(xm, ym) + 2.0 * at(xm, y) + at(xm, yp));
            let sy = (at(xm, yp) + 2.0 * at(x, yp) + at(xp, yp)) - (at(xm, ym) + 2.0 * at(x, ym) + at(xp, ym));
            let i = y * w + x;
            gx[i] = sx / 8.0;
            gy[i] = sy / 8.0;
            mag[i] = gx[i] * gx[i] + gy[i] * gy[i];
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude_sq: mag,
    })
}

fn resize_plane(p: &Plane, new_w: usize, new_h: usize) -> Plane {
    let (w, h) = p.dims();
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / new_h as f64;
    let xs: Vec<(usize, usize, f64)> = (0..new_w)
        .map(|x| bilinear_taps((x as f64 + 0.5) * sx - 0.5, w))
        .collect();
    Plane::from_fn(new_w, new_h, |x, y| {
        let (y0, y1, fy) = bilinear_taps((y as f64 + 0.5) * sy - 0.5, h);
        let (x0, x1, fx) = xs[x];
        let top = lerp(p.get(x0, y0) as f64, p.get(x1, y0) as f64, fx);
        let bottom = lerp(p.get(x0, y1) as f64, p.get(x1, y1) as f64, fx);
        lerp(top, bottom, fy) as f32
    })
}

/// Bilinear resize with half-pixel-centre alignment. Same size is the identity.
pub fn resize_bilinear<R: PlaneMap + Clone>(img: &R, new_width: usize, new_height: usize) -> Result<R> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::InvalidParameter("resize target must be at least 1x1"));
    }
    Ok(img.map_planes(|p| {
        if p.dims() == (new_width, new_height) {
            p.clone()
        } else {
            resize_plane(p, new_width, new_height)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn impulse(w: usize, h: usize) -> Plane {
        let mut p = Plane::new(w, h, 0.0);
        p.set(w / 2, h / 2, 1.0);
        p
    }

    #[test]
    fn blur_constant_and_zero_sigma() {
        let p = Plane::new(9, 7, 0.3);
        let b = gaussian_blur(&p, 2.0).unwrap();
        assert!(b.data().iter().all(|v| (v - 0.3).abs() < 1e-6));
        let q = Plane::from_fn(5, 5, |x, y| (x * y) as f32 / 16.0);
        assert_eq!(gaussian_blur(&q, 0.0).unwrap(), q);
        assert!(gaussian_blur(&q, -1.0).is_err());
    }

    #[test]
    fn blur_impulse_centre_is_product_of_central_taps() {
        // Independent evaluation of the discrete normalized Gaussian, sigma = 1, radius 3.
        let sum: f64 = (-3i32..=3).map(|k| (-(k * k) as f64 / 2.0).exp()).sum();
        let centre = 1.0 / sum;
        let b = gaussian_blur(&impulse(15, 15), 1.0).unwrap();
        assert!((b.get(7, 7) as f64 - centre * centre).abs() < 1e-7);
        assert!((b.data().iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn dilate_single_pixel() {
        let d = max_pool_dilate(&impulse(5, 5), 1);
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&x) && (1..=3).contains(&y);
                assert_eq!(d.get(x, y), if inside { 1.0 } else { 0.0 });
            }
        }
        let p = Plane::new(4, 4, 0.7);
        assert_eq!(max_pool_dilate(&p, 3), p);
    }

    #[test]
    fn sobel_step_and_ramp() {
        let h = 0.6f32;
        let step = Plane::from_fn(8, 5, |x, _| if x < 4 { 0.0 } else { h });
        let g = sobel_gradient(&step).unwrap();
        for y in 0..5 {
            assert!((g.gx[y * 8 + 3] - h / 2.0).abs() < 1e-7);
            assert!((g.gx[y * 8 + 4] - h / 2.0).abs() < 1e-7);
            assert_eq!(g.gy[y * 8 + 3], 0.0);
            assert_eq!(g.gx[y * 8 + 1], 0.0);
        }
        let w = 16usize;
        let ramp = Plane::from_fn(w, 6, |x, _| x as f32 / w as f32);
        let g = sobel_gradient(&ramp).unwrap();
        for y in 0..6 {
            for x in 1..w - 1 {
                assert!((g.gx[y * w + x] - 1.0 / w as f32).abs() < 1e-6);
            }
        }
        assert!(matches!(
            sobel_gradient(&Plane::new(2, 5, 0.0)),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn resize_two_to_four() {
        let p = Plane::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let r = resize_bilinear(&p, 4, 1).unwrap();
        assert_eq!(r.data(), &[0.0, 0.25, 0.75, 1.0]);
        let c = Plane::new(3, 3, 0.4);
        assert!(resize_bilinear(&c, 7, 2).unwrap().data().iter().all(|&v| v == 0.4));
        assert_eq!(resize_bilinear(&p, 2, 1).unwrap(), p);
        assert!(resize_bilinear(&p, 0, 1).is_err());
    }

    #[test]
    fn image_filters_per_channel() {
        let img = ImageBuffer::from_fn(6, 6, 3, |x, _, c| if c == 1 { 0.5 } else { x as f32 / 5.0 }).unwrap();
        let b = gaussian_blur(&img, 1.0).unwrap();
        assert_eq!(b.channels(), 3);
        assert!((0..36).all(|i| (b.data()[i * 3 + 1] - 0.5).abs() < 1e-6));
    }
}
