//! PSNR and SSIM over a border-cropped region, unit dynamic range.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::{Error, ImageBuffer, Result};

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Inclusive-exclusive crop bounds `(x0, x1, y0, y1)` after removing
/// `floor(fraction · size)` pixels on each side.
fn crop_bounds(a: &ImageBuffer, b: &ImageBuffer, border_crop: f64) -> Result<(usize, usize, usize, usize)> {
    a.ensure_dims(b.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::ChannelMismatch {
            expected: a.channels(),
            found: b.channels(),
        });
    }
    if !(0.0..0.5).contains(&border_crop) {
        return Err(Error::InvalidParameter("border_crop must be in [0, 0.5)"));
    }
    let (w, h) = a.dims();
    let cx = (border_crop * w as f64).floor() as usize;
    let cy = (border_crop * h as f64).floor() as usize;
    if w <= 2 * cx || h <= 2 * cy {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 1,
        });
    }
    Ok((cx, w - cx, cy, h - cy))
}

/// `10 · log10(1 / MSE)` over the cropped region and all channels, capped
/// at [`PSNR_CAP`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, border_crop: f64) -> Result<f64> {
    let (x0, x1, y0, y1) = crop_bounds(a, b, border_crop)?;
    let ch = a.channels();
    let mut sum = 0.0f64;
    for y in y0..y1 {
        for x in x0..x1 {
            for (&p, &q) in a.pixel(x, y).iter().zip(b.pixel(x, y)) {
                let d = p as f64 - q as f64;
                sum += d * d;
            }
        }
    }
    let mse = sum / ((x1 - x0) * (y1 - y0) * ch) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable "valid" filtering: output has one value per window position.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = Vec::with_capacity(ow * h);
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows.push(k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            out.push((0..SSIM_WINDOW).map(|j| k[j] * rows[(y + j) * ow + x]).sum::<f64>());
        }
    }
    out
}

/// Single-scale SSIM, 11×11 Gaussian window (sigma 1.5), averaged over all
/// window positions inside the crop and over channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, border_crop: f64) -> Result<f64> {
    let (x0, x1, y0, y1) = crop_bounds(a, b, border_crop)?;
    let (w, h) = (x1 - x0, y1 - y0);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let k = ssim_kernel();
    let ch = a.channels();
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..ch {
        let mut pa = Vec::with_capacity(w * h);
        let mut pb = Vec::with_capacity(w * h);
        for y in y0..y1 {
            for x in x0..x1 {
                pa.push(a.get(x, y, c) as f64);
                pb.push(b.get(x, y, c) as f64);
            }
        }
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<f64>>();
        let mu_a = filter_valid(&pa, w, h, &k);
        let mu_b = filter_valid(&pb, w, h, &k);
        let aa = filter_valid(&prod(&pa, &pa), w, h, &k);
        let bb = filter_valid(&prod(&pb, &pb), w, h, &k);
        let ab = filter_valid(&prod(&pa, &pb), w, h, &k);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            let num = (2.0 * ma * mb + C1) * (2.0 * cov + C2);
            let den = (ma * ma + mb * mb + C1) * (va + vb + C2);
            total += num / den;
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> f32) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, f).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = img(20, 20, |x, y, _| (x + y) as f32 / 80.0 + 0.2);
        assert_eq!(psnr(&a, &a, 0.0).unwrap(), PSNR_CAP);
        let b = img(20, 20, |x, y, _| (x + y) as f32 / 80.0 + 0.3);
        assert!((psnr(&a, &b, 0.0).unwrap() - 20.0).abs() < 1e-4);
    }

    #[test]
    fn border_corruption_is_cropped() {
        let a = img(50, 40, |_, _, _| 0.5);
        let b = img(50, 40, |x, y, _| {
            if !(10..40).contains(&x) || !(8..32).contains(&y) {
                0.0
            } else {
                0.5
            }
        });
        assert_eq!(psnr(&a, &b, 0.2).unwrap(), PSNR_CAP);
        assert!(psnr(&a, &b, 0.0).unwrap() < 99.0);
        assert!((ssim(&a, &b, 0.2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_symmetry_and_negative() {
        let a = img(32, 32, |x, y, c| ((x * 3 + y * 7 + c) % 11) as f32 / 10.0);
        assert!((ssim(&a, &a, 0.0).unwrap() - 1.0).abs() < 1e-9);
        let b = img(32, 32, |x, y, _| ((x + y) % 5) as f32 / 4.0);
        assert_eq!(ssim(&a, &b, 0.1).unwrap(), ssim(&b, &a, 0.1).unwrap());
        let checker = img(24, 24, |x, y, _| ((x + y) % 2) as f32);
        let neg = img(24, 24, |x, y, _| 1.0 - ((x + y) % 2) as f32);
        assert!(ssim(&checker, &neg, 0.0).unwrap() < 0.0);
    }

    #[test]
    fn errors() {
        let a = img(8, 8, |_, _, _| 0.0);
        let b = img(9, 8, |_, _, _| 0.0);
        assert!(psnr(&a, &b, 0.0).is_err());
        assert!(matches!(ssim(&a, &a, 0.0), Err(Error::TooSmall { .. })));
        assert!(psnr(&a, &a, 0.5).is_err());
    }
}
