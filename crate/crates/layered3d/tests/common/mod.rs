//! Shared fixtures and independent oracles for the integration and
//! acceptance tests.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::PI;

use layered3d::layered3d_core::inpaint::BinaryMask;
use layered3d::layered3d_core::{DisparityMap, ImageBuffer, Plane};
use rand::Rng;

/// Sum of a few random oriented sinusoids per channel, in `[0.1, 0.9]`.
pub fn smooth_texture<R: Rng>(w: usize, h: usize, rng: &mut R) -> ImageBuffer {
    let waves: Vec<[(f64, f64, f64); 4]> = (0..3)
        .map(|_| {
            std::array::from_fn(|_| {
                let period = rng.gen_range(9.0..41.0);
                let angle = rng.gen_range(0.0..PI);
                let phase = rng.gen_range(0.0..2.0 * PI);
                (2.0 * PI * angle.cos() / period, 2.0 * PI * angle.sin() / period, phase)
            })
        })
        .collect();
    ImageBuffer::from_fn(w, h, 3, |x, y, c| {
        let s: f64 = waves[c]
            .iter()
            .map(|(kx, ky, ph)| (kx * x as f64 + ky * y as f64 + ph).sin())
            .sum();
        (0.5 + 0.1 * s) as f32
    })
    .unwrap()
}

/// Uniform random disparity field.
pub fn random_disparity<R: Rng>(w: usize, h: usize, rng: &mut R) -> DisparityMap {
    DisparityMap::new(Plane::from_fn(w, h, |_, _| rng.gen::<f32>())).unwrap()
}

/// Direct enumeration of every scanline offset `1 <= |k| <= m`, horizontal
/// and vertical, skipping offsets that leave the image. With `occlusion`
/// the difference is taken neighbour minus centre.
pub fn scanline_oracle(d: &Plane, m: usize, rho: f64, gamma: f64, occlusion: bool) -> Vec<f64> {
    let (w, h) = d.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let centre = d.get(x as usize, y as usize) as f64;
            let mut best = 0.0f64;
            for k in 1..=m as isize {
                for (nx, ny) in [(x + k, y), (x - k, y), (x, y + k), (x, y - k)] {
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = d.get(nx as usize, ny as usize) as f64;
                    let diff = if occlusion { n - centre } else { centre - n };
                    best = best.max(diff - rho * k as f64);
                }
            }
            out.push((gamma * best).tanh());
        }
    }
    out
}

/// Synthetic photo: textured slanted background with a few textured
/// foreground shapes at higher disparity.
pub struct Scene {
    pub image: ImageBuffer,
    pub disparity: DisparityMap,
}

pub fn synthetic_photo<R: Rng>(w: usize, h: usize, rng: &mut R) -> Scene {
    let bg = smooth_texture(w, h, rng);
    let fg = smooth_texture(w, h, rng);
    let base = rng.gen_range(0.05..0.25f32);
    let slope = rng.gen_range(0.0..0.1f32);
    let mut disparity = Plane::from_fn(w, h, |_, y| base + slope * y as f32 / h as f32);
    let mut image = bg.data().to_vec();
    for _ in 0..rng.gen_range(1..4) {
        let d = rng.gen_range(0.5..0.95f32);
        let cx = rng.gen_range(0.2..0.8) * w as f64;
        let cy = rng.gen_range(0.2..0.8) * h as f64;
        let r = rng.gen_range(0.08..0.2) * w.min(h) as f64;
        let disk = rng.gen_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let inside = if disk {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= 0.7 * r
                };
                if inside && disparity.get(x, y) < d {
                    disparity.set(x, y, d);
                    let i = (y * w + x) * 3;
                    image[i..i + 3].copy_from_slice(fg.pixel(x, y));
                }
            }
        }
    }
    Scene {
        image: ImageBuffer::from_vec(w, h, 3, image).unwrap(),
        disparity: DisparityMap::new(disparity).unwrap(),
    }
}

/// 4-connected components of the set pixels of `mask`.
pub fn mask_regions(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.data()[start] == 0 {
            continue;
        }
        let mut region = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            region.push(i);
            for j in neighbours(i, w, h) {
                if !seen[j] && mask.data()[j] != 0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        regions.push(region);
    }
    regions
}

pub fn neighbours(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Source pixels 4-adjacent to `region`, sorted and deduplicated.
pub fn region_boundary(region: &[usize], mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = mask.dims();
    let mut b: Vec<usize> = region
        .iter()
        .flat_map(|&i| neighbours(i, w, h))
        .filter(|&j| mask.data()[j] == 0)
        .collect();
    b.sort_unstable();
    b.dedup();
    b
}

/// Nearest-rank quantile: the `ceil(q·n)`-th smallest value.
pub fn nearest_rank(values: &[f32], q: f64) -> f32 {
    let mut v = values.to_vec();
    v.sort_by(f32::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Sub-pixel horizontal shift of `moved` relative to `reference`, by
/// normalized cross-correlation over a central window and a parabolic fit
/// around the integer peak.
pub fn horizontal_shift(reference: &Plane, moved: &Plane, margin: usize, max_shift: isize) -> f64 {
    let (w, h) = reference.dims();
    let score = |s: isize| -> f64 {
        let (mut sab, mut saa, mut sbb, mut sa, mut sb, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for y in margin..h - margin {
            for x in margin..w - margin {
                let a = reference.get(x, y) as f64;
                let b = moved.get((x as isize + s) as usize, y) as f64;
                sab += a * b;
                saa += a * a;
                sbb += b * b;
                sa += a;
                sb += b;
                n += 1.0;
            }
        }
        let cov = sab - sa * sb / n;
        cov / ((saa - sa * sa / n) * (sbb - sb * sb / n)).sqrt()
    };
    let scores: Vec<f64> = (-max_shift..=max_shift).map(score).collect();
    let (best, _) = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let s0 = best as isize - max_shift;
    if best == 0 || best + 1 == scores.len() {
        return s0 as f64;
    }
    let (l, c, r) = (scores[best - 1], scores[best], scores[best + 1]);
    let denom = l - 2.0 * c + r;
    s0 as f64 + if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 }
}

/// Luma-like average of the three channels.
pub fn grey(img: &ImageBuffer) -> Plane {
    Plane::from_fn(img.width(), img.height(), |x, y| {
        let p = img.pixel(x, y);
        (p[0] + p[1] + p[2]) / 3.0
    })
}
