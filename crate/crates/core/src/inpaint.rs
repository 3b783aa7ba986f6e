//! Depth-aware RGBD background completion and inpainting-mask generation.
//!
//! The solver fills each masked region in two passes:
//!
//! 1. Disparity: a Laplace problem whose Dirichlet values come only from
//!    boundary pixels on the background side (disparity at or below the
//!    `background_quantile` of all boundary disparities). Boundary pixels on
//!    the foreground side are treated as insulating, so the filled depth is
//!    borrowed from the far side of each edge and never exceeds that level.
//! 2. Colour: a weighted diffusion anchored at the same background pixels,
//!    with edge weights `exp(-lambda · |ΔD|)` on the filled disparity so colour
//!    does not bleed across filled depth discontinuities.
//!
//! Both passes use red-black over-relaxation: pixels of one parity only read
//! pixels of the other, so a sweep is order independent and runs row
//! parallel under the `parallel` feature without changing results. Each
//! update is projected onto the anchor value range of its region, which
//! keeps the maximum principle exact at every iterate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float as _;
use rand::Rng;

use crate::layering::{occlusion_map, DisocclusionParams, SoftMask};
use crate::{DisparityMap, Error, ImageBuffer, Plane, Result};

/// Tolerance above the background level still accepted as a colour anchor.
pub const ANCHOR_SLACK: f32 = 1e-3;

/// Per-pixel {0, 1} mask; 1 marks pixels to fill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                found: data.len(),
            });
        }
        let bad = data.iter().filter(|&&v| v > 1).count();
        if bad > 0 {
            return Err(Error::OutOfRange { count: bad });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn coverage(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.count() as f64 / self.data.len() as f64
    }

    pub fn to_plane(&self) -> Plane {
        Plane::from_vec(self.width, self.height, self.data.iter().map(|&v| v as f32).collect())
            .expect("mask dimensions")
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
}

/// `1` where `S >= tau`. A mask with no source pixel left is rejected.
pub fn binarize_mask(s: &SoftMask, tau: f32) -> Result<BinaryMask> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter("mask threshold must be in (0, 1)"));
    }
    let data: Vec<u8> = s.data().iter().map(|&v| (v >= tau) as u8).collect();
    if !data.is_empty() && data.iter().all(|&v| v == 1) {
        return Err(Error::NoSourcePixels);
    }
    BinaryMask::from_vec(s.width(), s.height(), data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct InpaintParams {
    /// Soft-mask threshold used when binarizing the disocclusion map.
    pub mask_threshold: f32,
    /// Sweep cap per pass.
    pub max_iterations: usize,
    /// Converged once the largest per-pixel change of a sweep falls below this.
    pub convergence_tol: f64,
    /// `lambda` in the colour edge weight `exp(-lambda · |ΔD|)`.
    pub depth_guidance_strength: f64,
    /// Quantile of boundary disparities that defines the background side.
    pub background_quantile: f64,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            mask_threshold: 0.5,
            max_iterations: 10_000,
            convergence_tol: 1e-5,
            depth_guidance_strength: 50.0,
            background_quantile: 0.3,
        }
    }
}

impl InpaintParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::InvalidParameter("mask_threshold must be in (0, 1)"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidParameter("convergence_tol must be > 0"));
        }
        if !(self.depth_guidance_strength >= 0.0 && self.depth_guidance_strength.is_finite()) {
            return Err(Error::InvalidParameter("depth_guidance_strength must be >= 0"));
        }
        if !(self.background_quantile > 0.0 && self.background_quantile <= 1.0) {
            return Err(Error::InvalidParameter("background_quantile must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Completed background layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintedBackground {
    pub rgb: ImageBuffer,
    pub disparity: DisparityMap,
    /// Boundary-disparity quantile that separated background anchors from
    /// foreground ones. `None` when nothing was solved.
    pub background_level: Option<f32>,
    /// Both passes reached `convergence_tol` within `max_iterations`.
    pub converged: bool,
    /// Total sweeps over both passes.
    pub iterations: usize,
    /// Regions whose boundary had no pixel at or below the background level
    /// and were anchored at their own minimum-disparity boundary pixels.
    pub fallback_regions: usize,
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f32], q: f64) -> f32 {
    let mut v: Vec<f32> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    let rank = (q * n as f64).ceil() as usize;
    v[rank.clamp(1, n) - 1]
}

const NONE: u32 = u32::MAX;

/// A neighbour of an unknown: either another unknown (of the opposite
/// parity) or a fixed anchor pixel.
#[derive(Clone, Copy)]
enum Link {
    Unknown(u32),
    Anchor(u32),
}

struct Region {
    /// Anchor inclusion threshold for the disparity pass; the colour pass
    /// adds [`ANCHOR_SLACK`].
    threshold: f32,
    omega: f64,
    fallback: bool,
}

/// Unknowns split by pixel parity with their links.
struct System {
    /// Pixel index of each unknown, per parity.
    pixels: [Vec<u32>; 2],
    links: [Vec<[Option<Link>; 4]>; 2],
    region: [Vec<u32>; 2],
}

struct Layout {
    width: usize,
    height: usize,
    /// Region id per pixel, `NONE` for source pixels.
    region_of: Vec<u32>,
    regions: Vec<Region>,
    /// (parity, slot) of each masked pixel.
    slot_of: Vec<(u8, u32)>,
    background_level: f32,
}

fn neighbours(i: usize, w: usize, h: usize) -> [Option<usize>; 4] {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
}

fn build_layout(d: &DisparityMap, mask: &BinaryMask, q: f64) -> Result<Option<Layout>> {
    let (w, h) = mask.dims();
    let n = w * h;
    let mut region_of = vec![NONE; n];
    let mut boundaries: Vec<Vec<u32>> = Vec::new();
    let mut extents: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if mask.data[start] == 0 || region_of[start] != NONE {
            continue;
        }
        let id = boundaries.len() as u32;
        let mut boundary = Vec::new();
        let mut ext = (usize::MAX, usize::MAX, 0, 0);
        region_of[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            ext = (ext.0.min(x), ext.1.min(y), ext.2.max(x), ext.3.max(y));
            for j in neighbours(i, w, h).into_iter().flatten() {
                if mask.data[j] == 0 {
                    boundary.push(j as u32);
                } else if region_of[j] == NONE {
                    region_of[j] = id;
                    stack.push(j);
                }
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        if boundary.is_empty() {
            return Err(Error::EmptySourceBoundary);
        }
        boundaries.push(boundary);
        extents.push(ext);
    }
    if boundaries.is_empty() {
        return Ok(None);
    }

    let mut all: Vec<u32> = boundaries.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    let all_d: Vec<f32> = all.iter().map(|&i| d.data()[i as usize]).collect();
    let background_level = quantile(&all_d, q);

    let regions = boundaries
        .iter()
        .zip(&extents)
        .map(|(b, e)| {
            let min = b.iter().map(|&i| d.data()[i as usize]).fold(f32::INFINITY, f32::min);
            let fallback = min > background_level;
            let span = (e.2 - e.0 + 1).max(e.3 - e.1 + 1) as f64;
            // Optimal SOR factor for a square of this span, capped.
            let omega = (2.0 / (1.0 + (PI / (span + 1.0)).sin())).min(1.9);
            Region {
                threshold: if fallback { min } else { background_level },
                omega,
                fallback,
            }
        })
        .collect();

    let mut slot_of = vec![(0u8, NONE); n];
    let mut counts = [0u32; 2];
    for i in 0..n {
        if mask.data[i] != 0 {
            let parity = ((i % w + i / w) & 1) as u8;
            slot_of[i] = (parity, counts[parity as usize]);
            counts[parity as usize] += 1;
        }
    }
    Ok(Some(Layout {
        width: w,
        height: h,
        region_of,
        regions,
        slot_of,
        background_level,
    }))
}

impl Layout {
    /// Links for one pass; `slack` widens the anchor threshold.
    fn system(&self, d: &DisparityMap, slack: f32) -> System {
        let mut sys = System {
            pixels: [Vec::new(), Vec::new()],
            links: [Vec::new(), Vec::new()],
            region: [Vec::new(), Vec::new()],
        };
        for (i, &(parity, slot)) in self.slot_of.iter().enumerate() {
            if slot == NONE {
                continue;
            }
            let r = self.region_of[i];
            let thr = self.regions[r as usize].threshold + slack;
            let mut links = [None; 4];
            for (k, j) in neighbours(i, self.width, self.height).into_iter().enumerate() {
                let Some(j) = j else { continue };
                links[k] = if self.slot_of[j].1 != NONE {
                    Some(Link::Unknown(self.slot_of[j].1))
                } else if d.data()[j] <= thr {
                    Some(Link::Anchor(j as u32))
                } else {
                    None
                };
            }
            let p = parity as usize;
            sys.pixels[p].push(i as u32);
            sys.links[p].push(links);
            sys.region[p].push(r);
        }
        sys
    }
}

/// Per-region, per-channel anchor range and mean.
struct AnchorStats {
    lo: Vec<f64>,
    hi: Vec<f64>,
    mean: Vec<f64>,
}

fn anchor_stats(sys: &System, regions: usize, channels: usize, value: impl Fn(usize, usize) -> f64) -> AnchorStats {
    let mut st = AnchorStats {
        lo: vec![f64::INFINITY; regions * channels],
        hi: vec![f64::NEG_INFINITY; regions * channels],
        mean: vec![0.0; regions * channels],
    };
    let mut count = vec![0usize; regions];
    for p in 0..2 {
        for (links, &r) in sys.links[p].iter().zip(&sys.region[p]) {
            let r = r as usize;
            for link in links.iter().flatten() {
                if let Link::Anchor(a) = *link {
                    count[r] += 1;
                    for c in 0..channels {
                        let v = value(a as usize, c);
                        let k = r * channels + c;
                        st.lo[k] = st.lo[k].min(v);
                        st.hi[k] = st.hi[k].max(v);
                        st.mean[k] += v;
                    }
                }
            }
        }
    }
    for r in 0..regions {
        for c in 0..channels {
            st.mean[r * channels + c] /= count[r].max(1) as f64;
        }
    }
    st
}

/// Red-black projected SOR. `weight(pixel, link_target_pixel)` gives the
/// symmetric edge weight; `anchor_value(pixel, c)` the Dirichlet data.
#[allow(clippy::too_many_arguments)]
fn solve(
    sys: &System,
    regions: &[Region],
    channels: usize,
    stats: &AnchorStats,
    weights: &[Vec<[f64; 4]>; 2],
    anchor_value: &(dyn Fn(usize, usize) -> f64 + Sync),
    max_iterations: usize,
    tol: f64,
) -> ([Vec<f64>; 2], usize, bool) {
    let mut vals: [Vec<f64>; 2] = [0, 1].map(|p| {
        sys.region[p]
            .iter()
            .flat_map(|&r| (0..channels).map(move |c| stats.mean[r as usize * channels + c]))
            .collect()
    });
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iterations {
        sweeps += 1;
        let mut change = 0.0f64;
        for p in 0..2 {
            let (cur, other) = if p == 0 {
                let (a, b) = vals.split_at_mut(1);
                (&mut a[0], &b[0])
            } else {
                let (a, b) = vals.split_at_mut(1);
                (&mut b[0], &a[0])
            };
            let update = |k: usize, out: &mut [f64]| -> f64 {
                let r = sys.region[p][k] as usize;
                let omega = regions[r].omega;
                let w = &weights[p][k];
                let mut acc = [0.0f64; 4];
                let mut wsum = 0.0;
                for (l, link) in sys.links[p][k].iter().enumerate() {
                    let Some(link) = link else { continue };
                    let wl = w[l];
                    wsum += wl;
                    for (c, a) in acc.iter_mut().enumerate().take(channels) {
                        let v = match *link {
                            Link::Unknown(s) => other[s as usize * channels + c],
                            Link::Anchor(px) => anchor_value(px as usize, c),
                        };
                        *a += wl * v;
                    }
                }
                if wsum <= 0.0 {
                    return 0.0;
                }
                let mut delta = 0.0f64;
                for c in 0..channels {
                    let target = acc[c] / wsum;
                    let k2 = r * channels + c;
                    let next = (out[c] + omega * (target - out[c])).clamp(stats.lo[k2], stats.hi[k2]);
                    delta = delta.max((next - out[c]).abs());
                    out[c] = next;
                }
                delta
            };
            change = change.max(sweep(cur, channels, &update));
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    (vals, sweeps, converged)
}

#[cfg(feature = "parallel")]
fn sweep(cur: &mut [f64], channels: usize, update: &(dyn Fn(usize, &mut [f64]) -> f64 + Sync)) -> f64 {
    use rayon::prelude::*;
    cur.par_chunks_mut(channels)
        .enumerate()
        .with_min_len(1024)
        .map(|(k, out)| update(k, out))
        .reduce(|| 0.0, f64::max)
}

#[cfg(not(feature = "parallel"))]
fn sweep(cur: &mut [f64], channels: usize, update: &dyn Fn(usize, &mut [f64]) -> f64) -> f64 {
    cur.chunks_mut(channels)
        .enumerate()
        .map(|(k, out)| update(k, out))
        .fold(0.0, f64::max)
}

/// Depth-aware two-pass diffusion fill of `mask` in `(rgb, disparity)`.
///
/// Pixels outside the mask are copied bit-exactly. An empty mask returns the
/// inputs. Running out of sweeps is not an error; `converged` reports it.
pub fn inpaint_rgbd(
    rgb: &ImageBuffer,
    disparity: &DisparityMap,
    mask: &BinaryMask,
    params: &InpaintParams,
) -> Result<InpaintedBackground> {
    params.validate()?;
    let dims = disparity.dims();
    rgb.ensure_dims(dims)?;
    mask.ensure_dims(dims)?;
    if rgb.channels() > 4 {
        return Err(Error::UnsupportedChannels(rgb.channels()));
    }
    if !mask.data.is_empty() && mask.data.iter().all(|&v| v == 1) {
        return Err(Error::NoSourcePixels);
    }
    let Some(layout) = build_layout(disparity, mask, params.background_quantile)? else {
        return Ok(InpaintedBackground {
            rgb: rgb.clone(),
            disparity: disparity.clone(),
            background_level: None,
            converged: true,
            iterations: 0,
            fallback_regions: 0,
        });
    };
    let n_regions = layout.regions.len();
    let ddata = disparity.data();

    // Disparity pass: uniform weights, strict background anchors.
    let sys_d = layout.system(disparity, 0.0);
    let unit: [Vec<[f64; 4]>; 2] = [0, 1].map(|p| vec![[1.0; 4]; sys_d.pixels[p].len()]);
    let stats_d = anchor_stats(&sys_d, n_regions, 1, |i, _| ddata[i] as f64);
    let anchor_d = |i: usize, _c: usize| ddata[i] as f64;
    let (dvals, sweeps_d, conv_d) = solve(
        &sys_d,
        &layout.regions,
        1,
        &stats_d,
        &unit,
        &anchor_d,
        params.max_iterations,
        params.convergence_tol,
    );
    let mut filled_d: Vec<f32> = ddata.to_vec();
    for p in 0..2 {
        for (k, &px) in sys_d.pixels[p].iter().enumerate() {
            filled_d[px as usize] = dvals[p][k] as f32;
        }
    }

    // Colour pass: depth-guided weights, anchors within the slack.
    let sys_c = layout.system(disparity, ANCHOR_SLACK);
    let lambda = params.depth_guidance_strength;
    let filled_ref = &filled_d;
    let weights: [Vec<[f64; 4]>; 2] = [0, 1].map(|p| {
        sys_c.pixels[p]
            .iter()
            .zip(&sys_c.links[p])
            .map(|(&px, links)| {
                let mut w = [0.0; 4];
                let nb = neighbours(px as usize, layout.width, layout.height);
                for (l, link) in links.iter().enumerate() {
                    if link.is_some() {
                        let j = nb[l].expect("linked neighbour exists");
                        let dd = (filled_ref[px as usize] as f64 - filled_ref[j] as f64).abs();
                        w[l] = (-lambda * dd).exp();
                    }
                }
                w
            })
            .collect()
    });
    let ch = rgb.channels();
    let pix = rgb.data();
    let stats_c = anchor_stats(&sys_c, n_regions, ch, |i, c| pix[i * ch + c] as f64);
    let anchor_c = |i: usize, c: usize| pix[i * ch + c] as f64;
    let (cvals, sweeps_c, conv_c) = solve(
        &sys_c,
        &layout.regions,
        ch,
        &stats_c,
        &weights,
        &anchor_c,
        params.max_iterations,
        params.convergence_tol,
    );
    let mut filled_rgb: Vec<f32> = pix.to_vec();
    for p in 0..2 {
        for (k, &px) in sys_c.pixels[p].iter().enumerate() {
            for c in 0..ch {
                filled_rgb[px as usize * ch + c] = cvals[p][k * ch + c] as f32;
            }
        }
    }

    Ok(InpaintedBackground {
        rgb: ImageBuffer::from_vec(dims.0, dims.1, ch, filled_rgb)?,
        disparity: DisparityMap::from_vec(dims.0, dims.1, filled_d)?,
        background_level: Some(layout.background_level),
        converged: conv_d && conv_c,
        iterations: sweeps_d + sweeps_c,
        fallback_regions: layout.regions.iter().filter(|r| r.fallback).count(),
    })
}

/// Splices externally inpainted layers into the originals: values inside
/// the mask come from `external`, everything else from `original`.
pub fn splice_external(
    original_rgb: &ImageBuffer,
    original_disparity: &DisparityMap,
    external_rgb: &ImageBuffer,
    external_disparity: &DisparityMap,
    mask: &BinaryMask,
) -> Result<InpaintedBackground> {
    let dims = original_disparity.dims();
    original_rgb.ensure_dims(dims)?;
    external_rgb.ensure_dims(dims)?;
    external_disparity.ensure_dims(dims)?;
    mask.ensure_dims(dims)?;
    let ch = original_rgb.channels();
    let ext_rgb = if external_rgb.channels() == ch {
        external_rgb.clone()
    } else if ch == 3 {
        external_rgb.to_rgb()
    } else {
        return Err(Error::ChannelMismatch {
            expected: ch,
            found: external_rgb.channels(),
        });
    };
    let mut rgb = original_rgb.data().to_vec();
    let mut disp = original_disparity.data().to_vec();
    for (i, &m) in mask.data.iter().enumerate() {
        if m != 0 {
            disp[i] = external_disparity.data()[i];
            rgb[i * ch..(i + 1) * ch].copy_from_slice(&ext_rgb.data()[i * ch..(i + 1) * ch]);
        }
    }
    Ok(InpaintedBackground {
        rgb: ImageBuffer::from_vec(dims.0, dims.1, ch, rgb)?,
        disparity: DisparityMap::from_vec(dims.0, dims.1, disp)?,
        background_level: None,
        converged: true,
        iterations: 0,
        fallback_regions: 0,
    })
}

/// Parameters of the training-mask generator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MaskDatasetSpec {
    pub occlusion_params: DisocclusionParams,
    /// Threshold applied to the soft occlusion map.
    pub mask_threshold: f32,
    /// Inclusive range of strokes per mask.
    pub stroke_count_range: (u32, u32),
    /// Inclusive range of segments per stroke.
    pub segment_count_range: (u32, u32),
    /// Brush diameter in pixels.
    pub stroke_width_range: (f32, f32),
    /// Segment length in pixels.
    pub stroke_length_range: (f32, f32),
    /// Largest heading change between consecutive segments, radians.
    pub max_turn: f32,
    /// Probability of emitting an occlusion mask instead of strokes.
    pub mix_ratio: f64,
    pub seed: u64,
}

impl Default for MaskDatasetSpec {
    fn default() -> Self {
        Self {
            occlusion_params: DisocclusionParams::default(),
            mask_threshold: 0.5,
            stroke_count_range: (1, 4),
            segment_count_range: (2, 6),
            stroke_width_range: (6.0, 20.0),
            stroke_length_range: (10.0, 40.0),
            max_turn: 2.0 * core::f32::consts::PI / 5.0,
            mix_ratio: 0.5,
            seed: 0,
        }
    }
}

impl MaskDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f32, hi: f32| lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi;
        if self.stroke_count_range.0 > self.stroke_count_range.1 {
            return Err(Error::InvalidParameter("stroke_count_range is empty"));
        }
        if self.segment_count_range.0 > self.segment_count_range.1 {
            return Err(Error::InvalidParameter("segment_count_range is empty"));
        }
        if !ok(self.stroke_width_range.0, self.stroke_width_range.1) {
            return Err(Error::InvalidParameter("stroke_width_range is empty"));
        }
        if !ok(self.stroke_length_range.0, self.stroke_length_range.1) {
            return Err(Error::InvalidParameter("stroke_length_range is empty"));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::InvalidParameter("mix_ratio must be in [0, 1]"));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::InvalidParameter("mask_threshold must be in (0, 1)"));
        }
        self.occlusion_params.validate()
    }
}

/// Stamps a round brush of `radius` along segment `a`–`b`.
fn stamp_segment(mask: &mut BinaryMask, a: (f64, f64), b: (f64, f64), radius: f64) {
    let (w, h) = mask.dims();
    let x0 = (a.0.min(b.0) - radius).floor().max(0.0) as usize;
    let y0 = (a.1.min(b.1) - radius).floor().max(0.0) as usize;
    let x1 = ((a.0.max(b.0) + radius).ceil() as usize).min(w - 1);
    let y1 = ((a.1.max(b.1) + radius).ceil() as usize).min(h - 1);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let r2 = radius * radius;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= r2 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Free-form brush strokes: each stroke is a random walk of straight
/// segments starting at a uniform pixel, drawn with a round brush.
pub fn random_stroke_mask<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    spec: &MaskDatasetSpec,
    rng: &mut R,
) -> Result<BinaryMask> {
    spec.validate()?;
    let mut mask = BinaryMask::empty(width, height);
    if width == 0 || height == 0 {
        return Ok(mask);
    }
    let strokes = rng.gen_range(spec.stroke_count_range.0..=spec.stroke_count_range.1);
    let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
    for _ in 0..strokes {
        let mut p = (rng.gen_range(0..width) as f64, rng.gen_range(0..height) as f64);
        let mut heading = rng.gen_range(0.0..2.0 * PI);
        let radius = rng.gen_range(spec.stroke_width_range.0..=spec.stroke_width_range.1) as f64 / 2.0;
        let segments = rng.gen_range(spec.segment_count_range.0..=spec.segment_count_range.1);
        for s in 0..segments {
            if s > 0 {
                let turn = spec.max_turn as f64;
                heading += rng.gen_range(-turn..=turn);
            }
            let len = rng.gen_range(spec.stroke_length_range.0..=spec.stroke_length_range.1) as f64;
            let q = (
                (p.0 + len * heading.cos()).clamp(0.0, wmax),
                (p.1 + len * heading.sin()).clamp(0.0, hmax),
            );
            stamp_segment(&mut mask, p, q, radius);
            p = q;
        }
    }
    Ok(mask)
}

/// Which generator produced a training mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MaskKind {
    Occlusion,
    Stroke,
    /// Occlusion branch was drawn but produced no usable mask.
    StrokeFallback,
}

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::Occlusion => "occlusion",
            MaskKind::Stroke => "stroke",
            MaskKind::StrokeFallback => "stroke_fallback",
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mixes occlusion-band masks (the background side of depth edges, where
/// ground truth is visible) with free-form strokes.
pub fn generate_training_mask<R: Rng + ?Sized>(
    d: &DisparityMap,
    spec: &MaskDatasetSpec,
    rng: &mut R,
) -> Result<(BinaryMask, MaskKind)> {
    spec.validate()?;
    let draw: f64 = rng.gen();
    if draw < spec.mix_ratio {
        let s_hat = occlusion_map(d, &spec.occlusion_params)?;
        match binarize_mask(&s_hat, spec.mask_threshold) {
            Ok(m) if !m.is_empty() => return Ok((m, MaskKind::Occlusion)),
            Ok(_) | Err(Error::NoSourcePixels) => {
                let m = random_stroke_mask(d.width(), d.height(), spec, rng)?;
                return Ok((m, MaskKind::StrokeFallback));
            }
            Err(e) => return Err(e),
        }
    }
    let m = random_stroke_mask(d.width(), d.height(), spec, rng)?;
    Ok((m, MaskKind::Stroke))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rgb_const(w: usize, h: usize, v: [f32; 3]) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |_, _, c| v[c]).unwrap()
    }

    #[test]
    fn binarize_cases() {
        let zero = SoftMask::constant(4, 4, 0.0);
        assert!(binarize_mask(&zero, 0.5).unwrap().is_empty());
        let mut p = Plane::new(4, 4, 0.0);
        p.set(2, 1, 0.9);
        let m = binarize_mask(&SoftMask::new(p).unwrap(), 0.5).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(2, 1));
        let full = SoftMask::constant(4, 4, 0.7);
        assert_eq!(binarize_mask(&full, 0.5), Err(Error::NoSourcePixels));
        assert!(binarize_mask(&zero, 1.0).is_err());
    }

    #[test]
    fn empty_mask_is_identity() {
        let rgb = ImageBuffer::from_fn(5, 4, 3, |x, y, c| (x + y + c) as f32 / 12.0).unwrap();
        let d = DisparityMap::new(Plane::from_fn(5, 4, |x, _| x as f32 / 4.0)).unwrap();
        let out = inpaint_rgbd(&rgb, &d, &BinaryMask::empty(5, 4), &InpaintParams::default()).unwrap();
        assert_eq!(out.rgb, rgb);
        assert_eq!(out.disparity, d);
        assert!(out.converged);
    }

    #[test]
    fn single_pixel_constant_boundary() {
        let v = [0.1, 0.6, 0.9];
        let rgb = rgb_const(3, 3, v);
        let d = DisparityMap::constant(3, 3, 0.2);
        let mut mask = BinaryMask::empty(3, 3);
        mask.set(1, 1, true);
        let out = inpaint_rgbd(&rgb, &d, &mask, &InpaintParams::default()).unwrap();
        assert_eq!(out.disparity.get(1, 1), 0.2);
        for (c, &vc) in v.iter().enumerate() {
            assert!((out.rgb.get(1, 1, c) - vc).abs() < 1e-6);
        }
    }

    #[test]
    fn foreground_strip_borrows_background() {
        let (w, h) = (40, 20);
        let d = DisparityMap::new(Plane::from_fn(
            w,
            h,
            |x, _| if (15..25).contains(&x) { 0.9 } else { 0.1 },
        ))
        .unwrap();
        let rgb = ImageBuffer::from_fn(w, h, 3, |x, y, c| {
            if (15..25).contains(&x) {
                1.0
            } else {
                0.1 + 0.02 * y as f32 + 0.1 * c as f32
            }
        })
        .unwrap();
        let mut mask = BinaryMask::empty(w, h);
        for y in 0..h {
            for x in 13..27 {
                mask.set(x, y, true);
            }
        }
        let out = inpaint_rgbd(&rgb, &d, &mask, &InpaintParams::default()).unwrap();
        assert!(out.converged);
        for y in 0..h {
            for x in 0..w {
                let dv = out.disparity.get(x, y);
                if mask.get(x, y) {
                    assert!((0.1 - 1e-6..=0.1 + 1e-3).contains(&dv), "{dv}");
                    for c in 0..3 {
                        let v = out.rgb.get(x, y, c);
                        let lo = 0.1 + 0.1 * c as f32;
                        let hi = lo + 0.02 * (h - 1) as f32;
                        assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
                    }
                } else {
                    assert_eq!(dv.to_bits(), d.get(x, y).to_bits());
                }
            }
        }
    }

    #[test]
    fn region_without_background_anchor_falls_back() {
        // Region A borders far pixels (0.1); region B is a single pixel inside
        // a near block (0.9), above the global background level.
        let d = DisparityMap::new(Plane::from_fn(12, 5, |x, _| if x < 6 { 0.1 } else { 0.9 })).unwrap();
        let mut mask = BinaryMask::empty(12, 5);
        mask.set(2, 2, true);
        mask.set(9, 2, true);
        let rgb = rgb_const(12, 5, [0.5; 3]);
        let out = inpaint_rgbd(&rgb, &d, &mask, &InpaintParams::default()).unwrap();
        assert_eq!(out.background_level, Some(0.1));
        assert_eq!(out.fallback_regions, 1);
        assert_eq!(out.disparity.get(2, 2), 0.1);
        assert_eq!(out.disparity.get(9, 2), 0.9);
    }

    #[test]
    fn all_ones_mask_rejected() {
        let mask = BinaryMask::from_vec(2, 2, vec![1; 4]).unwrap();
        let err = inpaint_rgbd(
            &rgb_const(2, 2, [0.0; 3]),
            &DisparityMap::constant(2, 2, 0.0),
            &mask,
            &InpaintParams::default(),
        );
        assert_eq!(err.unwrap_err(), Error::NoSourcePixels);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (w, h) = (30, 30);
        let d = DisparityMap::new(Plane::from_fn(w, h, |x, _| x as f32 / 60.0)).unwrap();
        let rgb = ImageBuffer::from_fn(w, h, 3, |x, y, _| ((x * 7 + y * 3) % 10) as f32 / 10.0).unwrap();
        let mut mask = BinaryMask::empty(w, h);
        for y in 5..25 {
            for x in 5..25 {
                mask.set(x, y, true);
            }
        }
        let params = InpaintParams {
            max_iterations: 2,
            ..Default::default()
        };
        let out = inpaint_rgbd(&rgb, &d, &mask, &params).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 4);
    }

    #[test]
    fn splice_respects_mask() {
        let orig = rgb_const(3, 1, [0.2; 3]);
        let ext = rgb_const(3, 1, [0.8; 3]);
        let d0 = DisparityMap::constant(3, 1, 0.3);
        let d1 = DisparityMap::constant(3, 1, 0.1);
        let empty = splice_external(&orig, &d0, &ext, &d1, &BinaryMask::empty(3, 1)).unwrap();
        assert_eq!(empty.rgb, orig);
        assert_eq!(empty.disparity, d0);
        let mask = BinaryMask::from_vec(3, 1, vec![0, 1, 0]).unwrap();
        let out = splice_external(&orig, &d0, &ext, &d1, &mask).unwrap();
        assert_eq!(out.disparity.data(), &[0.3, 0.1, 0.3]);
        assert_eq!(out.rgb.pixel(1, 0), &[0.8, 0.8, 0.8]);
        let same = splice_external(&orig, &d0, &orig, &d0, &mask).unwrap();
        assert_eq!(same.rgb, orig);
        let wrong = DisparityMap::constant(2, 1, 0.1);
        assert!(splice_external(&orig, &d0, &ext, &wrong, &mask).is_err());
    }

    #[test]
    fn stroke_masks() {
        let spec = MaskDatasetSpec {
            stroke_count_range: (0, 0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(random_stroke_mask(32, 32, &spec, &mut rng).unwrap().is_empty());

        let spec = MaskDatasetSpec::default();
        let a = random_stroke_mask(64, 48, &spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = random_stroke_mask(64, 48, &spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn training_mask_branches() {
        let half = DisparityMap::new(Plane::from_fn(64, 16, |x, _| if x < 32 { 0.8 } else { 0.2 })).unwrap();
        let mut spec = MaskDatasetSpec {
            mix_ratio: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(
                generate_training_mask(&half, &spec, &mut rng).unwrap().1,
                MaskKind::Stroke
            );
        }
        spec.mix_ratio = 1.0;
        let (m, kind) = generate_training_mask(&half, &spec, &mut rng).unwrap();
        assert_eq!(kind, MaskKind::Occlusion);
        for y in 0..16 {
            for x in 0..32 {
                assert!(!m.get(x, y));
            }
            assert!(m.get(32, y));
        }
        let flat = DisparityMap::constant(64, 16, 0.4);
        assert_eq!(
            generate_training_mask(&flat, &spec, &mut rng).unwrap().1,
            MaskKind::StrokeFallback
        );
    }

    #[test]
    fn quantile_nearest_rank() {
        let v = [0.5, 0.1, 0.3, 0.9, 0.7];
        assert_eq!(quantile(&v, 0.3), 0.3);
        assert_eq!(quantile(&v, 1.0), 0.9);
        assert_eq!(quantile(&v, 0.01), 0.1);
    }
}
