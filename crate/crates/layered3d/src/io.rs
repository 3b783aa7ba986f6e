//! PNG (8/16-bit) and PFM reading and writing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader, Luma, Rgb, Rgba};
use layered3d_core::inpaint::BinaryMask;
use layered3d_core::{DisparityMap, ImageBuffer, Plane};

use crate::error::{Error, Result};

/// Loads an 8- or 16-bit grey, RGB or RGBA PNG, scaling samples by the
/// bit-depth maximum.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::Unsupported {
            path: path.into(),
            what: format!("{:?} (only PNG is read)", reader.format()),
        });
    }
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.into(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f32>) = match img {
        DynamicImage::ImageLuma8(b) => (1, scale8(b.as_raw())),
        DynamicImage::ImageRgb8(b) => (3, scale8(b.as_raw())),
        DynamicImage::ImageRgba8(b) => (4, scale8(b.as_raw())),
        DynamicImage::ImageLuma16(b) => (1, scale16(b.as_raw())),
        DynamicImage::ImageRgb16(b) => (3, scale16(b.as_raw())),
        DynamicImage::ImageRgba16(b) => (4, scale16(b.as_raw())),
        other => {
            return Err(Error::Unsupported {
                path: path.into(),
                what: format!("colour type {:?}", other.color()),
            })
        }
    };
    ImageBuffer::from_vec(w, h, channels, data).map_err(|source| Error::Raster {
        path: path.into(),
        source,
    })
}

fn scale8(raw: &[u8]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 255.0).collect()
}

fn scale16(raw: &[u16]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 65535.0).collect()
}

fn quantize16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn quantize8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn save_dynamic(path: &Path, img: DynamicImage) -> Result<()> {
    img.save_with_format(path, ImageFormat::Png).map_err(|e| Error::Decode {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Writes a 16-bit PNG (rounding to the nearest code, error <= 0.5/65535).
pub fn save_png16(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u16> = img.data().iter().map(|&v| quantize16(v)).collect();
    let dynimg = match img.channels() {
        1 => DynamicImage::ImageLuma16(image::ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("size")),
        3 => DynamicImage::ImageRgb16(image::ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).expect("size")),
        _ => DynamicImage::ImageRgba16(image::ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, raw).expect("size")),
    };
    save_dynamic(path, dynimg)
}

pub fn save_png8(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().map(|&v| quantize8(v)).collect();
    let dynimg = match img.channels() {
        1 => DynamicImage::ImageLuma8(image::ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("size")),
        3 => DynamicImage::ImageRgb8(image::ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("size")),
        _ => DynamicImage::ImageRgba8(image::ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, raw).expect("size")),
    };
    save_dynamic(path, dynimg)
}

/// Single-channel plane as 16-bit grey PNG; values are clamped to `[0, 1]`.
pub fn save_plane_png16(path: impl AsRef<Path>, plane: &Plane) -> Result<()> {
    let img = ImageBuffer::from_vec(
        plane.width(),
        plane.height(),
        1,
        plane.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )?;
    save_png16(path, &img)
}

/// Mask as 8-bit grey PNG with values 0 and 255.
pub fn save_mask_png(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    let img =
        image::ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("mask size");
    save_dynamic(path, DynamicImage::ImageLuma8(img))
}

/// Reads a mask PNG; any sample at or above one half of full scale is set.
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = load_image(path)?;
    let data = img
        .data()
        .chunks_exact(img.channels())
        .map(|px| (px[0] >= 0.5) as u8)
        .collect();
    Ok(BinaryMask::from_vec(img.width(), img.height(), data)?)
}

fn is_pfm(path: &Path) -> Result<bool> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    match f.read_exact(&mut magic) {
        Ok(()) => Ok(&magic == b"Pf" || &magic == b"PF"),
        Err(_) => Ok(false),
    }
}

/// Reads a single-channel (`Pf`) PFM. The sign of the scale field selects
/// endianness (negative = little-endian); rows are stored bottom to top.
/// Values are returned as stored, including non-finite ones.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Pfm {
        path: path.into(),
        what: what.into(),
    };
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Option<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos).ok_or_else(|| bad("missing header"))?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => {
            return Err(Error::Unsupported {
                path: path.into(),
                what: "three-channel PFM; disparity must be single channel".into(),
            })
        }
        _ => return Err(bad("magic is not Pf")),
    }
    let width: usize = token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let height: usize = token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let scale: f32 = token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be non-zero"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let n = width * height;
    let payload = bytes.get(pos..pos + 4 * n).ok_or_else(|| bad("truncated payload"))?;
    let little = scale < 0.0;
    let mut data = vec![0.0f32; n];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, col) = (i / width, i % width);
        data[(height - 1 - row) * width + col] = v;
    }
    Ok(Plane::from_vec(width, height, data)?)
}

/// Writes a little-endian single-channel PFM, bit-exact.
pub fn write_pfm(path: impl AsRef<Path>, plane: &Plane) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = plane.dims();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(out, "Pf\n{w} {h}\n-1.0\n")?;
        for row in (0..h).rev() {
            for v in &plane.data()[row * w..(row + 1) * w] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Loads disparity from PFM or a grey PNG.
///
/// With `normalize`, values are mapped by `(d - min) / (max - min)`;
/// otherwise they are clamped into `[0, 1]`. Non-finite PFM values are an
/// error, as is a constant map under normalization.
pub fn load_disparity(path: impl AsRef<Path>, normalize: bool) -> Result<DisparityMap> {
    let path = path.as_ref();
    let plane = if is_pfm(path)? {
        let p = read_pfm(path)?;
        let bad = p.data().iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFinite {
                path: path.into(),
                count: bad,
            });
        }
        p
    } else {
        let img = load_image(path)?;
        if img.channels() != 1 {
            return Err(Error::Unsupported {
                path: path.into(),
                what: format!("{}-channel PNG; disparity must be grey", img.channels()),
            });
        }
        img.channel(0)
    };
    if normalize {
        let (lo, hi) = plane
            .data()
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi <= lo {
            return Err(Error::DegenerateDisparity { path: path.into() });
        }
        let (lo, span) = (lo as f64, hi as f64 - lo as f64);
        Ok(DisparityMap::clamped(plane.map(|v| ((v as f64 - lo) / span) as f32)))
    } else {
        Ok(DisparityMap::clamped(plane))
    }
}

/// First channel of a PNG as a plane (mattes).
pub fn load_plane(path: impl AsRef<Path>) -> Result<Plane> {
    let img = load_image(path)?;
    Ok(if img.channels() == 4 {
        img.channel(3)
    } else {
        img.channel(0)
    })
}
