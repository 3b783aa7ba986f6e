//! On-disk two-layer bundle: `manifest.json` plus PNG and PFM assets.
//!
//! ```json
//! {"version": 1,
//!  "intrinsics": {"fx": .., "fy": .., "cx": .., "cy": .., "width": .., "height": ..},
//!  "mapping": {"d_min": ..},
//!  "layers": {"fg": {"rgb": "fg_rgb.png", "alpha": "fg_alpha.png", "disparity": "fg_disp.pfm"},
//!             "bg": {"rgb": "bg_rgb.png", "disparity": "bg_disp.pfm"}}}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use layered3d_core::geometry::{CameraIntrinsics, DepthMapping};
use layered3d_core::layering::VisibilityMap;
use layered3d_core::view::LayerBundle;
use layered3d_core::{DisparityMap, ImageBuffer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io;

pub const BUNDLE_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u64,
    pub intrinsics: CameraIntrinsics,
    pub mapping: DepthMapping,
    pub layers: Layers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layers {
    pub fg: FgFiles,
    pub bg: BgFiles,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FgFiles {
    pub rgb: String,
    pub alpha: String,
    pub disparity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgFiles {
    pub rgb: String,
    pub disparity: String,
}

impl Default for Layers {
    fn default() -> Self {
        Self {
            fg: FgFiles {
                rgb: "fg_rgb.png".into(),
                alpha: "fg_alpha.png".into(),
                disparity: "fg_disp.pfm".into(),
            },
            bg: BgFiles {
                rgb: "bg_rgb.png".into(),
                disparity: "bg_disp.pfm".into(),
            },
        }
    }
}

fn field<'a>(root: &'a Value, path: &str) -> Result<&'a Value> {
    let mut cur = root;
    for key in path.split('.') {
        cur = cur.get(key).ok_or_else(|| Error::Manifest {
            field: path.into(),
            message: "missing".into(),
        })?;
    }
    Ok(cur)
}

fn number(root: &Value, path: &str) -> Result<f64> {
    field(root, path)?.as_f64().ok_or_else(|| Error::Manifest {
        field: path.into(),
        message: "expected a number".into(),
    })
}

fn count(root: &Value, path: &str) -> Result<usize> {
    field(root, path)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Manifest {
            field: path.into(),
            message: "expected a non-negative integer".into(),
        })
}

fn file_name(root: &Value, path: &str) -> Result<String> {
    let name = field(root, path)?.as_str().ok_or_else(|| Error::Manifest {
        field: path.into(),
        message: "expected a file name".into(),
    })?;
    let p = Path::new(name);
    if name.is_empty() || p.is_absolute() || p.components().count() != 1 {
        return Err(Error::Manifest {
            field: path.into(),
            message: format!("`{name}` must be a plain file name inside the bundle"),
        });
    }
    Ok(name.into())
}

impl Manifest {
    /// Parses and checks a manifest. The version is checked before any
    /// other field; errors name the offending field by dotted path.
    pub fn parse(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::Manifest {
            field: "<root>".into(),
            message: e.to_string(),
        })?;
        let version = field(&root, "version")?.as_u64().ok_or_else(|| Error::Manifest {
            field: "version".into(),
            message: "expected an integer".into(),
        })?;
        if version != BUNDLE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: BUNDLE_VERSION,
            });
        }
        let intrinsics = CameraIntrinsics {
            fx: number(&root, "intrinsics.fx")?,
            fy: number(&root, "intrinsics.fy")?,
            cx: number(&root, "intrinsics.cx")?,
            cy: number(&root, "intrinsics.cy")?,
            width: count(&root, "intrinsics.width")?,
            height: count(&root, "intrinsics.height")?,
        };
        intrinsics.validate().map_err(|e| Error::Manifest {
            field: "intrinsics".into(),
            message: e.to_string(),
        })?;
        let mapping = DepthMapping {
            d_min: number(&root, "mapping.d_min")?,
        };
        mapping.validate().map_err(|e| Error::Manifest {
            field: "mapping.d_min".into(),
            message: e.to_string(),
        })?;
        let layers = Layers {
            fg: FgFiles {
                rgb: file_name(&root, "layers.fg.rgb")?,
                alpha: file_name(&root, "layers.fg.alpha")?,
                disparity: file_name(&root, "layers.fg.disparity")?,
            },
            bg: BgFiles {
                rgb: file_name(&root, "layers.bg.rgb")?,
                disparity: file_name(&root, "layers.bg.disparity")?,
            },
        };
        Ok(Self {
            version,
            intrinsics,
            mapping,
            layers,
        })
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }
}

/// Writes the bundle into `dir` (created if needed). Colour and visibility
/// are 16-bit PNG, disparities little-endian PFM.
pub fn export_bundle(bundle: &LayerBundle, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        version: BUNDLE_VERSION,
        intrinsics: bundle.intrinsics,
        mapping: bundle.mapping,
        layers: Layers::default(),
    };
    let l = &manifest.layers;
    io::save_png16(dir.join(&l.fg.rgb), &bundle.fg_rgb)?;
    io::save_plane_png16(dir.join(&l.fg.alpha), bundle.fg_visibility.plane())?;
    io::write_pfm(dir.join(&l.fg.disparity), bundle.fg_disparity.plane())?;
    io::save_png16(dir.join(&l.bg.rgb), &bundle.bg_rgb)?;
    io::write_pfm(dir.join(&l.bg.disparity), bundle.bg_disparity.plane())?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn raster_err(path: PathBuf) -> impl FnOnce(layered3d_core::Error) -> Error {
    move |source| Error::Raster { path, source }
}

fn load_rgb(path: PathBuf) -> Result<ImageBuffer> {
    Ok(io::load_image(&path)?.to_rgb())
}

fn load_disp(path: PathBuf) -> Result<DisparityMap> {
    let plane = io::read_pfm(&path)?;
    DisparityMap::new(plane).map_err(raster_err(path))
}

/// Reads a bundle written by [`export_bundle`] (or any manifest-conforming
/// directory).
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<LayerBundle> {
    let dir = dir.as_ref();
    let m = Manifest::read(dir)?;
    let l = &m.layers;
    let alpha_path = dir.join(&l.fg.alpha);
    let alpha = io::load_plane(&alpha_path)?;
    let bundle = LayerBundle {
        fg_rgb: load_rgb(dir.join(&l.fg.rgb))?,
        fg_visibility: VisibilityMap::new(alpha).map_err(raster_err(alpha_path))?,
        fg_disparity: load_disp(dir.join(&l.fg.disparity))?,
        bg_rgb: load_rgb(dir.join(&l.bg.rgb))?,
        bg_disparity: load_disp(dir.join(&l.bg.disparity))?,
        intrinsics: m.intrinsics,
        mapping: m.mapping,
    };
    bundle.validate().map_err(raster_err(dir.into()))?;
    Ok(bundle)
}
