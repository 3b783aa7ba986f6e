//! End-to-end processing: inputs to bundle, bundle to frames, frames to
//! quality scores.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use layered3d_core::geometry::{circular_path, CameraIntrinsics, CameraPose, DepthMapping};
use layered3d_core::inpaint::{
    binarize_mask, inpaint_rgbd, quantile, splice_external, BinaryMask, InpaintParams, InpaintedBackground,
};
use layered3d_core::layering::{
    disocclusion_map, fuse_matte_visibility, occlusion_map, preprocess_disparity, visibility_map, DisocclusionParams,
    MatteInput, SoftMask, VisibilityMap, VisibilityParams,
};
use layered3d_core::metrics::{psnr, ssim};
use layered3d_core::view::{build_layer_meshes, synthesize_view_with, LayerBundle};
use layered3d_core::{DisparityMap, ImageBuffer, Plane};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::export_bundle;
use crate::error::{Error, Result, StageExt};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalInpaint {
    pub rgb: PathBuf,
    pub disparity: PathBuf,
}

/// Camera orbit for rendered frames; see [`circular_path`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraPathConfig {
    pub radius: f64,
    pub depth_offset: f64,
    pub frame_count: usize,
    /// Depth the camera keeps looking at. Defaults to the depth of the
    /// median foreground disparity.
    pub target_depth: Option<f64>,
}

impl Default for CameraPathConfig {
    fn default() -> Self {
        Self {
            radius: 0.02,
            depth_offset: 0.02,
            frame_count: 60,
            target_depth: None,
        }
    }
}

impl CameraPathConfig {
    pub fn poses(&self, bundle: &LayerBundle) -> Result<Vec<CameraPose>> {
        let target = match self.target_depth {
            Some(t) => t,
            None => {
                let d = quantile(bundle.fg_disparity.data(), 0.5) as f64;
                1.0 / d.max(bundle.mapping.d_min)
            }
        };
        Ok(circular_path(self.radius, self.depth_offset, self.frame_count, target)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub image: Option<PathBuf>,
    pub disparity: Option<PathBuf>,
    pub matte: Option<PathBuf>,
    pub external_inpaint: Option<ExternalInpaint>,
    pub normalize_disparity: bool,
    pub preprocess_sigma: f32,
    pub pool_radius: usize,
    pub visibility: VisibilityParams,
    pub disocclusion: DisocclusionParams,
    pub inpaint: InpaintParams,
    pub matte_dilation: usize,
    pub mapping: DepthMapping,
    /// Defaults to [`CameraIntrinsics::default_for`] the image size.
    pub intrinsics: Option<CameraIntrinsics>,
    pub mesh_downsample: usize,
    pub camera_path: CameraPathConfig,
    pub output_dir: PathBuf,
    pub dump_intermediates: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            image: None,
            disparity: None,
            matte: None,
            external_inpaint: None,
            normalize_disparity: false,
            preprocess_sigma: 1.5,
            pool_radius: 2,
            visibility: VisibilityParams::default(),
            disocclusion: DisocclusionParams::default(),
            inpaint: InpaintParams::default(),
            matte_dilation: 5,
            mapping: DepthMapping::default(),
            intrinsics: None,
            mesh_downsample: 1,
            camera_path: CameraPathConfig::default(),
            output_dir: PathBuf::from("out"),
            dump_intermediates: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Parameter checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<()> {
        self.visibility.validate()?;
        self.disocclusion.validate()?;
        self.inpaint.validate()?;
        self.mapping.validate()?;
        if let Some(k) = &self.intrinsics {
            k.validate()?;
        }
        if !(self.preprocess_sigma >= 0.0 && self.preprocess_sigma.is_finite()) {
            return Err(Error::Config("preprocess_sigma must be >= 0".into()));
        }
        if self.mesh_downsample == 0 {
            return Err(Error::Config("mesh_downsample must be >= 1".into()));
        }
        let mut files: Vec<&Path> = Vec::new();
        files.extend(self.image.as_deref());
        files.extend(self.disparity.as_deref());
        files.extend(self.matte.as_deref());
        if let Some(ext) = &self.external_inpaint {
            files.push(&ext.rgb);
            files.push(&ext.disparity);
        }
        for f in files {
            if !f.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", f.display())));
            }
        }
        Ok(())
    }
}

/// Decoded inputs to [`process_inputs`].
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub image: ImageBuffer,
    pub disparity: DisparityMap,
    pub matte: Option<Plane>,
    pub external_inpaint: Option<(ImageBuffer, DisparityMap)>,
}

impl PipelineInputs {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let need = |p: &Option<PathBuf>, name: &str| {
            p.clone()
                .ok_or_else(|| Error::Config(format!("`{name}` input path is required")))
        };
        let image = io::load_image(need(&config.image, "image")?)?;
        let disparity = io::load_disparity(need(&config.disparity, "disparity")?, config.normalize_disparity)?;
        let matte = config.matte.as_ref().map(io::load_plane).transpose()?;
        let external_inpaint = match &config.external_inpaint {
            Some(ext) => Some((
                io::load_image(&ext.rgb)?,
                io::load_disparity(&ext.disparity, config.normalize_disparity)?,
            )),
            None => None,
        };
        Ok(Self {
            image,
            disparity,
            matte,
            external_inpaint,
        })
    }
}

/// Wall-clock milliseconds for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Default, Clone)]
struct Stopwatch(Vec<StageTiming>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(stage, start.elapsed().as_secs_f64() * 1e3);
        out
    }

    fn record(&mut self, stage: &str, ms: f64) {
        self.0.push(StageTiming {
            stage: stage.into(),
            ms,
        });
    }
}

/// Result of [`process`]: the bundle plus the intermediate maps.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub bundle: LayerBundle,
    pub visibility: VisibilityMap,
    pub disocclusion: SoftMask,
    pub occlusion: Option<SoftMask>,
    pub mask: BinaryMask,
    pub background: InpaintedBackground,
    pub timings: Vec<StageTiming>,
}

/// Loads the configured files and runs [`process_inputs`].
pub fn process(config: &PipelineConfig) -> Result<ProcessOutput> {
    config.validate()?;
    let start = Instant::now();
    let inputs = PipelineInputs::load(config).stage("load")?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut out = process_inputs(&inputs, config)?;
    out.timings.insert(
        0,
        StageTiming {
            stage: "load".into(),
            ms: load_ms,
        },
    );
    Ok(out)
}

pub fn process_inputs(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<ProcessOutput> {
    let mut clock = Stopwatch::default();
    let image = inputs.image.to_rgb();
    let dims = inputs.disparity.dims();
    image.ensure_dims(dims).stage("load")?;
    let intrinsics = match config.intrinsics {
        Some(k) if (k.width, k.height) != dims => {
            return Err(Error::Config(format!(
                "intrinsics are {}x{} but the image is {}x{}",
                k.width, k.height, dims.0, dims.1
            )))
        }
        Some(k) => k,
        None => CameraIntrinsics::default_for(dims.0, dims.1),
    };

    let (d, visibility, disocclusion, occlusion, fg_visibility) = clock.time("soft_layering", || -> Result<_> {
        let d =
            preprocess_disparity(&inputs.disparity, config.preprocess_sigma, config.pool_radius).stage("preprocess")?;
        let a = visibility_map(&d, &config.visibility).stage("visibility")?;
        let s = disocclusion_map(&d, &config.disocclusion).stage("disocclusion")?;
        let (s_hat, fused) = match &inputs.matte {
            Some(m) => {
                let s_hat = occlusion_map(&d, &config.disocclusion).stage("occlusion")?;
                let matte = MatteInput::new(m.clone(), config.matte_dilation).stage("matte")?;
                let fused = fuse_matte_visibility(&a, &matte, &s_hat).stage("matte fusion")?;
                (Some(s_hat), fused)
            }
            None => (None, a.clone()),
        };
        Ok((d, a, s, s_hat, fused))
    })?;

    let (mask, background) = clock.time("inpainting", || -> Result<_> {
        let mask = binarize_mask(&disocclusion, config.inpaint.mask_threshold).stage("binarize")?;
        let bg = match &inputs.external_inpaint {
            Some((rgb, disp)) => splice_external(&image, &d, rgb, disp, &mask).stage("external inpaint")?,
            None => inpaint_rgbd(&image, &d, &mask, &config.inpaint).stage("inpaint")?,
        };
        Ok((mask, bg))
    })?;

    let bundle = LayerBundle {
        fg_rgb: image,
        fg_visibility,
        fg_disparity: d,
        bg_rgb: background.rgb.clone(),
        bg_disparity: background.disparity.clone(),
        intrinsics,
        mapping: config.mapping,
    };
    bundle.validate().stage("bundle")?;
    Ok(ProcessOutput {
        bundle,
        visibility,
        disocclusion,
        occlusion,
        mask,
        background,
        timings: clock.0,
    })
}

/// Writes the bundle (and, if configured, intermediate maps) to
/// `config.output_dir`.
pub fn write_process_output(out: &ProcessOutput, config: &PipelineConfig) -> Result<()> {
    let dir = &config.output_dir;
    export_bundle(&out.bundle, dir).stage("export")?;
    if config.dump_intermediates {
        let sub = dir.join("intermediates");
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        io::write_pfm(sub.join("visibility.pfm"), out.visibility.plane())?;
        io::write_pfm(sub.join("disocclusion.pfm"), out.disocclusion.plane())?;
        if let Some(s_hat) = &out.occlusion {
            io::write_pfm(sub.join("occlusion.pfm"), s_hat.plane())?;
        }
        io::save_mask_png(sub.join("mask.png"), &out.mask)?;
        let info = serde_json::json!({
            "mask_pixels": out.mask.count(),
            "background_level": out.background.background_level,
            "converged": out.background.converged,
            "iterations": out.background.iterations,
            "fallback_regions": out.background.fallback_regions,
        });
        let path = sub.join("inpaint.json");
        fs::write(&path, serde_json::to_string_pretty(&info)? + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderReport {
    pub frames: Vec<PathBuf>,
    /// Mesh construction, then summed per-frame rendering and encoding, then
    /// wall time of the whole frame loop.
    pub timings: Vec<StageTiming>,
}

/// Renders one 8-bit PNG per pose into `out_dir`, frames in parallel.
pub fn render_path(
    bundle: &LayerBundle,
    poses: &[CameraPose],
    out_dir: impl AsRef<Path>,
    mesh_downsample: usize,
) -> Result<RenderReport> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut clock = Stopwatch::default();
    let meshes = clock
        .time("mesh", || build_layer_meshes(bundle, mesh_downsample))
        .stage("mesh")?;
    let loop_start = Instant::now();
    let per_frame: Vec<(PathBuf, f64, f64)> = poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let t0 = Instant::now();
            let view = synthesize_view_with(bundle, &meshes, pose).stage("render")?;
            let t1 = Instant::now();
            let path = out_dir.join(frame_name(i));
            io::save_png8(&path, &view.image)?;
            let t2 = Instant::now();
            Ok((path, (t1 - t0).as_secs_f64() * 1e3, (t2 - t1).as_secs_f64() * 1e3))
        })
        .collect::<Result<_>>()?;
    let wall = loop_start.elapsed().as_secs_f64() * 1e3;
    clock.record("rendering", per_frame.iter().map(|f| f.1).sum());
    clock.record("encoding", per_frame.iter().map(|f| f.2).sum());
    clock.record("frames_wall", wall);
    Ok(RenderReport {
        frames: per_frame.into_iter().map(|f| f.0).collect(),
        timings: clock.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub border_crop_fraction: f64,
    pub pairs: Vec<PairMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Always null; reserved for a learned perceptual metric.
    pub lpips: Option<f64>,
    /// PNG names present in only one of the two directories.
    pub unmatched: Vec<String>,
}

fn png_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && name.to_ascii_lowercase().ends_with(".png") {
            names.insert(name);
        }
    }
    Ok(names)
}

/// Scores every PNG in `pred_dir` against the same-named PNG in `gt_dir`.
pub fn metrics_report(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>, border_crop: f64) -> Result<MetricsReport> {
    let (pred_dir, gt_dir) = (pred_dir.as_ref(), gt_dir.as_ref());
    let pred = png_names(pred_dir)?;
    let gt = png_names(gt_dir)?;
    let common: Vec<&String> = pred.intersection(&gt).collect();
    let unmatched: Vec<String> = pred.symmetric_difference(&gt).cloned().collect();
    if common.is_empty() {
        return Err(Error::NoPairs {
            pred: pred_dir.into(),
            gt: gt_dir.into(),
            unmatched,
        });
    }
    let pairs = common
        .par_iter()
        .map(|name| {
            let a = io::load_image(pred_dir.join(name))?.to_rgb();
            let b = io::load_image(gt_dir.join(name))?.to_rgb();
            let wrap = |source| Error::Raster {
                path: pred_dir.join(name),
                source,
            };
            Ok(PairMetrics {
                name: (*name).clone(),
                psnr: psnr(&a, &b, border_crop).map_err(wrap)?,
                ssim: ssim(&a, &b, border_crop).map_err(wrap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = pairs.len() as f64;
    Ok(MetricsReport {
        border_crop_fraction: border_crop,
        mean_psnr: pairs.iter().map(|p| p.psnr).sum::<f64>() / n,
        mean_ssim: pairs.iter().map(|p| p.ssim).sum::<f64>() / n,
        pairs,
        lpips: None,
        unmatched,
    })
}
