use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layered3d::bundle::{export_bundle, load_bundle, Manifest};
use layered3d::dataset::write_mask_dataset;
use layered3d::error::{Error, Result};
use layered3d::io;
use layered3d::layered3d_core::geometry::CameraIntrinsics;
use layered3d::layered3d_core::inpaint::{inpaint_rgbd, InpaintParams, MaskDatasetSpec};
use layered3d::pipeline::{
    metrics_report, process, render_path, write_process_output, CameraPathConfig, ExternalInpaint, PipelineConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "layered3d",
    version,
    about = "Two-layer 3D photos from an image and a disparity map"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Image + disparity (+ matte) to a two-layer bundle.
    Process(Box<ProcessArgs>),
    /// Render a circular camera path from a bundle.
    Render(RenderArgs),
    /// Write an inpainting training-mask dataset.
    Masks(MasksArgs),
    /// Depth-aware inpainting of a masked RGB-D pair.
    Inpaint(InpaintArgs),
    /// PSNR/SSIM between same-named PNGs of two directories, as JSON.
    Metrics(MetricsArgs),
    /// Validate a bundle and write it to a new directory.
    Export(ExportArgs),
    /// Print a bundle's manifest and layer statistics as JSON.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct InpaintFlags {
    #[arg(long)]
    mask_threshold: Option<f32>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    convergence_tol: Option<f64>,
    #[arg(long)]
    depth_guidance_strength: Option<f64>,
    #[arg(long)]
    background_quantile: Option<f64>,
}

impl InpaintFlags {
    fn apply(&self, p: &mut InpaintParams) {
        set(&mut p.mask_threshold, self.mask_threshold);
        set(&mut p.max_iterations, self.max_iterations);
        set(&mut p.convergence_tol, self.convergence_tol);
        set(&mut p.depth_guidance_strength, self.depth_guidance_strength);
        set(&mut p.background_quantile, self.background_quantile);
    }
}

#[derive(Args)]
struct PathFlags {
    /// Orbit radius in scene units.
    #[arg(long)]
    radius: Option<f64>,
    /// Forward/backward bob amplitude in scene units.
    #[arg(long)]
    depth_offset: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    /// Depth to keep centred; defaults to the median foreground depth.
    #[arg(long)]
    target_depth: Option<f64>,
}

impl PathFlags {
    fn apply(&self, p: &mut CameraPathConfig) {
        set(&mut p.radius, self.radius);
        set(&mut p.depth_offset, self.depth_offset);
        set(&mut p.frame_count, self.frames);
        if self.target_depth.is_some() {
            p.target_depth = self.target_depth;
        }
    }
}

#[derive(Args)]
struct ProcessArgs {
    /// JSON pipeline configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    /// PFM or grey PNG.
    #[arg(long)]
    disparity: Option<PathBuf>,
    /// Foreground alpha matte (grey PNG, or alpha of an RGBA PNG).
    #[arg(long)]
    matte: Option<PathBuf>,
    /// Externally inpainted background RGB; requires --external-disparity.
    #[arg(long, requires = "external_disparity")]
    external_rgb: Option<PathBuf>,
    #[arg(long, requires = "external_rgb")]
    external_disparity: Option<PathBuf>,
    /// Min-max normalize the disparity instead of clamping it.
    #[arg(long)]
    normalize_disparity: bool,
    #[arg(long)]
    preprocess_sigma: Option<f32>,
    #[arg(long)]
    pool_radius: Option<usize>,
    #[arg(long)]
    beta: Option<f32>,
    #[arg(long)]
    rho: Option<f32>,
    #[arg(long)]
    gamma: Option<f32>,
    /// Scanline half-extent in pixels.
    #[arg(long)]
    neighborhood: Option<usize>,
    #[arg(long)]
    disocclusion_downsample: Option<usize>,
    #[arg(long)]
    matte_dilation: Option<usize>,
    #[arg(long)]
    d_min: Option<f64>,
    /// Focal length in pixels for both axes.
    #[arg(long)]
    focal: Option<f64>,
    #[arg(long)]
    mesh_downsample: Option<usize>,
    #[command(flatten)]
    inpaint: InpaintFlags,
    #[command(flatten)]
    path: PathFlags,
    /// Bundle output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write visibility, soft masks, the binary mask and solver stats.
    #[arg(long)]
    dump_intermediates: bool,
    /// Also render the camera path into <output>/frames.
    #[arg(long)]
    render: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    path: PathFlags,
    #[arg(long, default_value_t = 1)]
    mesh_downsample: usize,
}

#[derive(Args)]
struct MasksArgs {
    /// JSON mask-generator spec; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source image; repeat together with --disparity for several sources.
    #[arg(long, required = true)]
    image: Vec<PathBuf>,
    #[arg(long, required = true)]
    disparity: Vec<PathBuf>,
    #[arg(long)]
    normalize_disparity: bool,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Probability of an occlusion mask instead of strokes.
    #[arg(long)]
    mix_ratio: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InpaintArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    disparity: PathBuf,
    /// Mask PNG; pixels at or above half scale are filled.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    normalize_disparity: bool,
    #[command(flatten)]
    params: InpaintFlags,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Fraction of width and height ignored on each side.
    #[arg(long, default_value_t = 0.2)]
    border_crop: f64,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    bundle: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn build_config(a: &ProcessArgs) -> Result<PipelineConfig> {
    let mut c = match &a.config {
        Some(p) => PipelineConfig::from_json_file(p)?,
        None => PipelineConfig::default(),
    };
    if a.image.is_some() {
        c.image = a.image.clone();
    }
    if a.disparity.is_some() {
        c.disparity = a.disparity.clone();
    }
    if a.matte.is_some() {
        c.matte = a.matte.clone();
    }
    if let (Some(rgb), Some(disparity)) = (&a.external_rgb, &a.external_disparity) {
        c.external_inpaint = Some(ExternalInpaint {
            rgb: rgb.clone(),
            disparity: disparity.clone(),
        });
    }
    c.normalize_disparity |= a.normalize_disparity;
    c.dump_intermediates |= a.dump_intermediates;
    set(&mut c.preprocess_sigma, a.preprocess_sigma);
    set(&mut c.pool_radius, a.pool_radius);
    set(&mut c.visibility.beta, a.beta);
    set(&mut c.disocclusion.rho, a.rho);
    set(&mut c.disocclusion.gamma, a.gamma);
    set(&mut c.disocclusion.neighborhood, a.neighborhood);
    set(&mut c.disocclusion.downsample_factor, a.disocclusion_downsample);
    set(&mut c.matte_dilation, a.matte_dilation);
    set(&mut c.mapping.d_min, a.d_min);
    set(&mut c.mesh_downsample, a.mesh_downsample);
    set(&mut c.output_dir, a.output.clone());
    a.inpaint.apply(&mut c.inpaint);
    a.path.apply(&mut c.camera_path);
    if let Some(f) = a.focal {
        let (w, h) = match (&c.intrinsics, &c.image) {
            (Some(k), _) => (k.width, k.height),
            (None, Some(img)) => {
                let img = io::load_image(img)?;
                (img.width(), img.height())
            }
            (None, None) => return Err(Error::Config("--focal needs an image".into())),
        };
        let base = c.intrinsics.unwrap_or_else(|| CameraIntrinsics::default_for(w, h));
        c.intrinsics = Some(CameraIntrinsics { fx: f, fy: f, ..base });
    }
    Ok(c)
}

fn cmd_process(a: ProcessArgs) -> Result<()> {
    let config = build_config(&a)?;
    let out = process(&config)?;
    write_process_output(&out, &config)?;
    let mut timings = out.timings.clone();
    if a.render {
        let poses = config.camera_path.poses(&out.bundle)?;
        let report = render_path(
            &out.bundle,
            &poses,
            config.output_dir.join("frames"),
            config.mesh_downsample,
        )?;
        timings.extend(report.timings);
    }
    write_json(&config.output_dir.join("timing.json"), &timings)?;
    let bg = &out.background;
    eprintln!(
        "bundle written to {} (mask {} px, {} sweeps{})",
        config.output_dir.display(),
        out.mask.count(),
        bg.iterations,
        if bg.converged { "" } else { ", NOT converged" }
    );
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let mut path = CameraPathConfig::default();
    a.path.apply(&mut path);
    let poses = path.poses(&bundle)?;
    let report = render_path(&bundle, &poses, &a.output, a.mesh_downsample)?;
    write_json(&a.output.join("timing.json"), &report.timings)?;
    eprintln!("{} frames written to {}", report.frames.len(), a.output.display());
    Ok(())
}

fn cmd_masks(a: MasksArgs) -> Result<()> {
    if a.image.len() != a.disparity.len() {
        return Err(Error::Config(
            "--image and --disparity must be given the same number of times".into(),
        ));
    }
    let mut spec = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => MaskDatasetSpec::default(),
    };
    set(&mut spec.seed, a.seed);
    set(&mut spec.mix_ratio, a.mix_ratio);
    let sources = a
        .image
        .iter()
        .zip(&a.disparity)
        .map(|(i, d)| {
            Ok((
                io::load_image(i)?.to_rgb(),
                io::load_disparity(d, a.normalize_disparity)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let records = write_mask_dataset(&sources, a.count, &spec, &a.output)?;
    eprintln!("{} samples written to {}", records.len(), a.output.display());
    Ok(())
}

fn cmd_inpaint(a: InpaintArgs) -> Result<()> {
    let rgb = io::load_image(&a.image)?.to_rgb();
    let d = io::load_disparity(&a.disparity, a.normalize_disparity)?;
    let mask = io::load_mask_png(&a.mask)?;
    let mut params = InpaintParams::default();
    a.params.apply(&mut params);
    let bg = inpaint_rgbd(&rgb, &d, &mask, &params)?;
    fs::create_dir_all(&a.output).map_err(|e| Error::Io {
        path: a.output.clone(),
        source: e,
    })?;
    io::save_png16(a.output.join("bg_rgb.png"), &bg.rgb)?;
    io::write_pfm(a.output.join("bg_disp.pfm"), bg.disparity.plane())?;
    let info = serde_json::json!({
        "mask_pixels": mask.count(),
        "background_level": bg.background_level,
        "converged": bg.converged,
        "iterations": bg.iterations,
        "fallback_regions": bg.fallback_regions,
    });
    write_json(&a.output.join("inpaint.json"), &info)?;
    if !bg.converged {
        eprintln!("warning: solver stopped at max_iterations before reaching convergence_tol");
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let report = metrics_report(&a.pred, &a.gt, a.border_crop)?;
    if !report.unmatched.is_empty() {
        eprintln!("warning: unmatched files: {}", report.unmatched.join(", "));
    }
    match &a.output {
        Some(p) => write_json(p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    export_bundle(&bundle, &a.output)?;
    eprintln!("bundle written to {}", a.output.display());
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let manifest = Manifest::read(&a.bundle)?;
    let bundle = load_bundle(&a.bundle)?;
    let range = |v: &[f32]| {
        let (lo, hi, sum) = v
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY, 0.0f64), |(lo, hi, s), &x| {
                (lo.min(x), hi.max(x), s + x as f64)
            });
        serde_json::json!({"min": lo, "max": hi, "mean": sum / v.len().max(1) as f64})
    };
    let report = serde_json::json!({
        "manifest": manifest,
        "stats": {
            "fg_alpha": range(bundle.fg_visibility.data()),
            "fg_disparity": range(bundle.fg_disparity.data()),
            "bg_disparity": range(bundle.bg_disparity.data()),
        }
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Process(a) => cmd_process(*a),
        Command::Render(a) => cmd_render(a),
        Command::Masks(a) => cmd_masks(a),
        Command::Inpaint(a) => cmd_inpaint(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Export(a) => cmd_export(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
