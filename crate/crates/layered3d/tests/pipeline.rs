mod common;

use std::fs;

use common::*;
use layered3d::dataset::{write_mask_dataset, MaskRecord, INDEX_FILE};
use layered3d::io;
use layered3d::layered3d_core::inpaint::{MaskDatasetSpec, MaskKind};
use layered3d::layered3d_core::layering::VisibilityMap;
use layered3d::layered3d_core::metrics::psnr;
use layered3d::layered3d_core::{DisparityMap, ImageBuffer, Plane};
use layered3d::pipeline::{
    frame_name, process, process_inputs, render_path, ExternalInpaint, PipelineConfig, PipelineInputs,
};
use layered3d::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inputs(image: ImageBuffer, disparity: DisparityMap) -> PipelineInputs {
    PipelineInputs {
        image,
        disparity,
        matte: None,
        external_inpaint: None,
    }
}

#[test]
fn constant_disparity_is_a_single_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let image = smooth_texture(40, 30, &mut rng);
    let out = process_inputs(
        &inputs(image.clone(), DisparityMap::constant(40, 30, 0.4)),
        &PipelineConfig::default(),
    )
    .unwrap();
    assert!(out.bundle.fg_visibility.data().iter().all(|&a| a == 1.0));
    assert!(out.mask.is_empty());
    assert_eq!(out.bundle.bg_rgb, image);
    assert_eq!(out.bundle.bg_disparity, out.bundle.fg_disparity);
    assert_eq!(out.background.background_level, None);
}

#[test]
fn half_plane_background_takes_background_level() {
    let (w, h) = (96, 40);
    let d = DisparityMap::new(Plane::from_fn(w, h, |x, _| if x < 48 { 0.8 } else { 0.2 })).unwrap();
    let image = ImageBuffer::from_fn(
        w,
        h,
        3,
        |x, y, c| if x < 48 { 0.9 } else { 0.1 + 0.005 * (y + c) as f32 },
    )
    .unwrap();
    let config = PipelineConfig {
        preprocess_sigma: 0.0,
        pool_radius: 0,
        ..PipelineConfig::default()
    };
    let out = process_inputs(&inputs(image, d.clone()), &config).unwrap();
    assert!(out.mask.count() > 0);
    assert_eq!(out.background.background_level, Some(0.2));
    for i in 0..w * h {
        if out.mask.data()[i] != 0 {
            assert!((out.bundle.bg_disparity.data()[i] - 0.2).abs() <= 1e-3);
            assert!(
                out.bundle.bg_rgb.data()[i * 3] < 0.5,
                "foreground colour leaked into the background"
            );
        } else {
            assert_eq!(out.bundle.bg_disparity.data()[i], d.data()[i]);
        }
    }
}

#[test]
fn matte_only_lowers_visibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scene = synthetic_photo(64, 48, &mut rng);
    let matte = Plane::from_fn(64, 48, |x, y| if scene.disparity.get(x, y) > 0.4 { 1.0 } else { 0.0 });
    let mut with = inputs(scene.image.clone(), scene.disparity.clone());
    with.matte = Some(matte);
    let config = PipelineConfig::default();
    let plain = process_inputs(&inputs(scene.image, scene.disparity), &config).unwrap();
    let fused = process_inputs(&with, &config).unwrap();
    assert!(fused.occlusion.is_some());
    assert_eq!(fused.visibility, plain.visibility);
    let (mut lower, mut higher) = (0, 0);
    for (f, a) in fused
        .bundle
        .fg_visibility
        .data()
        .iter()
        .zip(plain.bundle.fg_visibility.data())
    {
        lower += (f < a) as usize;
        higher += (f > a) as usize;
    }
    assert_eq!(higher, 0);
    assert!(lower > 0);
}

#[test]
fn external_inpaint_is_spliced_inside_the_mask_only() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, h) = (60, 40);
    let d = DisparityMap::new(Plane::from_fn(w, h, |x, _| if x < 30 { 0.9 } else { 0.1 })).unwrap();
    let image = ImageBuffer::new(w, h, 3, 0.5).unwrap();
    let paths = ["img.png", "d.pfm", "ext.png", "ext.pfm"].map(|n| tmp.path().join(n));
    io::save_png16(&paths[0], &image).unwrap();
    io::write_pfm(&paths[1], d.plane()).unwrap();
    io::save_png16(&paths[2], &ImageBuffer::new(w, h, 3, 0.25).unwrap()).unwrap();
    io::write_pfm(&paths[3], &Plane::new(w, h, 0.05)).unwrap();
    let mut config = PipelineConfig {
        image: Some(paths[0].clone()),
        disparity: Some(paths[1].clone()),
        external_inpaint: Some(ExternalInpaint {
            rgb: paths[2].clone(),
            disparity: paths[3].clone(),
        }),
        ..PipelineConfig::default()
    };
    let out = process(&config).unwrap();
    assert!(out.mask.count() > 0);
    let (orig_c, ext_c) = (
        io::load_image(&paths[0]).unwrap().data()[0],
        io::load_image(&paths[2]).unwrap().data()[0],
    );
    for i in 0..w * h {
        let (bg_d, bg_c) = (out.bundle.bg_disparity.data()[i], out.bundle.bg_rgb.data()[i * 3]);
        if out.mask.data()[i] != 0 {
            assert_eq!((bg_d, bg_c), (0.05, ext_c));
        } else {
            assert_eq!((bg_d, bg_c), (out.bundle.fg_disparity.data()[i], orig_c));
        }
    }

    io::write_pfm(&paths[3], &Plane::new(w + 1, h, 0.05)).unwrap();
    let err = process(&config).unwrap_err();
    assert!(
        matches!(
            err,
            Error::Stage {
                stage: "inpainting",
                ..
            } | Error::Stage {
                stage: "external inpaint",
                ..
            }
        ),
        "{err}"
    );

    config.external_inpaint = None;
    config.disparity = Some(tmp.path().join("missing.pfm"));
    assert!(matches!(process(&config), Err(Error::Config(_))));
}

#[test]
fn mismatched_inputs_name_their_stage() {
    let err = process_inputs(
        &inputs(
            ImageBuffer::new(10, 10, 3, 0.0).unwrap(),
            DisparityMap::constant(11, 10, 0.5),
        ),
        &PipelineConfig::default(),
    )
    .unwrap_err();
    assert!(err.to_string().starts_with("load:"), "{err}");
}

#[test]
fn render_path_writes_one_frame_per_pose() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = synthetic_photo(48, 36, &mut rng);
    let mut config = PipelineConfig::default();
    config.camera_path.frame_count = 5;
    let out = process_inputs(&inputs(scene.image.clone(), scene.disparity), &config).unwrap();
    let poses = config.camera_path.poses(&out.bundle).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let report = render_path(&out.bundle, &poses, tmp.path(), 1).unwrap();
    let mut names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, (0..5).map(frame_name).collect::<Vec<_>>());
    assert_eq!(report.frames.len(), 5);
    let stages: Vec<&str> = report.timings.iter().map(|t| t.stage.as_str()).collect();
    assert_eq!(stages, ["mesh", "rendering", "encoding", "frames_wall"]);

    // Frame 0 of the default orbit is the input view.
    let mut full = out.bundle.clone();
    full.fg_visibility = VisibilityMap::constant(48, 36, 1.0);
    render_path(&full, &poses[..1], tmp.path(), 1).unwrap();
    let frame = io::load_image(tmp.path().join(frame_name(0))).unwrap();
    assert!(psnr(&frame, &scene.image, 0.05).unwrap() >= 40.0);
}

#[test]
fn mask_dataset_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let half = DisparityMap::new(Plane::from_fn(64, 32, |x, _| if x < 32 { 0.8 } else { 0.2 })).unwrap();
    let flat = DisparityMap::constant(64, 32, 0.5);
    let image = ImageBuffer::new(64, 32, 3, 0.3).unwrap();
    let spec = MaskDatasetSpec {
        mix_ratio: 1.0,
        seed: 100,
        ..MaskDatasetSpec::default()
    };
    let records = write_mask_dataset(&[(image.clone(), half), (image, flat)], 4, &spec, tmp.path()).unwrap();
    let kinds: Vec<MaskKind> = records.iter().map(|r| r.mask_kind).collect();
    assert_eq!(
        kinds,
        [
            MaskKind::Occlusion,
            MaskKind::StrokeFallback,
            MaskKind::Occlusion,
            MaskKind::StrokeFallback
        ]
    );
    let lines: Vec<MaskRecord> = fs::read_to_string(tmp.path().join(INDEX_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines, records);
    assert_eq!(lines[2].seed, 102);
    assert!(fs::read_to_string(tmp.path().join(INDEX_FILE))
        .unwrap()
        .contains("\"mask_kind\":\"stroke_fallback\""));
    for r in &records {
        for suffix in ["image.png", "disp.pfm", "mask.png"] {
            assert!(tmp.path().join(format!("{}_{suffix}", r.id)).is_file());
        }
    }
    let m = io::load_mask_png(tmp.path().join("00000_mask.png")).unwrap();
    assert!(m.count() > 0);
}
