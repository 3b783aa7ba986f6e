mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use layered3d::bundle::load_bundle;
use layered3d::io;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_layered3d"))
        .args(args)
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scene = synthetic_photo(64, 48, &mut rng);
    io::save_png8(t.join("img.png"), &scene.image).unwrap();
    io::write_pfm(t.join("d.pfm"), scene.disparity.plane()).unwrap();
    fs::write(
        t.join("config.json"),
        format!(
            r#"{{"image": "{}", "disparity": "{}", "visibility": {{"beta": 50}}, "camera_path": {{"frame_count": 3}}, "output_dir": "{}"}}"#,
            s(&t.join("img.png")),
            s(&t.join("d.pfm")),
            s(&t.join("ignored"))
        ),
    )
    .unwrap();

    let bundle_dir = t.join("bundle");
    ok(&[
        "process",
        "--config",
        s(&t.join("config.json")),
        "--output",
        s(&bundle_dir),
        "--frames",
        "2",
        "--render",
        "--dump-intermediates",
    ]);
    assert!(!t.join("ignored").exists(), "flag should override output_dir");
    for f in [
        "manifest.json",
        "fg_rgb.png",
        "fg_alpha.png",
        "fg_disp.pfm",
        "bg_rgb.png",
        "bg_disp.pfm",
        "timing.json",
    ] {
        assert!(bundle_dir.join(f).is_file(), "{f} missing");
    }
    assert!(bundle_dir.join("intermediates/mask.png").is_file());
    assert_eq!(fs::read_dir(bundle_dir.join("frames")).unwrap().count(), 2);
    let timing = fs::read_to_string(bundle_dir.join("timing.json")).unwrap();
    for stage in ["load", "soft_layering", "inpainting", "rendering"] {
        assert!(timing.contains(stage), "{stage} missing from timing report");
    }
    load_bundle(&bundle_dir).unwrap();

    let frames = t.join("frames");
    ok(&[
        "render",
        "--bundle",
        s(&bundle_dir),
        "-o",
        s(&frames),
        "--frames",
        "4",
        "--radius",
        "0.01",
    ]);
    assert_eq!(
        fs::read_dir(&frames)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "png")
            .count(),
        4
    );

    let inspect: serde_json::Value = serde_json::from_str(&ok(&["inspect", s(&bundle_dir)])).unwrap();
    assert_eq!(inspect["manifest"]["version"], 1);
    assert_eq!(inspect["manifest"]["intrinsics"]["width"], 64);

    let copy = t.join("copy");
    ok(&["export", "--bundle", s(&bundle_dir), "-o", s(&copy)]);
    assert_eq!(
        fs::read(copy.join("fg_disp.pfm")).unwrap(),
        fs::read(bundle_dir.join("fg_disp.pfm")).unwrap()
    );

    let report: serde_json::Value =
        serde_json::from_str(&ok(&["metrics", "--pred", s(&frames), "--gt", s(&frames)])).unwrap();
    assert_eq!(report["mean_psnr"], 99.0);
    assert_eq!(report["pairs"].as_array().unwrap().len(), 4);
    assert!(report["lpips"].is_null());

    let masks = t.join("masks");
    ok(&[
        "masks",
        "--image",
        s(&t.join("img.png")),
        "--disparity",
        s(&t.join("d.pfm")),
        "--count",
        "3",
        "--seed",
        "9",
        "-o",
        s(&masks),
    ]);
    assert_eq!(
        fs::read_to_string(masks.join("masks.jsonl")).unwrap().lines().count(),
        3
    );

    let inpainted = t.join("inpainted");
    ok(&[
        "inpaint",
        "--image",
        s(&t.join("img.png")),
        "--disparity",
        s(&t.join("d.pfm")),
        "--mask",
        s(&masks.join("00000_mask.png")),
        "-o",
        s(&inpainted),
    ]);
    assert!(inpainted.join("bg_rgb.png").is_file() && inpainted.join("inpaint.json").is_file());
}

#[test]
fn errors_are_reported_with_context() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.png");
    let out = run(&[
        "process",
        "--image",
        s(&missing),
        "--disparity",
        s(&missing),
        "-o",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.png"));

    fs::write(tmp.path().join("manifest.json"), r#"{"version": 3}"#).unwrap();
    let out = run(&["inspect", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 3"));

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = run(&["metrics", "--pred", s(&empty), "--gt", s(&empty)]);
    assert!(!out.status.success());
}
