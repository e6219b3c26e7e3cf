use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use constancy::dataset::{load_manifest, save_png, MANIFEST_FILE};
use constancy::estimators::FEATURE_DIM;
use constancy::{
    init_model, load_image, von_kries_cast, BitDepth, Gamma, Illuminant, LinearImage, PixelRgb,
};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_constancy"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn synth(dir: &Path, n: usize, extra: &[&str]) {
    let n = n.to_string();
    let mut args = vec!["synth", "--n", &n, "--side", "24", "--out", "data"];
    args.extend_from_slice(extra);
    stdout(&run(dir, &args));
}

fn gray_png(dir: &Path, name: &str) {
    let img = LinearImage::from_fn(16, 16, |x, y| PixelRgb::splat(0.2 + 0.02 * ((x * y) % 9) as f64)).unwrap();
    save_png(&img, &dir.join(name), BitDepth::Sixteen, Gamma::Linear).unwrap();
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gray_png(d, "g.png");
    assert_eq!(code(&run(d, &[])), 2);
    assert_eq!(code(&run(d, &["estimate"])), 2);
    assert_eq!(code(&run(d, &["estimate", "g.png", "--bogus"])), 2);
    assert_eq!(code(&run(d, &["estimate", "g.png", "--estimator", "learned"])), 2);
    assert_eq!(code(&run(d, &["correct", "g.png", "--out", "o.png"])), 2);
    assert_eq!(code(&run(d, &["synth", "--n", "0", "--out", "x"])), 2);
    assert_eq!(code(&run(d, &["gradcheck", "--h", "0"])), 2);
    assert_eq!(code(&run(d, &["gradcheck", "--loss", "l9"])), 2);
    assert_eq!(code(&run(d, &["estimate", "missing.png"])), 1);
    assert_eq!(code(&run(d, &["estimate", "g.png", "--mask", "10,10,20,20"])), 1);
    assert_eq!(code(&run(d, &["correct", "g.png", "--illuminant", "0,1,1", "--out", "o.png"])), 1);
    assert_eq!(code(&run(d, &["estimate", "g.png", "--estimator", "learned:nope.txt"])), 1);
    assert_eq!(code(&run(d, &["estimate", "g.png"])), 0);
}

#[test]
fn gray_image_estimates_neutral_light() {
    let dir = tempfile::tempdir().unwrap();
    gray_png(dir.path(), "g.png");
    for est in ["gray-world", "white-patch", "shades-of-gray:p=4", "gray-edge"] {
        let out = stdout(&run(dir.path(), &["estimate", "g.png", "--estimator", est]));
        assert_eq!(out, "1.000000 1.000000 1.000000\n", "{est}");
    }
    let out = stdout(&run(dir.path(), &["estimate", "g.png", "--truth", "2,2,2"]));
    assert_eq!(out, "1.000000 1.000000 1.000000 0.000000\n");
}

#[test]
fn neutral_correction_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gray_png(d, "g.png");
    let out = stdout(&run(d, &["correct", "g.png", "--illuminant", "1,1,1", "--out", "o.png"]));
    assert_eq!(out, "1.000000 1.000000 1.000000\n");
    assert_eq!(fs::read(d.join("g.png")).unwrap(), fs::read(d.join("o.png")).unwrap());
}

#[test]
fn correct_then_cast_is_within_one_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let e = Illuminant::new(1.3, 1.0, 0.7).unwrap().normalized();
    let floor = e.as_array().into_iter().fold(f64::INFINITY, f64::min);
    let img = LinearImage::from_fn(12, 10, |x, y| {
        PixelRgb::new((0.05 * x as f64).min(floor), (0.07 * y as f64).min(floor), 0.3f64.min(floor))
    })
    .unwrap();
    save_png(&img, &d.join("in.png"), BitDepth::Sixteen, Gamma::Linear).unwrap();
    let [r, g, b] = e.as_array();
    let illum = format!("{r},{g},{b}");
    stdout(&run(d, &["correct", "in.png", "--illuminant", &illum, "--out", "out.png"]));
    let original = load_image(&d.join("in.png"), Gamma::Linear).unwrap();
    let recast = von_kries_cast(&load_image(&d.join("out.png"), Gamma::Linear).unwrap(), &e).unwrap();
    let max = BitDepth::Sixteen.max_code();
    for (a, b) in original.pixels().iter().zip(recast.pixels()) {
        for c in 0..3 {
            assert!((a.channel(c) - b.channel(c)).abs() * max <= 1.0);
        }
    }
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 6, &[]);
    let out = stdout(&run(
        d,
        &["train", "--manifest", "data/manifest.csv", "--epochs", "0", "--batch", "4", "--hidden", "5", "--seed", "9", "--side", "native", "--out", "m.txt"],
    ));
    assert!(out.starts_with("best_epoch none\n"), "{out}");
    let saved = fs::read_to_string(d.join("m.txt")).unwrap();
    assert_eq!(saved, init_model(FEATURE_DIM, 5, 9).unwrap().to_text());
    assert!(d.join("m.txt.report.csv").exists());
}

#[test]
fn evaluate_reports_seven_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 12, &["--seed", "5"]);
    let out = stdout(&run(d, &["evaluate", "--manifest", "data/manifest.csv", "--folds", "3", "--errors", "e.csv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3, "{out}");
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8, "{row}");
        let mean: f64 = fields[1].parse().unwrap();
        assert!(mean <= 0.10, "{row}");
    }
    assert!(lines[1].starts_with("gray-world pooled,"));
    assert!(lines[2].starts_with("gray-world fold-avg,"));
    let errors = fs::read_to_string(d.join("e.csv")).unwrap();
    assert_eq!(errors.lines().count(), 13);

    let md = stdout(&run(d, &["evaluate", "--manifest", "data/manifest.csv", "--format", "markdown"]));
    assert!(md.lines().next().unwrap().starts_with('|'));
    assert_eq!(code(&run(d, &["evaluate", "--manifest", "data/manifest.csv", "--folds", "13"])), 1);
}

#[test]
fn gradcheck_mse_is_tight() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&run(dir.path(), &["gradcheck", "--loss", "mse", "--trials", "500"]));
    let worst: f64 = out.split_whitespace().last().unwrap().parse().unwrap();
    assert!(out.starts_with("loss mse trials 500 "), "{out}");
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn synth_is_seeded_and_zero_spread_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    synth(&a, 4, &["--seed", "8", "--spread", "0"]);
    synth(&b, 4, &["--seed", "8", "--spread", "0"]);
    let ma = fs::read(a.join("data").join(MANIFEST_FILE)).unwrap();
    assert_eq!(ma, fs::read(b.join("data").join(MANIFEST_FILE)).unwrap());
    for e in load_manifest(&a.join("data").join(MANIFEST_FILE)).unwrap().entries {
        for v in e.illuminant.as_array() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
