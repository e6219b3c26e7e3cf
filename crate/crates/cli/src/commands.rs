use std::fs;
use std::path::{Path, PathBuf};

use constancy::dataset::{load_image_with_depth, save_png};
use constancy::evaluation::render_sample_errors;
use constancy::image::CropGeometry;
use constancy::loss::{angular_error_deg, gradient_check};
use constancy::training::Sample;
use constancy::{
    build_feature_dataset, cross_validate, estimate as estimate_with, generate_synthetic,
    load_image, load_manifest, predict, render_report, train as fit_head, von_kries_correct,
    AugmentParams, Error, EstimatorSpec, FeatureOptions, Illuminant, LinearImage, MaskRect,
    MlpModel, SyntheticConfig, TrainConfig,
};

use crate::args::EstimatorArg;
use crate::{
    CorrectArgs, EstimateArgs, EvaluateArgs, Failure, GradcheckArgs, HeadArgs, ImageArgs,
    SynthArgs, TrainArgs,
};

type Outcome = Result<(), Failure>;

/// Gradient deviations at or above this value fail `gradcheck`.
const GRADCHECK_TOLERANCE: f64 = 1e-5;

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|source| {
        Failure::Domain(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn fmt_vec(v: &[f64; 3]) -> String {
    format!("{:.6} {:.6} {:.6}", v[0], v[1], v[2])
}

fn learned_path(arg: &Option<PathBuf>) -> Result<&Path, Failure> {
    arg.as_deref().ok_or_else(|| {
        Failure::Usage("this subcommand needs a trained model: --estimator learned:<path>".into())
    })
}

/// Learned models see the same centered crop as during training.
fn estimate_image(
    arg: &EstimatorArg,
    img: &LinearImage,
    mask: Option<&MaskRect>,
    side: Option<usize>,
) -> Result<Illuminant, Failure> {
    match arg {
        EstimatorArg::Fixed(spec) => Ok(estimate_with(spec, img, mask)?),
        EstimatorArg::Learned(path) => {
            let model = MlpModel::load(learned_path(path)?)?;
            if let Some(m) = mask {
                m.check_inside(img)?;
            }
            let geometry = CropGeometry::centered(img);
            let side = side.unwrap_or(geometry.size);
            let crop = geometry.apply(img, side)?;
            let mask = mask.and_then(|m| geometry.map_mask(m, side));
            Ok(estimate_with(&EstimatorSpec::Learned(Box::new(model)), &crop, mask.as_ref())?)
        }
    }
}

fn load_input(a: &ImageArgs) -> Result<LinearImage, Failure> {
    Ok(load_image(&a.image, a.gamma)?)
}

pub fn estimate(a: EstimateArgs) -> Outcome {
    let img = load_input(&a.image)?;
    let e = estimate_image(&a.estimator, &img, a.image.mask.as_ref(), a.image.side.0)?.as_array();
    let mut line = fmt_vec(&e);
    if let Some(truth) = a.truth {
        let err = angular_error_deg(&e, &Illuminant::from_array(truth)?.as_array())?;
        line.push_str(&format!(" {err:.6}"));
    }
    println!("{line}");
    Ok(())
}

pub fn correct(a: CorrectArgs) -> Outcome {
    let (img, depth) = load_image_with_depth(&a.image.image, a.image.gamma)?;
    let e = match (&a.illuminant, &a.estimator) {
        (Some(rgb), _) => Illuminant::from_array(*rgb)?.normalized(),
        (None, Some(est)) => estimate_image(est, &img, a.image.mask.as_ref(), a.image.side.0)?,
        (None, None) => unreachable!("clap requires one illuminant source"),
    };
    let out = von_kries_correct(&img, &e)?;
    save_png(&out, &a.out, depth, a.image.gamma)?;
    println!("{}", fmt_vec(&e.as_array()));
    Ok(())
}

fn augment_params(h: &HeadArgs) -> Option<AugmentParams> {
    h.augment.then_some(AugmentParams {
        max_shift: h.max_shift,
        hflip_prob: h.flip_prob,
    })
}

fn feature_options(h: &HeadArgs, seed: u64, augment: Option<AugmentParams>) -> FeatureOptions {
    FeatureOptions {
        side: h.side.0,
        augment,
        gamma: h.gamma,
        seed,
    }
}

fn train_config(h: &HeadArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        loss: h.loss,
        learning_rate: h.lr,
        epochs: h.epochs,
        batch_size: h.batch,
        hidden_dim: h.hidden,
        seed,
        augment: augment_params(h),
        validation_fraction: h.val_fraction,
    }
}

pub fn train(a: TrainArgs) -> Outcome {
    let manifest = load_manifest(&a.manifest)?;
    let config = train_config(&a.head, a.seed);
    let data = build_feature_dataset(&manifest, &feature_options(&a.head, a.seed, config.augment))?;
    let (model, report) = fit_head(&data, &config)?;
    model.save(&a.out)?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.csv");
        PathBuf::from(p)
    });
    write_file(&report_path, &report.to_csv())?;
    let best = report
        .best_epoch
        .map_or_else(|| "none".to_string(), |e| (e + 1).to_string());
    println!("best_epoch {best}");
    println!("val_error_deg {:.6}", report.best_val_error_deg);
    println!("checksum {}", report.checksum);
    Ok(())
}

fn feature_rows(samples: &[Sample], idx: &[usize]) -> Vec<Sample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

pub fn evaluate(a: EvaluateArgs) -> Outcome {
    let manifest = load_manifest(&a.manifest)?;
    let truths = manifest.truths();
    let label = |suffix: &str| format!("{} {suffix}", a.estimator);

    let result = match &a.estimator {
        EstimatorArg::Fixed(spec) => cross_validate(&truths, a.folds, a.seed, |_, _| {
            let manifest = &manifest;
            let gamma = a.head.gamma;
            Ok(move |i: usize| {
                let img = load_image(&manifest.image_path(i), gamma)?;
                Ok(estimate_with(spec, &img, manifest.entries[i].mask.as_ref())?.as_array())
            })
        }),
        EstimatorArg::Learned(Some(path)) => {
            let model = MlpModel::load(path)?;
            let plain = build_feature_dataset(&manifest, &feature_options(&a.head, a.seed, None))?;
            cross_validate(&truths, a.folds, a.seed, |_, _| {
                let (model, plain) = (&model, &plain);
                Ok(move |i: usize| predict(model, &plain[i].0))
            })
        }
        EstimatorArg::Learned(None) => {
            let plain = build_feature_dataset(&manifest, &feature_options(&a.head, a.seed, None))?;
            let augmented = match augment_params(&a.head) {
                Some(p) => Some(build_feature_dataset(
                    &manifest,
                    &feature_options(&a.head, a.seed, Some(p)),
                )?),
                None => None,
            };
            cross_validate(&truths, a.folds, a.seed, |fold, train_idx| {
                let source = augmented.as_ref().unwrap_or(&plain);
                let config = train_config(&a.head, a.seed.wrapping_add(fold as u64));
                let (model, _) = fit_head(&feature_rows(source, train_idx), &config)?;
                let plain = &plain;
                Ok(move |i: usize| predict(&model, &plain[i].0))
            })
        }
    }?;

    let rows = vec![
        (label("pooled"), result.pooled),
        (label("fold-avg"), result.fold_averaged),
    ];
    let table = render_report(&rows, a.format)?;
    print!("{table}");
    if let Some(out) = &a.out {
        write_file(out, &table)?;
    }
    if let Some(errors) = &a.errors {
        write_file(errors, &render_sample_errors(&result.per_sample_errors))?;
    }
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Outcome {
    let worst = gradient_check(a.loss, a.trials, a.seed, a.h)?;
    println!(
        "loss {} trials {} max_relative_deviation {worst:.3e}",
        a.loss, a.trials
    );
    if worst < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Rejected(format!(
            "gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
        )))
    }
}

pub fn synth(a: SynthArgs) -> Outcome {
    let config = SyntheticConfig {
        n_scenes: a.n,
        side: a.side,
        illuminant_spread: a.spread,
        scene_kind: a.kind,
        seed: a.seed,
    };
    fs::create_dir_all(&a.out).map_err(|source| {
        Failure::Domain(Error::Io {
            path: a.out.clone(),
            source,
        })
    })?;
    let manifest = generate_synthetic(&config, &a.out)?;
    println!(
        "wrote {} scenes to {}",
        manifest.len(),
        a.out.join(constancy::dataset::MANIFEST_FILE).display()
    );
    Ok(())
}
