use constancy::{
    angular_error, estimate, extract_features, von_kries_cast, DerivativeOrder, Error,
    EstimatorSpec, Illuminant, LinearImage, MaskRect, MinkowskiNorm, PixelRgb,
};
use proptest::prelude::*;

fn positive_image(w: usize, h: usize) -> impl Strategy<Value = LinearImage> {
    prop::collection::vec(prop::array::uniform3(0.01f64..1.0), w * h).prop_map(move |px| {
        LinearImage::new(w, h, px.into_iter().map(PixelRgb::from_array).collect()).unwrap()
    })
}

fn all_specs() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::GrayWorld,
        EstimatorSpec::WhitePatch,
        EstimatorSpec::ShadesOfGray(MinkowskiNorm::P(6.0)),
        EstimatorSpec::ShadesOfGray(MinkowskiNorm::P(40.0)),
        EstimatorSpec::GrayEdge {
            order: DerivativeOrder::One,
            norm: MinkowskiNorm::P(1.0),
            sigma: 1.0,
        },
        EstimatorSpec::GrayEdge {
            order: DerivativeOrder::Zero,
            norm: MinkowskiNorm::P(2.0),
            sigma: 0.0,
        },
    ]
}

fn close(a: &Illuminant, b: &Illuminant, tol: f64) -> bool {
    angular_error(&a.as_array(), &b.as_array()).unwrap().radians() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimates_ignore_exposure(img in positive_image(13, 11), s in 0.01f64..100.0) {
        let scaled = img.scaled(s).unwrap();
        for spec in all_specs() {
            let a = estimate(&spec, &img, None).unwrap();
            let b = estimate(&spec, &scaled, None).unwrap();
            prop_assert!(a.is_normalized());
            prop_assert!(close(&a, &b, 1e-9), "{spec:?}");
        }
    }

    #[test]
    fn sog_endpoints_are_gray_world_and_white_patch(img in positive_image(6, 5)) {
        prop_assert_eq!(
            estimate(&EstimatorSpec::ShadesOfGray(MinkowskiNorm::P(1.0)), &img, None).unwrap(),
            estimate(&EstimatorSpec::GrayWorld, &img, None).unwrap()
        );
        prop_assert_eq!(
            estimate(&EstimatorSpec::ShadesOfGray(MinkowskiNorm::Max), &img, None).unwrap(),
            estimate(&EstimatorSpec::WhitePatch, &img, None).unwrap()
        );
    }

    #[test]
    fn features_are_exposure_and_mirror_invariant(img in positive_image(14, 12), s in 0.05f64..20.0) {
        let f = extract_features(&img, None).unwrap();
        let fs = extract_features(&img.scaled(s).unwrap(), None).unwrap();
        let fm = extract_features(&img.mirror_horizontal(), None).unwrap();
        for ((a, b), c) in f.0.iter().zip(&fs.0).zip(&fm.0) {
            prop_assert!((a - b).abs() <= 1e-9);
            prop_assert!((a - c).abs() <= 1e-9);
        }
    }
}

/// An achromatic scene cast by `e` yields `e` under every estimator.
#[test]
fn neutral_scenes_recover_the_cast() {
    let scene = LinearImage::from_fn(12, 12, |x, y| {
        let v = 0.2 + 0.05 * ((x * 7 + y * 3) % 11) as f64;
        PixelRgb::splat(v)
    })
    .unwrap();
    let e = Illuminant::new(1.3, 0.9, 0.6).unwrap();
    let cast = von_kries_cast(&scene, &e).unwrap();
    for spec in all_specs() {
        let est = estimate(&spec, &cast, None).unwrap();
        assert!(close(&est, &e, 1e-9), "{spec:?}: {est:?}");
    }
}

#[test]
fn mask_hides_a_color_checker() {
    let e = Illuminant::new(0.8, 1.0, 1.2).unwrap();
    let mask = MaskRect::new(2, 3, 4, 4);
    let scene = LinearImage::from_fn(16, 16, |x, y| {
        if mask.contains(x, y) {
            PixelRgb::new(5.0, 0.01, 0.01)
        } else {
            PixelRgb::splat(0.3 + 0.02 * ((x + 2 * y) % 5) as f64)
        }
    })
    .unwrap();
    let cast = von_kries_cast(&scene, &e).unwrap();
    for spec in all_specs() {
        let masked = estimate(&spec, &cast, Some(&mask)).unwrap();
        assert!(close(&masked, &e, 1e-9), "{spec:?}");
        let unmasked = estimate(&spec, &cast, None).unwrap();
        assert!(!close(&unmasked, &e, 1e-3), "{spec:?} should see the checker");
    }
}

#[test]
fn degenerate_inputs_are_reported() {
    let black = LinearImage::uniform(4, 4, PixelRgb::splat(0.0)).unwrap();
    assert!(matches!(
        estimate(&EstimatorSpec::GrayWorld, &black, None),
        Err(Error::DegenerateScene(_))
    ));
    let red = LinearImage::uniform(4, 4, PixelRgb::new(1.0, 0.0, 0.0)).unwrap();
    assert!(matches!(
        estimate(&EstimatorSpec::WhitePatch, &red, None),
        Err(Error::DegenerateScene(_))
    ));
    let flat = LinearImage::uniform(12, 12, PixelRgb::splat(0.5)).unwrap();
    let edge = EstimatorSpec::GrayEdge {
        order: DerivativeOrder::One,
        norm: MinkowskiNorm::P(1.0),
        sigma: 1.0,
    };
    assert!(matches!(estimate(&edge, &flat, None), Err(Error::DegenerateScene(_))));
    let full = MaskRect::new(0, 0, 4, 4);
    let gray = LinearImage::uniform(4, 4, PixelRgb::splat(0.5)).unwrap();
    assert!(estimate(&EstimatorSpec::GrayWorld, &gray, Some(&full)).is_err());
    assert!(matches!(
        estimate(&EstimatorSpec::ShadesOfGray(MinkowskiNorm::P(-1.0)), &gray, None),
        Err(Error::Domain(_))
    ));
}

#[test]
fn flat_image_features_have_zero_edge_block() {
    let flat = LinearImage::uniform(12, 12, PixelRgb::new(0.2, 0.4, 0.6)).unwrap();
    let f = extract_features(&flat, None).unwrap();
    assert_eq!(f.len(), constancy::FEATURE_DIM);
    assert_eq!(&f.0[12..], &[0.0; 3]);
    for block in f.0[..12].chunks(3) {
        let n: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
