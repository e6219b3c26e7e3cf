use std::f64::consts::PI;

use constancy::loss::{relative_deviation, SIN_FLOOR};
use constancy::vector::{self, Vec3};
use constancy::{
    angular_error, finite_difference_gradient, loss_gradient, loss_value, Error, LossKind,
};
use proptest::prelude::*;

fn nonzero_vec() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-3.0f64..3.0).prop_filter("norm away from zero", |v| vector::norm(v) > 1e-3)
}

fn positive_vec() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(0.05f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn angular_losses_are_scale_invariant(p in nonzero_vec(), t in positive_vec(),
                                          s in 1e-3f64..1e3, u in 1e-3f64..1e3) {
        let ps = vector::scale(&p, s);
        let tu = vector::scale(&t, u);
        for kind in LossKind::ALL.into_iter().filter(|k| k.is_angular()) {
            let a = loss_value(kind, &p, &t).unwrap();
            let b = loss_value(kind, &ps, &tu).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{kind}: {a} vs {b}");
        }
    }

    #[test]
    fn loss_identities(p in nonzero_vec(), t in positive_vec()) {
        let l1 = loss_value(LossKind::Arccos, &p, &t).unwrap();
        let l2 = loss_value(LossKind::OneMinusCos, &p, &t).unwrap();
        let l3 = loss_value(LossKind::SinSquared, &p, &t).unwrap();
        let l4 = loss_value(LossKind::Sin, &p, &t).unwrap();
        prop_assert!((l3 - l2 * (2.0 - l2)).abs() <= 1e-12);
        prop_assert!((l4 - l3.sqrt()).abs() <= 1e-12);
        prop_assert!((l1 - (1.0 - l2).acos()).abs() <= 1e-12);
    }

    #[test]
    fn loss_ranges(p in nonzero_vec(), t in nonzero_vec()) {
        let in_range = |k, lo: f64, hi: f64| {
            let v = loss_value(k, &p, &t).unwrap();
            (lo..=hi).contains(&v)
        };
        prop_assert!(in_range(LossKind::Arccos, 0.0, PI));
        prop_assert!(in_range(LossKind::OneMinusCos, 0.0, 2.0));
        prop_assert!(in_range(LossKind::SinSquared, 0.0, 1.0));
        prop_assert!(in_range(LossKind::Sin, 0.0, 1.0));
        prop_assert!(loss_value(LossKind::Mse, &p, &t).unwrap() >= 0.0);
    }

    #[test]
    fn sign_flip_asymmetry(p in nonzero_vec(), t in positive_vec()) {
        let neg = vector::scale(&p, -1.0);
        prop_assert_eq!(
            loss_value(LossKind::SinSquared, &neg, &t).unwrap(),
            loss_value(LossKind::SinSquared, &p, &t).unwrap()
        );
        let l2 = loss_value(LossKind::OneMinusCos, &p, &t).unwrap();
        let l2n = loss_value(LossKind::OneMinusCos, &neg, &t).unwrap();
        prop_assert!((l2n - (2.0 - l2)).abs() <= 1e-12);
    }

    #[test]
    fn l2_gradient_step_descends(p in nonzero_vec(), t in positive_vec()) {
        let eps = angular_error(&p, &t).unwrap().radians();
        prop_assume!(eps > 1e-3 && eps < PI - 1e-3);
        let g = loss_gradient(LossKind::OneMinusCos, &p, &t).unwrap();
        let stepped: Vec3 = std::array::from_fn(|i| p[i] - 1e-4 * g.0[i]);
        prop_assert!(
            loss_value(LossKind::OneMinusCos, &stepped, &t).unwrap()
                < loss_value(LossKind::OneMinusCos, &p, &t).unwrap()
        );
    }

    #[test]
    fn analytic_matches_finite_differences(p in nonzero_vec(), t in positive_vec()) {
        let eps = angular_error(&p, &t).unwrap().radians();
        prop_assume!(eps > 0.01 && eps < PI - 0.01);
        for kind in LossKind::ALL {
            let a = loss_gradient(kind, &p, &t).unwrap();
            let fd = finite_difference_gradient(kind, &p, &t, 1e-6).unwrap();
            prop_assert!(relative_deviation(&a, &fd) < 1e-5, "{kind}: {a:?} vs {fd:?}");
        }
    }
}

/// A numerator of `e_i⟨e,e⟩` instead of `e_i⟨ê,ê⟩` is only correct when both
/// vectors have equal length.
#[test]
fn swapped_numerator_disagrees_off_the_equal_norm_sphere() {
    let p = [0.9, 1.7, 0.4];
    let t = [1.2, 0.8, 1.1];
    let swapped = |p: &Vec3, t: &Vec3| -> Vec3 {
        let pt = vector::dot(p, t);
        let tt = vector::dot(t, t);
        let np = vector::norm(p);
        let nt = vector::norm(t);
        std::array::from_fn(|i| (p[i] * pt - t[i] * tt) / (np.powi(3) * nt))
    };
    let fd = finite_difference_gradient(LossKind::OneMinusCos, &p, &t, 1e-6).unwrap();
    let ours = loss_gradient(LossKind::OneMinusCos, &p, &t).unwrap();
    assert!(relative_deviation(&ours, &fd) < 1e-6);
    let theirs = swapped(&p, &t);
    assert!((0..3).any(|i| (theirs[i] - fd.0[i]).abs() > 1e-3));

    // on equal-length vectors the two forms coincide
    let k = vector::norm(&t) / vector::norm(&p);
    let p_eq = vector::scale(&p, k);
    let ours = loss_gradient(LossKind::OneMinusCos, &p_eq, &t).unwrap();
    let theirs = swapped(&p_eq, &t);
    for (o, t) in ours.0.iter().zip(theirs) {
        assert!((o - t).abs() < 1e-12);
    }
}

#[test]
fn maclaurin_bounds_near_zero() {
    // p = t + y·u with u ⟂ t exactly representable, so ε = atan(y) is the oracle
    for k in 1..=100 {
        let y = 1e-3 * k as f64 / 100.0;
        let eps = y.atan();
        for (p, t) in [
            ([1.0, y, 0.0], [1.0, 0.0, 0.0]),
            ([0.0, 2.0, 2.0 * y], [0.0, 3.0, 0.0]),
        ] {
            let l2 = loss_value(LossKind::OneMinusCos, &p, &t).unwrap();
            let l3 = loss_value(LossKind::SinSquared, &p, &t).unwrap();
            assert!((l2 - eps * eps / 2.0).abs() <= eps.powi(4) / 20.0, "eps={eps}");
            assert!((l3 - eps * eps).abs() <= eps.powi(4) / 2.0, "eps={eps}");
        }
    }
}

#[test]
fn l3_has_a_stationary_wrong_optimum_at_pi() {
    let t = [1.0, 0.6, 0.9];
    let anti = vector::scale(&t, -1.7);
    let fd = finite_difference_gradient(LossKind::SinSquared, &anti, &t, 1e-6).unwrap();
    assert!(fd.norm() < 1e-6);
    assert!(loss_value(LossKind::SinSquared, &anti, &t).unwrap() < 1e-15);
    assert_eq!(loss_value(LossKind::OneMinusCos, &anti, &t).unwrap(), 2.0);
    let g = loss_gradient(LossKind::OneMinusCos, &anti, &t).unwrap();
    assert!(vector::is_finite(&g.0));
}

#[test]
fn singularity_threshold_is_the_sin_floor() {
    let t = [0.0, 0.0, 1.0];
    // sin(eps) just above and well below the floor
    let above = [2.0 * SIN_FLOOR, 0.0, 1.0];
    let below = [1e-3 * SIN_FLOOR, 0.0, 1.0];
    assert!(loss_gradient(LossKind::Arccos, &above, &t).is_ok());
    assert!(matches!(
        loss_gradient(LossKind::Arccos, &below, &t),
        Err(Error::SingularAngle { .. })
    ));
    assert!(matches!(
        loss_gradient(LossKind::Sin, &below, &t),
        Err(Error::SingularAngle { .. })
    ));
}
