mod common;

use common::{cartpole_spec, published_p, random_spd, random_spec, random_vector};
use phydrl_core::linalg;
use phydrl_core::safety::{build_normalized, envelope_in_safe_set, in_envelope, in_normalized_set, in_safe_set, Envelope, SafetySpec};
use phydrl_core::{Mat, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

#[test]
fn cartpole_membership_examples() {
    let spec = cartpole_spec();
    let ns = build_normalized(&spec).unwrap();
    assert!(in_normalized_set(&ns, &Vector::zeros(4)).unwrap());
    assert!(in_safe_set(&spec, &v(&[0.6, 0.0, 0.0, 0.0])).unwrap());
    assert!(in_normalized_set(&ns, &v(&[0.6, 0.0, 0.0, 0.0])).unwrap());
    assert!(in_normalized_set(&ns, &v(&[-0.6, 3.0, -0.4, 9.0])).unwrap());
    assert!(!in_safe_set(&spec, &v(&[0.6000001, 0.0, 0.0, 0.0])).unwrap());
    assert!(!in_normalized_set(&ns, &v(&[0.0, 0.0, -0.41, 0.0])).unwrap());
}

#[test]
fn envelope_examples() {
    let env = Envelope::new(published_p()).unwrap();
    assert!(in_envelope(&env, &Vector::zeros(4)).unwrap());
    assert!(!in_envelope(&env, &v(&[1.0, 0.0, 0.0, 0.0])).unwrap());
    assert!((env.level(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap() - 2.0120).abs() < 1e-12);

    let unit = Envelope::new(Mat::identity(3, 3)).unwrap();
    let s = v(&[0.6, 0.0, 0.8]);
    assert!(in_envelope(&unit, &s).unwrap());
    assert!(in_envelope(&unit, &v(&[0.0, 1.0, 0.0])).unwrap());
}

/// The published (rounded) envelope overshoots the cart-position bound: along
/// the x axis it reaches |x| = sqrt(Q_11) > 0.6.
#[test]
fn published_envelope_is_not_contained() {
    let env = Envelope::new(published_p()).unwrap();
    let ns = build_normalized(&cartpole_spec()).unwrap();
    let report = envelope_in_safe_set(&env, &ns).unwrap();
    assert!(!report.contained);
    assert!(report.box_margin < -0.4);

    let q = linalg::spd_inverse(&published_p()).unwrap();
    let reach = q[(0, 0)].sqrt();
    assert!(reach > 0.6, "reach {reach}");
    let worst = q.column(0) / reach;
    assert!((env.level(&worst.clone_owned()).unwrap() - 1.0).abs() < 1e-9);
    assert!(!in_safe_set(&cartpole_spec(), &worst.clone_owned()).unwrap());
}

#[test]
fn containment_extremes() {
    let spec = SafetySpec::symmetric_box(2, &[(0, 1.0), (1, 1.0)]).unwrap();
    let ns = build_normalized(&spec).unwrap();
    let huge = Envelope::new(Mat::identity(2, 2) * 1e-6).unwrap();
    assert!(!envelope_in_safe_set(&huge, &ns).unwrap().contained);
    let tiny = Envelope::new(Mat::identity(2, 2) * 1e6).unwrap();
    assert!(envelope_in_safe_set(&tiny, &ns).unwrap().contained);
}

/// With a row whose interval excludes zero the test can accept an ellipsoid
/// that is not inside the set: `0.5 <= s <= 2` and `P = 1` passes both
/// conditions although `s = 0` is in the envelope.
#[test]
fn positive_rows_break_containment_soundness() {
    let spec = SafetySpec::new(Mat::from_element(1, 1, 1.0), v(&[0.0]), v(&[2.0]), v(&[0.5])).unwrap();
    let ns = build_normalized(&spec).unwrap();
    assert_eq!(ns.d()[0], 1.0);
    let env = Envelope::new(Mat::identity(1, 1)).unwrap();
    assert!(envelope_in_safe_set(&env, &ns).unwrap().contained);
    assert!(in_envelope(&env, &v(&[0.0])).unwrap());
    assert!(!in_safe_set(&spec, &v(&[0.0])).unwrap());
}

#[test]
fn boundary_points_are_members() {
    let spec = SafetySpec::new(
        Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]),
        v(&[0.5, -1.0]),
        v(&[1.5, 3.0]),
        v(&[-2.5, 2.0]),
    )
    .unwrap();
    let ns = build_normalized(&spec).unwrap();
    // Row 0: -2 <= s0 + s1 <= 2 ; row 1: 1 <= 2 s1 <= 2.
    for s in [v(&[1.0, 1.0]), v(&[-2.5, 0.5]), v(&[1.5, 0.5]), v(&[-3.0, 1.0])] {
        assert!(in_safe_set(&spec, &s).unwrap(), "{s}");
        assert!(in_normalized_set(&ns, &s).unwrap(), "{s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalized_membership_is_equivalent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, &[0, 1, 2]);
        let ns = build_normalized(&spec).unwrap();
        let scale = spec.v_upper().amax().max(spec.v_lower().amax()) + spec.v().amax();
        for _ in 0..100_000 {
            let s = random_vector(spec.dim(), scale, &mut rng);
            prop_assert_eq!(in_safe_set(&spec, &s).unwrap(), in_normalized_set(&ns, &s).unwrap());
        }
    }

    #[test]
    fn normalized_rows_are_scaled_rows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, &[0, 1, 2]);
        let ns = build_normalized(&spec).unwrap();
        for i in 0..spec.rows() {
            for j in 0..spec.dim() {
                prop_assert_eq!(ns.d_upper()[(i, j)], spec.d()[(i, j)] / ns.lambda_upper()[i]);
                prop_assert_eq!(ns.d_lower()[(i, j)], spec.d()[(i, j)] / ns.lambda_lower()[i]);
            }
        }
    }

    #[test]
    fn containment_is_sound_for_straddling_rows(seed in any::<u64>(), factor in 0.5f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, &[2]);
        let ns = build_normalized(&spec).unwrap();
        let n = spec.dim();
        let base = random_spd(n, 0.2, 5.0, &mut rng);
        let q = linalg::spd_inverse(&base).unwrap();
        let upper = ns.d_upper() * &q * ns.d_upper().transpose();
        let lower = ns.d_lower() * &q * ns.d_lower().transpose();
        let mut need = linalg::symmetric_eigenvalues(&upper).unwrap().max();
        for i in 0..spec.rows() {
            need = need.max(lower[(i, i)]);
        }
        let env = Envelope::new(base * (need * factor)).unwrap();
        let report = envelope_in_safe_set(&env, &ns).unwrap();
        if report.contained {
            for k in 0..10_000 {
                let s = if k % 10 == 0 {
                    env.sample_boundary(1.0, &mut rng).unwrap()
                } else {
                    env.sample_interior(1.0, &mut rng).unwrap()
                };
                prop_assert!(env.level(&s).unwrap() <= 1.0 + 1e-9);
                // Boundary samples may overshoot by rounding; pull them in slightly.
                let s = s * (1.0 - 1e-12);
                prop_assert!(in_normalized_set(&ns, &s).unwrap(), "state {} escapes", s);
            }
        } else {
            prop_assert!(factor < 1.0 + 1e-9);
        }
    }
}
