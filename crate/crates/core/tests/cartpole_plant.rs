mod common;

use common::{model_a, model_b, published_p};
use phydrl_core::plant::{self, InitRegion, Integrator, PlantParams, PlantState};
use phydrl_core::{Mat, Vector};
use proptest::prelude::*;

/// Central differences of `plant::step` around the origin.
fn fd_jacobians(p: &PlantParams) -> (Mat, Mat) {
    let h = 1e-7;
    let eval = |s: [f64; 4], f: f64| -> [f64; 4] {
        plant::step(&PlantState::from_slice(&s).unwrap(), f, p).unwrap().state.to_array()
    };
    let mut a = Mat::zeros(4, 4);
    for j in 0..4 {
        let mut plus = [0.0; 4];
        let mut minus = [0.0; 4];
        plus[j] = h;
        minus[j] = -h;
        let (fp, fm) = (eval(plus, 0.0), eval(minus, 0.0));
        for i in 0..4 {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let (fp, fm) = (eval([0.0; 4], h), eval([0.0; 4], -h));
    let b = Mat::from_fn(4, 1, |i, _| (fp[i] - fm[i]) / (2.0 * h));
    (a, b)
}

fn assert_within_two_percent(got: &Mat, want: &Mat) {
    for (g, w) in got.iter().zip(want.iter()) {
        if *w == 0.0 {
            assert!(g.abs() < 1e-6, "expected zero, got {g}");
        } else {
            assert!((g - w).abs() <= 0.02 * w.abs(), "got {g}, want {w}");
        }
    }
}

#[test]
fn finite_difference_model_matches_reference() {
    let p = PlantParams::calibrated();
    let (a, b) = fd_jacobians(&p);
    assert_within_two_percent(&a, &model_a());
    assert_within_two_percent(&b, &model_b());
    let (la, lb) = plant::linearize(&p);
    assert!((la - a).amax() < 1e-6);
    assert!((lb - b).amax() < 1e-6);
}

#[test]
fn first_column_is_translation() {
    for p in [PlantParams::calibrated(), PlantParams::calibrated().with_friction(0.05, 0.08)] {
        let (a, _) = plant::linearize(&p);
        assert_eq!(a.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
    }
}

#[test]
fn calibration_reproduces_committed_constants() {
    let committed = PlantParams::calibrated();
    let mut start = committed;
    start.cart_mass = 0.9;
    start.pole_mass = 0.1;
    start.pole_half_length = 0.5;
    let fitted = plant::calibrate(&model_a(), &model_b(), &start).unwrap();
    assert!((fitted.cart_mass - committed.cart_mass).abs() < 5e-6, "{fitted:?}");
    assert!((fitted.pole_mass - committed.pole_mass).abs() < 5e-6, "{fitted:?}");
    assert!((fitted.pole_half_length - committed.pole_half_length).abs() < 5e-6, "{fitted:?}");
}

#[test]
fn step_examples() {
    let p = PlantParams::calibrated();
    assert_eq!(plant::step(&PlantState::EQUILIBRIUM, 0.0, &p).unwrap().state, PlantState::EQUILIBRIUM);
    let friction = p.with_friction(0.05, 0.08);
    assert_eq!(plant::step(&PlantState::EQUILIBRIUM, 0.0, &friction).unwrap().state, PlantState::EQUILIBRIUM);

    let pushed = plant::step(&PlantState::EQUILIBRIUM, 1.0, &p).unwrap().state;
    assert!((pushed.v - 0.0334).abs() < 0.02 * 0.0334);
    assert!((pushed.omega + 0.0783).abs() < 0.02 * 0.0783);

    let mut s = PlantState::new(0.0, 0.0, 0.01, 0.0);
    for _ in 0..20 {
        s = plant::step(&s, 0.0, &p).unwrap().state;
    }
    assert!(s.theta > 0.01);
}

#[test]
fn linearization_error_is_higher_order() {
    let p = PlantParams::calibrated();
    let (a, b) = plant::linearize(&p);
    let dirs = [
        [0.3, -0.2, 0.4, 0.5, 2.0],
        [-0.5, 0.1, -0.3, 0.8, -1.0],
        [0.0, 0.6, 0.2, -0.4, 4.0],
    ];
    for dir in dirs {
        let err = |scale: f64| {
            let s = Vector::from_fn(4, |i, _| dir[i] * scale);
            let force = dir[4] * scale;
            let next = plant::step(&PlantState::from_vector(&s).unwrap(), force, &p).unwrap().state.to_vector();
            (next - (&a * &s + &b * force)).norm()
        };
        let ratio = err(0.2) / err(0.1);
        assert!(ratio >= 3.5, "ratio {ratio} for {dir:?}");
    }
}

/// Frictionless, unforced and integrated finely with the symplectic scheme.
#[test]
fn energy_is_conserved_at_fine_resolution() {
    let mut p = PlantParams::calibrated();
    p.dt = 1e-3;
    p.integrator = Integrator::SemiImplicitEuler;
    let mut s = PlantState::new(0.0, 0.0, 0.05, 0.0);
    let e0 = plant::energy(&s, &p);
    let mut prev = e0;
    for _ in 0..1000 {
        s = plant::step(&s, 0.0, &p).unwrap().state;
        let e = plant::energy(&s, &p);
        assert!((e - prev).abs() <= 1e-4 * e0.abs(), "drift {}", (e - prev).abs() / e0.abs());
        prev = e;
    }
    assert!(s.theta > 0.1, "the pole should have moved noticeably");
}

#[test]
fn mismatch_examples() {
    let p = PlantParams::calibrated();
    let (a, b) = (model_a(), model_b());
    let zero = Vector::zeros(4);
    let u = Vector::from_element(1, 0.0);
    let next = plant::step(&PlantState::EQUILIBRIUM, 0.0, &p).unwrap().state.to_vector();
    assert_eq!(plant::model_mismatch(&zero, &u, &next, &a, &b).unwrap(), zero);

    let s = Vector::from_row_slice(&[0.0, 0.5, 0.0, 0.0]);
    let friction = p.with_friction(0.05, 0.08);
    let with = plant::step(&PlantState::from_vector(&s).unwrap(), 0.0, &friction).unwrap().state.to_vector();
    let without = plant::step(&PlantState::from_vector(&s).unwrap(), 0.0, &p).unwrap().state.to_vector();
    assert!(with[1] < without[1]);
    let f = plant::model_mismatch(&s, &u, &with, &a, &b).unwrap();
    assert!(f[1].abs() > 1e-3);
}

#[test]
fn sampling_examples() {
    let fixed = InitRegion::Box {
        half_widths: [0.0; 4],
    };
    assert_eq!(plant::sample_initial(&fixed, 3).unwrap(), PlantState::EQUILIBRIUM);

    let region = InitRegion::Envelope {
        p: published_p(),
        level: 1.0,
    };
    assert_eq!(plant::sample_initial(&region, 11).unwrap(), plant::sample_initial(&region, 11).unwrap());
    for seed in 0..500 {
        let s = plant::sample_initial(&region, seed).unwrap().to_vector();
        assert!((s.transpose() * published_p() * &s)[(0, 0)] <= 1.0 + 1e-12);
    }
}

proptest! {
    #[test]
    fn mismatch_reconstructs_next_state(
        s in prop::array::uniform4(-1.0f64..1.0),
        force in -20.0f64..20.0,
        mu_c in 0.0f64..0.1,
        mu_p in 0.0f64..0.1,
    ) {
        let p = PlantParams::calibrated().with_friction(mu_c, mu_p);
        let s = Vector::from_row_slice(&s);
        let out = plant::step(&PlantState::from_vector(&s).unwrap(), force, &p).unwrap();
        let next = out.state.to_vector();
        let u = Vector::from_element(1, out.applied_force);
        let f = plant::model_mismatch(&s, &u, &next, &model_a(), &model_b()).unwrap();
        let rebuilt = model_a() * &s + model_b() * &u + f;
        prop_assert!((rebuilt - &next).amax() <= 1e-14 * (1.0 + next.amax()));
    }

    #[test]
    fn step_is_deterministic(s in prop::array::uniform4(-1.0f64..1.0), force in -20.0f64..20.0) {
        let p = PlantParams::calibrated().with_friction(0.05, 0.08);
        let st = PlantState::from_slice(&s).unwrap();
        let a = plant::step(&st, force, &p).unwrap().state.to_array();
        let b = plant::step(&st, force, &p).unwrap().state.to_array();
        prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn equilibrium_is_fixed_under_any_friction(mu_c in 0.0f64..1.0, mu_p in 0.0f64..1.0) {
        let p = PlantParams::calibrated().with_friction(mu_c, mu_p);
        prop_assert_eq!(plant::step(&PlantState::EQUILIBRIUM, 0.0, &p).unwrap().state, PlantState::EQUILIBRIUM);
    }
}
