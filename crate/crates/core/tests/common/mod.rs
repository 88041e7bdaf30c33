#![allow(dead_code)]

use phydrl_core::safety::SafetySpec;
use phydrl_core::{Mat, Vector};
use rand::Rng;

pub fn model_a() -> Mat {
    Mat::from_row_slice(
        4,
        4,
        &[1.0, 0.0333, 0.0, 0.0, 0.0, 1.0, -0.0565, 0.0, 0.0, 0.0, 1.0, 0.0333, 0.0, 0.0, 0.8980, 1.0],
    )
}

pub fn model_b() -> Mat {
    Mat::from_row_slice(4, 1, &[0.0, 0.0334, 0.0, -0.0783])
}

pub fn published_p() -> Mat {
    Mat::from_row_slice(
        4,
        4,
        &[
            2.0120, 0.2701, 1.4192, 0.2765, //
            0.2701, 2.2738, 5.1795, 1.0674, //
            1.4192, 5.1795, 31.9812, 4.9798, //
            0.2765, 1.0674, 4.9798, 1.0298,
        ],
    )
}

pub fn published_f() -> Mat {
    Mat::from_row_slice(1, 4, &[0.7400, 3.6033, 35.3534, 6.9982])
}

pub fn cartpole_spec() -> SafetySpec {
    SafetySpec::symmetric_box(4, &[(0, 0.6), (2, 0.4)]).unwrap()
}

/// Random non-degenerate interval sums `(lower + v, upper + v)` of the given kind:
/// 0 positive, 1 negative, 2 straddling.
fn interval<R: Rng>(kind: u8, rng: &mut R) -> (f64, f64) {
    let a = rng.random_range(0.1..3.0);
    let b = a + rng.random_range(0.1..3.0);
    match kind {
        0 => (a, b),
        1 => (-b, -a),
        _ => (-rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)),
    }
}

/// A random valid spec; `kinds` restricts the row sign patterns.
pub fn random_spec<R: Rng>(rng: &mut R, kinds: &[u8]) -> SafetySpec {
    let n = rng.random_range(1..=5);
    let h = rng.random_range(1..=4);
    let mut d = Mat::zeros(h, n);
    for x in d.iter_mut() {
        *x = rng.random_range(-2.0..2.0);
    }
    for i in 0..h {
        let k = rng.random_range(0..n);
        d[(i, k)] += if d[(i, k)] >= 0.0 { 0.5 } else { -0.5 };
    }
    let v = Vector::from_fn(h, |_, _| rng.random_range(-1.0..1.0));
    let mut lo = Vector::zeros(h);
    let mut up = Vector::zeros(h);
    for i in 0..h {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let (l, u) = interval(kind, rng);
        lo[i] = l - v[i];
        up[i] = u - v[i];
    }
    SafetySpec::new(d, v, up, lo).unwrap()
}

pub fn random_vector<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn random_matrix<R: Rng>(r: usize, c: usize, scale: f64, rng: &mut R) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Random symmetric positive definite matrix with eigenvalues roughly in `[lo, hi]`.
pub fn random_spd<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Mat {
    let g = random_matrix(n, n, 1.0, rng);
    let q = g.qr().q();
    let diag = Vector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let p = &q * Mat::from_diagonal(&diag) * q.transpose();
    (&p + p.transpose()) * 0.5
}
