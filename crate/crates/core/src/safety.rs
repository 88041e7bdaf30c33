//! Safety sets and safety envelopes.
//!
//! A safety set is the polytope `{s : v_lower <= D s - v <= v_upper}`. Each
//! constraint row is rewritten into a normalized pair of one-sided bounds
//! `D_upper s <= 1` and `D_lower s >= d` with `d ∈ {-1, +1}`, which is the form
//! used by the envelope containment test and by the synthesis LMIs.
//!
//! The safety envelope is the ellipsoid `{s : sᵀ P s <= 1}` with `P ≻ 0`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector, PSD_TOL, SYMMETRY_TOL};
use crate::{Error, Result};

/// Raw constraint data of the safety set.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    d: Mat,
    v: Vector,
    v_upper: Vector,
    v_lower: Vector,
}

impl SafetySpec {
    pub fn new(d: Mat, v: Vector, v_upper: Vector, v_lower: Vector) -> Result<Self> {
        let h = d.nrows();
        if h == 0 || d.ncols() == 0 {
            return Err(Error::InvalidSpec("constraint matrix is empty".into()));
        }
        check_dim("offset vector v", h, v.len())?;
        check_dim("upper bound vector", h, v_upper.len())?;
        check_dim("lower bound vector", h, v_lower.len())?;
        if d.iter().chain(v.iter()).chain(v_upper.iter()).chain(v_lower.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite entry".into()));
        }
        for i in 0..h {
            if d.row(i).iter().all(|x| *x == 0.0) {
                return Err(Error::InvalidSpec(format!("row {i} of D is all zeros")));
            }
            if !(v_lower[i] < v_upper[i]) {
                return Err(Error::InvalidSpec(format!(
                    "row {i}: lower bound {} is not below upper bound {}",
                    v_lower[i], v_upper[i]
                )));
            }
            if v_lower[i] + v[i] == 0.0 || v_upper[i] + v[i] == 0.0 {
                return Err(Error::DegenerateRow { row: i });
            }
        }
        Ok(Self {
            d,
            v,
            v_upper,
            v_lower,
        })
    }

    /// Symmetric box `|s_k| <= bound` on the selected coordinates.
    pub fn symmetric_box(dim: usize, bounds: &[(usize, f64)]) -> Result<Self> {
        let h = bounds.len();
        let mut d = Mat::zeros(h, dim);
        let mut upper = Vector::zeros(h);
        for (row, &(coord, bound)) in bounds.iter().enumerate() {
            if coord >= dim {
                return Err(Error::InvalidSpec(format!("coordinate {coord} out of range")));
            }
            d[(row, coord)] = 1.0;
            upper[row] = bound;
        }
        let lower = -upper.clone();
        Self::new(d, Vector::zeros(h), upper, lower)
    }

    pub fn rows(&self) -> usize {
        self.d.nrows()
    }

    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn v_upper(&self) -> &Vector {
        &self.v_upper
    }

    pub fn v_lower(&self) -> &Vector {
        &self.v_lower
    }

    pub fn contains(&self, s: &Vector) -> Result<bool> {
        in_safe_set(self, s)
    }
}

/// Which sign pattern a constraint row falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowCase {
    /// `v_lower + v > 0`: the whole interval lies above zero.
    Positive,
    /// `v_upper + v < 0`: the whole interval lies below zero.
    Negative,
    /// `v_upper + v > 0` and `v_lower + v < 0`: the interval straddles zero.
    Straddling,
}

impl RowCase {
    pub fn classify(lower_sum: f64, upper_sum: f64) -> Result<Self> {
        if lower_sum > 0.0 {
            Ok(Self::Positive)
        } else if upper_sum < 0.0 {
            Ok(Self::Negative)
        } else if upper_sum > 0.0 && lower_sum < 0.0 {
            Ok(Self::Straddling)
        } else {
            Err(Error::InvalidSpec("row bounds touch zero".into()))
        }
    }
}

/// The normalized form of a safety set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSafety {
    d_upper: Mat,
    d_lower: Mat,
    d: Vector,
    lambda_upper: Vector,
    lambda_lower: Vector,
    cases: Vec<RowCase>,
}

impl NormalizedSafety {
    /// `D_upper = Λ_upper⁻¹ D`.
    pub fn d_upper(&self) -> &Mat {
        &self.d_upper
    }

    /// `D_lower = Λ_lower⁻¹ D`.
    pub fn d_lower(&self) -> &Mat {
        &self.d_lower
    }

    /// Per-row lower thresholds, each `-1` or `+1`.
    pub fn d(&self) -> &Vector {
        &self.d
    }

    /// Diagonal of `Λ_upper`.
    pub fn lambda_upper(&self) -> &Vector {
        &self.lambda_upper
    }

    /// Diagonal of `Λ_lower`.
    pub fn lambda_lower(&self) -> &Vector {
        &self.lambda_lower
    }

    pub fn lambda_upper_matrix(&self) -> Mat {
        Mat::from_diagonal(&self.lambda_upper)
    }

    pub fn lambda_lower_matrix(&self) -> Mat {
        Mat::from_diagonal(&self.lambda_lower)
    }

    pub fn cases(&self) -> &[RowCase] {
        &self.cases
    }

    pub fn rows(&self) -> usize {
        self.d_upper.nrows()
    }

    pub fn dim(&self) -> usize {
        self.d_upper.ncols()
    }

    pub fn contains(&self, s: &Vector) -> Result<bool> {
        in_normalized_set(self, s)
    }
}

/// Normalizes every constraint row according to its sign pattern.
pub fn build_normalized(spec: &SafetySpec) -> Result<NormalizedSafety> {
    let h = spec.rows();
    let n = spec.dim();
    let mut d_upper = Mat::zeros(h, n);
    let mut d_lower = Mat::zeros(h, n);
    let mut d = Vector::zeros(h);
    let mut lambda_upper = Vector::zeros(h);
    let mut lambda_lower = Vector::zeros(h);
    let mut cases = Vec::with_capacity(h);

    for i in 0..h {
        let lo = spec.v_lower[i] + spec.v[i];
        let up = spec.v_upper[i] + spec.v[i];
        if lo == 0.0 || up == 0.0 {
            return Err(Error::DegenerateRow { row: i });
        }
        let case = RowCase::classify(lo, up).map_err(|_| Error::DegenerateRow { row: i })?;
        let (lu, ll, di) = match case {
            RowCase::Positive => (up, lo, 1.0),
            RowCase::Negative => (lo, up, 1.0),
            RowCase::Straddling => (up, -lo, -1.0),
        };
        lambda_upper[i] = lu;
        lambda_lower[i] = ll;
        d[i] = di;
        for j in 0..n {
            d_upper[(i, j)] = spec.d[(i, j)] / lu;
            d_lower[(i, j)] = spec.d[(i, j)] / ll;
        }
        cases.push(case);
    }

    Ok(NormalizedSafety {
        d_upper,
        d_lower,
        d,
        lambda_upper,
        lambda_lower,
        cases,
    })
}

/// `v_lower <= D s - v <= v_upper`, componentwise and inclusive.
pub fn in_safe_set(spec: &SafetySpec, s: &Vector) -> Result<bool> {
    check_dim("state", spec.dim(), s.len())?;
    let ds = &spec.d * s - &spec.v;
    Ok((0..spec.rows()).all(|i| spec.v_lower[i] <= ds[i] && ds[i] <= spec.v_upper[i]))
}

/// `D_upper s <= 1` and `D_lower s >= d`, componentwise and inclusive.
pub fn in_normalized_set(ns: &NormalizedSafety, s: &Vector) -> Result<bool> {
    check_dim("state", ns.dim(), s.len())?;
    let up = &ns.d_upper * s;
    let lo = &ns.d_lower * s;
    Ok((0..ns.rows()).all(|i| up[i] <= 1.0 && lo[i] >= ns.d[i]))
}

/// Ellipsoidal safety envelope `{s : sᵀ P s <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    p: Mat,
}

impl Envelope {
    /// Symmetrizes `p` after checking it is symmetric to 1e-9 and positive definite.
    pub fn new(p: Mat) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch {
                what: "envelope matrix (square)",
                expected: p.nrows(),
                found: p.ncols(),
            });
        }
        if !linalg::is_symmetric(&p, SYMMETRY_TOL) {
            return Err(Error::NotSymmetric {
                asymmetry: linalg::asymmetry(&p),
            });
        }
        let p = linalg::symmetrize(&p);
        let min_eig = linalg::min_eigenvalue(&p)?;
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `sᵀ P s`.
    pub fn level(&self, s: &Vector) -> Result<f64> {
        check_dim("state", self.dim(), s.len())?;
        Ok(linalg::quad_form(&self.p, s))
    }

    pub fn contains(&self, s: &Vector) -> Result<bool> {
        in_envelope(self, s)
    }

    /// Uniform sample from `{s : sᵀ P s <= level}`.
    pub fn sample_interior<R: Rng + ?Sized>(&self, level: f64, rng: &mut R) -> Result<Vector> {
        let map = self.ball_map(level)?;
        let n = self.dim();
        let u = unit_sphere_sample(n, rng);
        let radius = libm::pow(rng.random::<f64>(), 1.0 / n as f64);
        Ok(map * (u * radius))
    }

    /// Uniform-direction sample on `{s : sᵀ P s = level}`.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, level: f64, rng: &mut R) -> Result<Vector> {
        let map = self.ball_map(level)?;
        Ok(map * unit_sphere_sample(self.dim(), rng))
    }

    fn ball_map(&self, level: f64) -> Result<Mat> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(Error::EmptyRegion);
        }
        Ok(linalg::inv_sqrt_spd(&self.p)? * libm::sqrt(level))
    }
}

fn unit_sphere_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    loop {
        let g = Vector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// `sᵀ P s <= 1`.
pub fn in_envelope(env: &Envelope, s: &Vector) -> Result<bool> {
    Ok(env.level(s)? <= 1.0)
}

/// Margins of the envelope containment condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    /// Smallest eigenvalue of `I - D_upper P⁻¹ D_upperᵀ`.
    pub box_margin: f64,
    /// Per row: `[D_lower P⁻¹ D_lowerᵀ]_ii - 1` when `d_i = +1`, `1 - [..]_ii` when `d_i = -1`.
    pub diag_slacks: Vec<f64>,
    pub contained: bool,
}

/// Sufficient condition for the envelope to sit inside the normalized safety set.
///
/// For rows with `d_i = -1` the test is sound. Rows with `d_i = +1` exclude the
/// origin from the safety set, so no origin-centred ellipsoid can be contained;
/// the condition is still evaluated as stated and callers should treat a `true`
/// on such rows with care.
pub fn envelope_in_safe_set(env: &Envelope, ns: &NormalizedSafety) -> Result<ContainmentReport> {
    check_dim("envelope dimension", ns.dim(), env.dim())?;
    let p_inv = linalg::spd_inverse(env.p())?;
    containment_with_inverse(&p_inv, ns)
}

/// Same test expressed on `Q = P⁻¹` directly.
pub(crate) fn containment_with_inverse(q: &Mat, ns: &NormalizedSafety) -> Result<ContainmentReport> {
    let h = ns.rows();
    let upper = &ns.d_upper * q * ns.d_upper.transpose();
    let gap = Mat::identity(h, h) - &upper;
    let box_margin = linalg::min_eigenvalue(&gap)?;
    let lower = &ns.d_lower * q * ns.d_lower.transpose();
    let diag_slacks: Vec<f64> = (0..h).map(|i| ns.d[i] * (lower[(i, i)] - 1.0)).collect();

    let scale = linalg::symmetric_eigenvalues(&upper)?
        .iter()
        .fold(1.0f64, |acc, x| acc.max(libm::fabs(*x)));
    let contained =
        box_margin >= -PSD_TOL * scale && diag_slacks.iter().all(|s| *s >= -PSD_TOL);
    Ok(ContainmentReport {
        box_margin,
        diag_slacks,
        contained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cartpole_spec() -> SafetySpec {
        SafetySpec::new(
            Mat::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            Vector::zeros(2),
            Vector::from_vec(alloc::vec![0.6, 0.4]),
            Vector::from_vec(alloc::vec![-0.6, -0.4]),
        )
        .unwrap()
    }

    fn vehicle_spec(wheel_radius: f64) -> SafetySpec {
        SafetySpec::new(
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 1.0, -wheel_radius]),
            Vector::from_vec(alloc::vec![15.0, 0.0]),
            Vector::from_vec(alloc::vec![2.0, 4.0]),
            Vector::from_vec(alloc::vec![-2.0, -4.0]),
        )
        .unwrap()
    }

    #[test]
    fn vehicle_normalization() {
        let ns = build_normalized(&vehicle_spec(0.3)).unwrap();
        assert_eq!(ns.lambda_upper().as_slice(), &[17.0, 4.0]);
        assert_eq!(ns.lambda_lower().as_slice(), &[13.0, 4.0]);
        assert_eq!(ns.d().as_slice(), &[1.0, -1.0]);
        assert_eq!(ns.cases(), &[RowCase::Positive, RowCase::Straddling]);
    }

    #[test]
    fn cartpole_normalization() {
        let ns = build_normalized(&cartpole_spec()).unwrap();
        assert_eq!(ns.lambda_upper().as_slice(), &[0.6, 0.4]);
        assert_eq!(ns.lambda_lower().as_slice(), &[0.6, 0.4]);
        assert_eq!(ns.d().as_slice(), &[-1.0, -1.0]);
    }

    #[test]
    fn unit_box_is_unchanged() {
        let spec = SafetySpec::new(
            Mat::identity(1, 1),
            Vector::zeros(1),
            Vector::from_element(1, 1.0),
            Vector::from_element(1, -1.0),
        )
        .unwrap();
        let ns = build_normalized(&spec).unwrap();
        assert_eq!(ns.d_upper(), spec.d());
        assert_eq!(ns.d_lower(), spec.d());
        assert_eq!(ns.d()[0], -1.0);
    }

    #[test]
    fn negative_case_flips_roles() {
        // -5 <= s - 0 <= -1 : whole interval negative
        let spec = SafetySpec::new(
            Mat::identity(1, 1),
            Vector::zeros(1),
            Vector::from_element(1, -1.0),
            Vector::from_element(1, -5.0),
        )
        .unwrap();
        let ns = build_normalized(&spec).unwrap();
        assert_eq!(ns.lambda_upper()[0], -5.0);
        assert_eq!(ns.lambda_lower()[0], -1.0);
        assert_eq!(ns.d()[0], 1.0);
        for s in [-6.0, -5.0, -3.0, -1.0, -0.5, 0.0] {
            let s = Vector::from_element(1, s);
            assert_eq!(in_safe_set(&spec, &s).unwrap(), in_normalized_set(&ns, &s).unwrap());
        }
    }

    #[test]
    fn degenerate_rows_are_rejected() {
        let r = SafetySpec::new(
            Mat::identity(1, 1),
            Vector::from_element(1, 1.0),
            Vector::from_element(1, 2.0),
            Vector::from_element(1, -1.0),
        );
        assert_eq!(r.unwrap_err(), Error::DegenerateRow { row: 0 });
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let zero_row = SafetySpec::new(
            Mat::zeros(1, 2),
            Vector::zeros(1),
            Vector::from_element(1, 1.0),
            Vector::from_element(1, -1.0),
        );
        assert!(matches!(zero_row, Err(Error::InvalidSpec(_))));
        let empty_interval = SafetySpec::new(
            Mat::identity(1, 1),
            Vector::zeros(1),
            Vector::from_element(1, -1.0),
            Vector::from_element(1, 1.0),
        );
        assert!(matches!(empty_interval, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn safe_set_membership() {
        let spec = cartpole_spec();
        assert!(in_safe_set(&spec, &Vector::zeros(4)).unwrap());
        let out = Vector::from_vec(alloc::vec![0.7, 0.0, 0.0, 0.0]);
        assert!(!in_safe_set(&spec, &out).unwrap());
        assert!(matches!(
            in_safe_set(&spec, &Vector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));

        let vehicle = vehicle_spec(0.3);
        // v = 15 puts row 1 at 0; w = 50 gives slip 15 - 15 = 0
        let s = Vector::from_vec(alloc::vec![15.0, 50.0]);
        assert!(in_safe_set(&vehicle, &s).unwrap());
        let too_fast = Vector::from_vec(alloc::vec![17.5, 58.0]);
        assert!(!in_safe_set(&vehicle, &too_fast).unwrap());
    }

    #[test]
    fn normalized_membership_boundaries() {
        let ns = build_normalized(&cartpole_spec()).unwrap();
        assert!(in_normalized_set(&ns, &Vector::zeros(4)).unwrap());
        let edge = Vector::from_vec(alloc::vec![0.6, 0.0, 0.0, 0.0]);
        assert!(in_normalized_set(&ns, &edge).unwrap());
        let lower_edge = Vector::from_vec(alloc::vec![-0.6, 0.0, -0.4, 0.0]);
        assert!(in_normalized_set(&ns, &lower_edge).unwrap());
    }

    #[test]
    fn scaling_is_exact() {
        let spec = vehicle_spec(0.35);
        let ns = build_normalized(&spec).unwrap();
        for i in 0..spec.rows() {
            for j in 0..spec.dim() {
                assert_eq!(ns.d_upper()[(i, j)], spec.d()[(i, j)] / ns.lambda_upper()[i]);
                assert_eq!(ns.d_lower()[(i, j)], spec.d()[(i, j)] / ns.lambda_lower()[i]);
            }
        }
    }

    #[test]
    fn envelope_membership() {
        let env = Envelope::new(Mat::identity(3, 3)).unwrap();
        let s = Vector::from_vec(alloc::vec![0.6, 0.8, 0.0]);
        assert!(in_envelope(&env, &s).unwrap());
        assert!(in_envelope(&env, &Vector::zeros(3)).unwrap());
        assert!(!in_envelope(&env, &(s * 1.0001)).unwrap());
    }

    #[test]
    fn envelope_rejects_bad_matrices() {
        let asym = Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(Envelope::new(asym), Err(Error::NotSymmetric { .. })));
        let indef = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(Envelope::new(indef), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn containment_extremes() {
        let spec = SafetySpec::symmetric_box(1, &[(0, 1.0)]).unwrap();
        let ns = build_normalized(&spec).unwrap();
        let huge = Envelope::new(Mat::identity(1, 1) * 1e-6).unwrap();
        assert!(!envelope_in_safe_set(&huge, &ns).unwrap().contained);
        let tiny = Envelope::new(Mat::identity(1, 1) * 1e6).unwrap();
        let report = envelope_in_safe_set(&tiny, &ns).unwrap();
        assert!(report.contained);
        assert!(report.box_margin > 0.99);
        // exactly the unit ball in the unit box touches the faces
        let unit = Envelope::new(Mat::identity(1, 1)).unwrap();
        assert!(envelope_in_safe_set(&unit, &ns).unwrap().contained);
    }

    #[test]
    fn interior_samples_stay_inside() {
        let p = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let env = Envelope::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = env.sample_interior(1.0, &mut rng).unwrap();
            assert!(env.level(&s).unwrap() <= 1.0 + 1e-12);
            let b = env.sample_boundary(0.5, &mut rng).unwrap();
            assert!((env.level(&b).unwrap() - 0.5).abs() < 1e-12);
        }
        assert_eq!(env.sample_interior(-1.0, &mut rng), Err(Error::EmptyRegion));
    }
}
