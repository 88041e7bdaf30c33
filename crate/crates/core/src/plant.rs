//! Friction cart-pole.
//!
//! State ordering is `[x, v, theta, omega]` (cart position, cart velocity, pole
//! angle from vertical, pole angular velocity). The equations of motion follow
//! the Coulomb-cart / viscous-pivot formulation of the classic cart-pole with
//! the pole modelled as a uniform rod of half length `l`:
//!
//! ```text
//! θ̈ = [g sinθ + cosθ·((-F - m l ω²(sinθ + μc sgn(ẋ) cosθ))/M + μc g sgn(ẋ)) - μp ω/(m l)]
//!      / [l (4/3 - m cosθ/M · (cosθ - μc sgn(ẋ)))]
//! N  = M g - m l (θ̈ sinθ + ω² cosθ)
//! ẍ  = [F + m l (ω² sinθ - θ̈ cosθ) - μc N sgn(N ẋ)] / M
//! ```
//!
//! with `M = m_cart + m_pole`. `sgn(0) = 0`, so a cart at rest feels no friction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::{Error, Result};

pub const STATE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

impl PlantState {
    pub const EQUILIBRIUM: Self = Self {
        x: 0.0,
        v: 0.0,
        theta: 0.0,
        omega: 0.0,
    };

    pub fn new(x: f64, v: f64, theta: f64, omega: f64) -> Self {
        Self { x, v, theta, omega }
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.to_array())
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.x, self.v, self.theta, self.omega]
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        check_dim("plant state", STATE_DIM, s.len())?;
        Ok(Self::new(s[0], s[1], s[2], s[3]))
    }

    pub fn from_vector(s: &Vector) -> Result<Self> {
        Self::from_slice(s.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Positions advance with the old velocities. The linear model's structure
    /// (zero `dt²` terms) matches this scheme.
    Euler,
    /// Velocities first, then positions with the new velocities.
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub gravity: f64,
    /// Coulomb friction coefficient between cart and track (dimensionless).
    pub cart_friction: f64,
    /// Viscous friction coefficient at the pole pivot (N·m·s).
    pub pole_friction: f64,
    pub dt: f64,
    pub force_limit: f64,
    pub integrator: Integrator,
}

impl PlantParams {
    /// Masses and length fitted so that the frictionless linearization reproduces
    /// the reference discrete-time model (see [`calibrate`]).
    pub const fn calibrated() -> Self {
        Self {
            cart_mass: 0.939641,
            pole_mass: 0.230201,
            pole_half_length: 0.319805,
            gravity: 9.8,
            cart_friction: 0.0,
            pole_friction: 0.0,
            dt: 0.0333,
            force_limit: 15.0,
            integrator: Integrator::Euler,
        }
    }

    pub fn with_friction(mut self, cart: f64, pole: f64) -> Self {
        self.cart_friction = cart;
        self.pole_friction = pole;
        self
    }

    pub fn frictionless(self) -> Self {
        self.with_friction(0.0, 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.cart_mass + self.pole_mass
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_half_length", self.pole_half_length),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("force_limit", self.force_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("cart_friction", self.cart_friction), ("pole_friction", self.pole_friction)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: PlantState,
    /// Force actually applied after saturation.
    pub applied_force: f64,
    pub clamped: bool,
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Cart and pole accelerations.
pub fn accelerations(s: &PlantState, force: f64, p: &PlantParams) -> (f64, f64) {
    let m = p.pole_mass;
    let l = p.pole_half_length;
    let total = p.total_mass();
    let (sin, cos) = (libm::sin(s.theta), libm::cos(s.theta));
    let mu_c = p.cart_friction;
    let sv = sgn(s.v);
    let w2 = s.omega * s.omega;

    let num = p.gravity * sin
        + cos * ((-force - m * l * w2 * (sin + mu_c * sv * cos)) / total + mu_c * p.gravity * sv)
        - p.pole_friction * s.omega / (m * l);
    let den = l * (4.0 / 3.0 - m * cos / total * (cos - mu_c * sv));
    let theta_acc = num / den;
    let normal = total * p.gravity - m * l * (theta_acc * sin + w2 * cos);
    let x_acc = (force + m * l * (w2 * sin - theta_acc * cos) - mu_c * normal * sgn(normal * s.v)) / total;
    (x_acc, theta_acc)
}

/// Advances the plant by one `dt`. Forces beyond `force_limit` are clamped.
pub fn step(s: &PlantState, force: f64, p: &PlantParams) -> Result<StepOutcome> {
    if !force.is_finite() {
        return Err(Error::NonFinite("force"));
    }
    let applied = force.clamp(-p.force_limit, p.force_limit);
    let state = step_unclamped(s, applied, p);
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    Ok(StepOutcome {
        state,
        applied_force: applied,
        clamped: applied != force,
    })
}

fn step_unclamped(s: &PlantState, force: f64, p: &PlantParams) -> PlantState {
    let (x_acc, theta_acc) = accelerations(s, force, p);
    let dt = p.dt;
    match p.integrator {
        Integrator::Euler => PlantState {
            x: s.x + dt * s.v,
            v: s.v + dt * x_acc,
            theta: s.theta + dt * s.omega,
            omega: s.omega + dt * theta_acc,
        },
        Integrator::SemiImplicitEuler => {
            let v = s.v + dt * x_acc;
            let omega = s.omega + dt * theta_acc;
            PlantState {
                x: s.x + dt * v,
                v,
                theta: s.theta + dt * omega,
                omega,
            }
        }
    }
}

/// Total mechanical energy (pole potential measured from the pivot height).
pub fn energy(s: &PlantState, p: &PlantParams) -> f64 {
    let m = p.pole_mass;
    let l = p.pole_half_length;
    0.5 * p.total_mass() * s.v * s.v
        + m * l * s.v * s.omega * libm::cos(s.theta)
        + 2.0 / 3.0 * m * l * l * s.omega * s.omega
        + m * p.gravity * l * libm::cos(s.theta)
}

/// Central finite-difference Jacobians `(A, B)` of the frictionless one-step map at the equilibrium.
pub fn linearize(p: &PlantParams) -> (Mat, Mat) {
    let p = p.frictionless();
    let h = 1e-6;
    let eq = PlantState::EQUILIBRIUM.to_array();
    let mut a = Mat::zeros(STATE_DIM, STATE_DIM);
    for j in 0..STATE_DIM {
        let mut plus = eq;
        let mut minus = eq;
        plus[j] += h;
        minus[j] -= h;
        let fp = step_unclamped(&PlantState::from_slice(&plus).unwrap_or_default(), 0.0, &p).to_array();
        let fm = step_unclamped(&PlantState::from_slice(&minus).unwrap_or_default(), 0.0, &p).to_array();
        for i in 0..STATE_DIM {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let mut b = Mat::zeros(STATE_DIM, 1);
    let fp = step_unclamped(&PlantState::EQUILIBRIUM, h, &p).to_array();
    let fm = step_unclamped(&PlantState::EQUILIBRIUM, -h, &p).to_array();
    for i in 0..STATE_DIM {
        b[(i, 0)] = (fp[i] - fm[i]) / (2.0 * h);
    }
    (a, b)
}

/// `f = s_next - A s - B a`.
pub fn model_mismatch(s: &Vector, a: &Vector, s_next: &Vector, sys_a: &Mat, sys_b: &Mat) -> Result<Vector> {
    check_dim("state", sys_a.ncols(), s.len())?;
    check_dim("next state", sys_a.nrows(), s_next.len())?;
    check_dim("action", sys_b.ncols(), a.len())?;
    check_dim("control matrix rows", sys_a.nrows(), sys_b.nrows())?;
    Ok(s_next - sys_a * s - sys_b * a)
}

/// Where initial states are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitRegion {
    /// Uniform over `|s_i| <= half_widths[i]`.
    Box { half_widths: [f64; STATE_DIM] },
    /// Uniform over `{s : sᵀ P s <= level}`.
    Envelope { p: Mat, level: f64 },
}

impl InitRegion {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PlantState> {
        match self {
            InitRegion::Box { half_widths } => {
                if half_widths.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::EmptyRegion);
                }
                let mut s = [0.0; STATE_DIM];
                for (si, w) in s.iter_mut().zip(half_widths) {
                    if *w > 0.0 {
                        *si = rng.random_range(-*w..=*w);
                    }
                }
                PlantState::from_slice(&s)
            }
            InitRegion::Envelope { p, level } => {
                check_dim("envelope dimension", STATE_DIM, p.nrows())?;
                if !(*level >= 0.0) || !level.is_finite() {
                    return Err(Error::EmptyRegion);
                }
                if *level == 0.0 {
                    return Ok(PlantState::EQUILIBRIUM);
                }
                let env = crate::safety::Envelope::new(p.clone())?;
                PlantState::from_vector(&env.sample_interior(*level, rng)?)
            }
        }
    }
}

/// Reproducible draw from `region`.
pub fn sample_initial(region: &InitRegion, seed: u64) -> Result<PlantState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    region.sample(&mut rng)
}

/// Fits cart mass, pole mass and pole half length so that [`linearize`]
/// reproduces the coupling entries `A[1][2]`, `A[3][2]`, `B[1]`, `B[3]` of the
/// target model. Gauss-Newton on relative residuals, starting from `start`.
pub fn calibrate(target_a: &Mat, target_b: &Mat, start: &PlantParams) -> Result<PlantParams> {
    check_dim("target A rows", STATE_DIM, target_a.nrows())?;
    check_dim("target B rows", STATE_DIM, target_b.nrows())?;
    let targets = [target_a[(1, 2)], target_a[(3, 2)], target_b[(1, 0)], target_b[(3, 0)]];
    if targets.contains(&0.0) {
        return Err(Error::InvalidConfig("calibration targets must be nonzero".into()));
    }
    let residual = |theta: &[f64; 3]| -> Vector {
        let mut p = start.frictionless();
        p.cart_mass = theta[0];
        p.pole_mass = theta[1];
        p.pole_half_length = theta[2];
        let (a, b) = linearize(&p);
        let got = [a[(1, 2)], a[(3, 2)], b[(1, 0)], b[(3, 0)]];
        Vector::from_iterator(4, got.iter().zip(&targets).map(|(g, t)| (g - t) / t))
    };
    let mut theta = [start.cart_mass, start.pole_mass, start.pole_half_length];
    for _ in 0..50 {
        let r0 = residual(&theta);
        let mut jac = Mat::zeros(4, 3);
        for k in 0..3 {
            let h = 1e-6 * theta[k].abs().max(1e-3);
            let mut tp = theta;
            let mut tm = theta;
            tp[k] += h;
            tm[k] -= h;
            let d = (residual(&tp) - residual(&tm)) / (2.0 * h);
            jac.set_column(k, &d);
        }
        let jt = jac.transpose();
        let step = linalg::inverse(&(&jt * &jac))? * (&jt * &r0);
        let mut t = 1.0;
        let base = r0.norm();
        loop {
            let trial = [theta[0] - t * step[0], theta[1] - t * step[1], theta[2] - t * step[2]];
            if trial.iter().all(|v| *v > 0.0) && residual(&trial).norm() <= base {
                theta = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                break;
            }
        }
        if step.norm() * t < 1e-12 {
            break;
        }
    }
    let mut out = *start;
    out.cart_mass = theta[0];
    out.pole_mass = theta[1];
    out.pole_half_length = theta[2];
    Ok(out)
}
