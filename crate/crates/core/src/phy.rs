//! Closed-loop matrix, residual action, Lyapunov value and the physics-regulated reward.

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::lmi::{self, LmiReport, SynthesisProblem, SynthesisSolution};
use crate::{Error, Result};

/// Envelope matrix `P`, model-based gain `F` and the closed loop `Ā = A + B F`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeGain {
    p: Mat,
    f: Mat,
    alpha: f64,
    a_bar: Mat,
}

impl EnvelopeGain {
    /// Builds the gain without checking the LMIs; see [`EnvelopeGain::check`].
    pub fn new(a: &Mat, b: &Mat, p: Mat, f: Mat, alpha: f64) -> Result<Self> {
        let n = a.nrows();
        check_dim("P rows", n, p.nrows())?;
        check_dim("P columns", n, p.ncols())?;
        check_dim("F columns", n, f.ncols())?;
        check_dim("F rows", b.ncols(), f.nrows())?;
        check_dim("B rows", n, b.nrows())?;
        let env = crate::safety::Envelope::new(p)?;
        let a_bar = a + b * &f;
        Ok(Self {
            p: env.p().clone(),
            f,
            alpha,
            a_bar,
        })
    }

    pub fn from_solution(problem: &SynthesisProblem, sol: &SynthesisSolution) -> Result<Self> {
        Self::new(problem.a(), problem.b(), sol.p.clone(), sol.f.clone(), problem.alpha())
    }

    /// LMI margins of `(P⁻¹, F P⁻¹)` for `problem`.
    pub fn check(&self, problem: &SynthesisProblem, tol: f64) -> Result<LmiReport> {
        let sol = SynthesisSolution::from_pf(self.p.clone(), self.f.clone())?;
        lmi::verify(problem, &sol.q, &sol.r, tol)
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_bar(&self) -> &Mat {
        &self.a_bar
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `ĀᵀPĀ - αP`; negative semidefinite for LMI-feasible gains.
    pub fn contraction_matrix(&self) -> Mat {
        self.a_bar.transpose() * &self.p * &self.a_bar - &self.p * self.alpha
    }

    /// `sᵀ(ĀᵀPĀ - αP)s`.
    pub fn contraction_slack(&self, s: &Vector) -> Result<f64> {
        check_dim("state", self.dim(), s.len())?;
        let abs = &self.a_bar * s;
        Ok(linalg::quad_form(&self.p, &abs) - self.alpha * linalg::quad_form(&self.p, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardVariant {
    /// `sᵀĀᵀPĀs - s'ᵀPs' + w g(s, a)`.
    SafetyAndStability,
    /// `α sᵀPs - s'ᵀPs' + w g(s, a)`.
    StabilityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub performance_weight: f64,
    pub variant: RewardVariant,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            performance_weight: 1.0,
            variant: RewardVariant::SafetyAndStability,
        }
    }
}

/// `a_phy = F s` for a single-input plant.
pub fn physics_action(f: &Mat, s: &Vector) -> Result<f64> {
    check_dim("gain rows (single input)", 1, f.nrows())?;
    check_dim("state", f.ncols(), s.len())?;
    Ok(f.row(0).transpose().dot(s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualAction {
    pub value: f64,
    pub clamped: bool,
}

/// `clamp(a_drl + a_phy, ±force_limit)`.
pub fn residual_action(a_drl: f64, a_phy: f64, force_limit: f64) -> Result<ResidualAction> {
    if !a_drl.is_finite() || !a_phy.is_finite() {
        return Err(Error::NonFinite("residual action input"));
    }
    let raw = a_drl + a_phy;
    let value = raw.clamp(-force_limit, force_limit);
    Ok(ResidualAction {
        value,
        clamped: value != raw,
    })
}

/// `V(s) = sᵀ P s`.
pub fn lyapunov_value(p: &Mat, s: &Vector) -> Result<f64> {
    check_dim("state", p.nrows(), s.len())?;
    Ok(linalg::quad_form(p, s))
}

/// Performance term `g(s, a) = -a²`.
pub fn performance(a: f64) -> f64 {
    -a * a
}

/// `r = s'ᵀPs' - sᵀĀᵀPĀs`.
pub fn r_term(gain: &EnvelopeGain, s: &Vector, s_next: &Vector) -> Result<f64> {
    check_dim("state", gain.dim(), s.len())?;
    check_dim("next state", gain.dim(), s_next.len())?;
    let abs = gain.a_bar() * s;
    Ok(linalg::quad_form(gain.p(), s_next) - linalg::quad_form(gain.p(), &abs))
}

/// Physics-regulated reward for the transition `s --a--> s_next`; `a` is the applied command.
pub fn reward(gain: &EnvelopeGain, cfg: &RewardConfig, s: &Vector, a: f64, s_next: &Vector) -> Result<f64> {
    let g = cfg.performance_weight * performance(a);
    match cfg.variant {
        RewardVariant::SafetyAndStability => Ok(-r_term(gain, s, s_next)? + g),
        RewardVariant::StabilityOnly => {
            let v = lyapunov_value(gain.p(), s)?;
            let v_next = lyapunov_value(gain.p(), s_next)?;
            Ok(gain.alpha() * v - v_next + g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_gain() -> EnvelopeGain {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 0.1]);
        let p = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let f = Mat::from_row_slice(1, 2, &[-1.0, -1.5]);
        EnvelopeGain::new(&a, &b, p, f, 0.8).unwrap()
    }

    #[test]
    fn closed_loop_matrix() {
        let g = toy_gain();
        let expected = Mat::from_row_slice(2, 2, &[1.0, 0.1, -0.1, 0.85]);
        assert!((g.a_bar() - expected).norm() < 1e-15);
    }

    #[test]
    fn residual_composition() {
        assert_eq!(residual_action(0.0, 2.5, 15.0).unwrap().value, 2.5);
        assert_eq!(residual_action(1.0, 2.0, 15.0).unwrap().value, 3.0);
        let sat = residual_action(100.0, 0.0, 15.0).unwrap();
        assert_eq!(sat.value, 15.0);
        assert!(sat.clamped);
        assert!(residual_action(f64::NAN, 0.0, 15.0).is_err());
    }

    #[test]
    fn reward_vanishes_on_model_following() {
        let g = toy_gain();
        let cfg = RewardConfig::default();
        assert_eq!(reward(&g, &cfg, &Vector::zeros(2), 0.0, &Vector::zeros(2)).unwrap(), 0.0);
        let s = Vector::from_vec(alloc::vec![0.3, -0.2]);
        let next = g.a_bar() * &s;
        assert!(reward(&g, &cfg, &s, 0.0, &next).unwrap().abs() < 1e-15);
        assert!(r_term(&g, &s, &next).unwrap().abs() < 1e-15);
    }

    #[test]
    fn stability_only_variant() {
        let g = toy_gain();
        let cfg = RewardConfig {
            performance_weight: 0.5,
            variant: RewardVariant::StabilityOnly,
        };
        let s = Vector::from_vec(alloc::vec![0.3, -0.2]);
        let next = Vector::from_vec(alloc::vec![0.1, 0.1]);
        let expected = 0.8 * linalg::quad_form(g.p(), &s) - linalg::quad_form(g.p(), &next) - 0.5 * 4.0;
        assert!((reward(&g, &cfg, &s, 2.0, &next).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn physics_action_is_linear() {
        let f = Mat::from_row_slice(1, 4, &[0.74, 3.6033, 35.3534, 6.9982]);
        let e1 = Vector::from_vec(alloc::vec![1.0, 0.0, 0.0, 0.0]);
        let e3 = Vector::from_vec(alloc::vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(physics_action(&f, &e1).unwrap(), 0.74);
        assert_eq!(physics_action(&f, &e3).unwrap(), 35.3534);
        assert_eq!(physics_action(&f, &Vector::zeros(4)).unwrap(), 0.0);
        assert!(physics_action(&f, &Vector::zeros(3)).is_err());
    }
}
