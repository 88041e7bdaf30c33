//! Empirical checks of the safety and stability conditions for a trained controller.

use alloc::vec::Vec;

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::phy::{self, EnvelopeGain};
use crate::rollout::{self, Controller, Plant, RolloutOptions, Trajectory};
use crate::safety::Envelope;
use crate::{Error, Result};

/// Minimum number of transitions accepted by [`estimate_beta`].
pub const MIN_TRANSITIONS: usize = 100;
pub const DEFAULT_HEADROOM: f64 = 0.05;
/// A start with `|sᵀPs - 1|` below this counts as a boundary start.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Envelope levels up to `1 + EXIT_TOL` are not counted as exits.
pub const EXIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaKind {
    Constant,
    QuadraticInState,
}

/// Empirical upper bound `β(s)` on `r(s, a)`.
///
/// `Constant`: `β(s) = const_bound`. `QuadraticInState`: `β(s) = sᵀ M s + const_bound`,
/// where the offset is zero unless some sample cannot be dominated by the form alone
/// (for instance a positive `r` observed at `s = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub kind: BetaKind,
    pub const_bound: f64,
    pub quad_matrix: Mat,
    pub sample_count: usize,
    pub max_observed_r: f64,
    pub headroom: f64,
}

impl BetaEstimate {
    pub fn constant(bound: f64, dim: usize) -> Self {
        Self {
            kind: BetaKind::Constant,
            const_bound: bound,
            quad_matrix: Mat::zeros(dim, dim),
            sample_count: 0,
            max_observed_r: f64::NEG_INFINITY,
            headroom: 0.0,
        }
    }

    pub fn value(&self, s: &Vector) -> f64 {
        match self.kind {
            BetaKind::Constant => self.const_bound,
            BetaKind::QuadraticInState => linalg::quad_form(&self.quad_matrix, s) + self.const_bound,
        }
    }

    /// Same estimate with every value raised by `delta ≥ 0`.
    pub fn raised(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.const_bound += delta;
        out
    }
}

/// `(s, r_term)` for every transition of `trajectories`.
pub fn r_samples(trajectories: &[Trajectory], gain: &EnvelopeGain) -> Result<Vec<(Vector, f64)>> {
    let mut out = Vec::new();
    for traj in trajectories {
        for rec in &traj.steps {
            out.push((rec.state.clone(), phy::r_term(gain, &rec.state, &rec.next)?));
        }
    }
    Ok(out)
}

fn bump(max: f64, headroom: f64) -> f64 {
    max + headroom * libm::fabs(max).max(1e-12)
}

/// Fits `β` on the transitions of `trajectories`; at least [`MIN_TRANSITIONS`] are required.
pub fn estimate_beta(
    trajectories: &[Trajectory],
    gain: &EnvelopeGain,
    kind: BetaKind,
    headroom: f64,
) -> Result<BetaEstimate> {
    let samples = r_samples(trajectories, gain)?;
    if samples.len() < MIN_TRANSITIONS {
        return Err(Error::InsufficientData {
            found: samples.len(),
            required: MIN_TRANSITIONS,
        });
    }
    let n = gain.dim();
    let max_r = samples.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);
    let mut est = BetaEstimate {
        kind,
        const_bound: 0.0,
        quad_matrix: Mat::zeros(n, n),
        sample_count: samples.len(),
        max_observed_r: max_r,
        headroom,
    };
    match kind {
        BetaKind::Constant => est.const_bound = bump(max_r, headroom),
        BetaKind::QuadraticInState => {
            let mut m = fit_quadratic(&samples, n)?;
            // Inflate along P until the form dominates every sample with nonzero V.
            let mut lambda: f64 = 0.0;
            for (s, r) in &samples {
                let v = linalg::quad_form(gain.p(), s);
                if v > 1e-12 {
                    lambda = lambda.max((r - linalg::quad_form(&m, s)) / v);
                }
            }
            if lambda > 0.0 {
                m += gain.p() * (lambda * (1.0 + headroom));
            }
            let gap = samples
                .iter()
                .map(|(s, r)| r - linalg::quad_form(&m, s))
                .fold(f64::NEG_INFINITY, f64::max);
            est.quad_matrix = m;
            if gap >= 0.0 {
                est.const_bound = bump(gap, headroom);
            }
        }
    }
    Ok(est)
}

/// Least-squares symmetric `M` with `sᵀ M s ≈ r`, projected onto the PSD cone.
fn fit_quadratic(samples: &[(Vector, f64)], n: usize) -> Result<Mat> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut design = Mat::zeros(samples.len(), pairs.len());
    let mut rhs = Mat::zeros(samples.len(), 1);
    for (k, (s, r)) in samples.iter().enumerate() {
        for (c, &(i, j)) in pairs.iter().enumerate() {
            design[(k, c)] = if i == j { s[i] * s[i] } else { 2.0 * s[i] * s[j] };
        }
        rhs[k] = *r;
    }
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|_| Error::NumericalFailure("quadratic beta fit"))?;
    let mut m = Mat::zeros(n, n);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        m[(i, j)] = coef[c];
        m[(j, i)] = coef[c];
    }
    linalg::project_psd_floor(&m, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Neither,
    /// Only the safety condition holds.
    SafetyOnly,
    StabilityOnly,
    /// Both conditions hold.
    SafetyAndStability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub safety_ratio: f64,
    pub stability_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub safety_condition_holds: bool,
    pub stability_condition_holds: bool,
    /// `max β(s) / (1 - α)`.
    pub worst_safety_ratio: f64,
    /// `max β(s) + (α - 1) V(s)`.
    pub worst_stability_margin: f64,
    pub violating_states: Vec<Violation>,
    pub states_checked: usize,
}

impl TheoremReport {
    pub fn verdict(&self) -> Verdict {
        match (self.safety_condition_holds, self.stability_condition_holds) {
            (true, true) => Verdict::SafetyAndStability,
            (true, false) => Verdict::SafetyOnly,
            (false, true) => Verdict::StabilityOnly,
            (false, false) => Verdict::Neither,
        }
    }
}

/// Evaluates `β(s)/(1-α) < 1` and `β(s) + (α-1)V(s) < 0` at every state.
pub fn check_theorem(beta: &BetaEstimate, gain: &EnvelopeGain, states: &[Vector]) -> TheoremReport {
    let alpha = gain.alpha();
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut violating = Vec::new();
    for (index, s) in states.iter().enumerate() {
        let b = beta.value(s);
        let ratio = b / (1.0 - alpha);
        let margin = b + (alpha - 1.0) * linalg::quad_form(gain.p(), s);
        worst_ratio = worst_ratio.max(ratio);
        worst_margin = worst_margin.max(margin);
        // Negated comparisons so NaN counts as a violation.
        if !(ratio < 1.0) || !(margin < 0.0) {
            violating.push(Violation {
                index,
                safety_ratio: ratio,
                stability_margin: margin,
            });
        }
    }
    TheoremReport {
        safety_condition_holds: violating.iter().all(|v| v.safety_ratio < 1.0),
        stability_condition_holds: violating.iter().all(|v| v.stability_margin < 0.0),
        worst_safety_ratio: worst_ratio,
        worst_stability_margin: worst_margin,
        violating_states: violating,
        states_checked: states.len(),
    }
}

/// `count` uniform samples inside `{sᵀPs ≤ 1}`, of which the first `boundary` lie on the boundary.
pub fn sample_envelope<R: rand::Rng + ?Sized>(
    env: &Envelope,
    count: usize,
    boundary: usize,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    (0..count)
        .map(|k| {
            if k < boundary {
                env.sample_boundary(1.0, rng)
            } else {
                env.sample_interior(1.0, rng)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceRecord {
    pub initial_level: f64,
    pub boundary_start: bool,
    /// Largest `sᵀPs` seen, initial state included.
    pub max_level: f64,
    /// First step at which `sᵀPs` exceeded `1 + EXIT_TOL`.
    pub exit_step: Option<usize>,
    /// `V` never increased along the trajectory.
    pub v_nonincreasing: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub records: Vec<InvarianceRecord>,
}

impl InvarianceReport {
    pub fn exits(&self) -> usize {
        self.records.iter().filter(|r| r.exit_step.is_some()).count()
    }

    pub fn boundary_starts(&self) -> usize {
        self.records.iter().filter(|r| r.boundary_start).count()
    }

    pub fn max_level(&self) -> f64 {
        self.records.iter().map(|r| r.max_level).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rolls every initial state for `horizon` steps and tracks the envelope level.
/// A trajectory stops at its first envelope exit or plant divergence.
pub fn invariance_rollout(
    controller: &Controller<'_>,
    gain: &EnvelopeGain,
    plant: &dyn Plant,
    inits: &[Vector],
    horizon: usize,
) -> Result<(InvarianceReport, Vec<Trajectory>)> {
    let mut records = Vec::with_capacity(inits.len());
    let mut trajectories = Vec::with_capacity(inits.len());
    for s0 in inits {
        check_dim("initial state", gain.dim(), s0.len())?;
        let level0 = linalg::quad_form(gain.p(), s0);
        let mut rec = InvarianceRecord {
            initial_level: level0,
            boundary_start: libm::fabs(level0 - 1.0) <= BOUNDARY_TOL,
            max_level: level0,
            exit_step: None,
            v_nonincreasing: true,
            steps: 0,
        };
        let mut traj = Trajectory {
            initial: s0.clone(),
            steps: Vec::new(),
            safety_exit: None,
            diverged: false,
        };
        let mut s = s0.clone();
        let mut level = level0;
        for k in 0..horizon {
            let step = rollout::rollout(
                plant,
                controller,
                None,
                &s,
                RolloutOptions {
                    horizon: 1,
                    stop_on_exit: false,
                },
            )?;
            if step.diverged {
                traj.diverged = true;
                rec.exit_step = Some(k);
                rec.max_level = f64::INFINITY;
                break;
            }
            let record = step.steps.into_iter().next().ok_or(Error::NumericalFailure("empty rollout step"))?;
            let next_level = linalg::quad_form(gain.p(), &record.next);
            if next_level > level {
                rec.v_nonincreasing = false;
            }
            rec.max_level = rec.max_level.max(next_level);
            s = record.next.clone();
            traj.steps.push(record);
            rec.steps = k + 1;
            level = next_level;
            if level > 1.0 + EXIT_TOL {
                rec.exit_step = Some(k);
                traj.safety_exit = Some(k);
                break;
            }
        }
        records.push(rec);
        trajectories.push(traj);
    }
    Ok((InvarianceReport { records }, trajectories))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    /// `max |V(s') - V(s) - r - (α-1)V(s) - slack(s)|`.
    pub max_residual: f64,
    pub slack_min: f64,
    pub slack_max: f64,
    pub steps: usize,
}

/// Lyapunov-difference accounting along a logged trajectory.
pub fn lyapunov_audit(traj: &Trajectory, gain: &EnvelopeGain) -> Result<AuditReport> {
    let alpha = gain.alpha();
    let mut report = AuditReport {
        max_residual: 0.0,
        slack_min: f64::INFINITY,
        slack_max: f64::NEG_INFINITY,
        steps: traj.steps.len(),
    };
    for rec in &traj.steps {
        let v = phy::lyapunov_value(gain.p(), &rec.state)?;
        let v_next = phy::lyapunov_value(gain.p(), &rec.next)?;
        let r = phy::r_term(gain, &rec.state, &rec.next)?;
        let slack = gain.contraction_slack(&rec.state)?;
        let residual = libm::fabs(v_next - v - r - (alpha - 1.0) * v - slack);
        report.max_residual = report.max_residual.max(residual);
        report.slack_min = report.slack_min.min(slack);
        report.slack_max = report.slack_max.max(slack);
    }
    if traj.steps.is_empty() {
        report.slack_min = 0.0;
        report.slack_max = 0.0;
    }
    Ok(report)
}

/// The safety condition held on the envelope sample, yet a rollout left the envelope.
pub fn beta_underestimate(theorem: &TheoremReport, invariance: &InvarianceReport) -> bool {
    theorem.safety_condition_holds && invariance.exits() > 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::{ConstantPolicy, LinearPlant, ZeroPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (LinearPlant, EnvelopeGain) {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 0.1]);
        let f = Mat::from_row_slice(1, 2, &[-2.0, -3.0]);
        let a_bar = &a + &b * &f;
        // Discrete Lyapunov solution of ĀᵀPĀ - 0.95 P = -I, by fixed-point iteration.
        let alpha = 0.95;
        let mut p = Mat::identity(2, 2);
        for _ in 0..5000 {
            p = (a_bar.transpose() * &p * &a_bar + Mat::identity(2, 2)) / alpha;
        }
        let p = p / 50.0;
        let plant = LinearPlant::new(a.clone(), b.clone(), 100.0).unwrap();
        (plant, EnvelopeGain::new(&a, &b, p, f, alpha).unwrap())
    }

    #[test]
    fn theorem_arithmetic() {
        let (_, gain) = toy();
        let s = Vector::from_vec(alloc::vec![0.2, 0.1]);
        let zero = BetaEstimate::constant(0.0, 2);
        let rep = check_theorem(&zero, &gain, core::slice::from_ref(&s));
        assert_eq!(rep.verdict(), Verdict::SafetyAndStability);
        let big = BetaEstimate::constant(0.5, 2);
        let rep = check_theorem(&big, &gain, core::slice::from_ref(&s));
        assert!(!rep.safety_condition_holds);
        assert!((rep.worst_safety_ratio - 0.5 / 0.05).abs() < 1e-12);
    }

    #[test]
    fn audit_and_beta_on_linear_plant() {
        let (plant, gain) = toy();
        let ctl = Controller::residual(&ZeroPolicy, gain.f());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let env = Envelope::new(gain.p().clone()).unwrap();
        let inits = sample_envelope(&env, 10, 2, &mut rng).unwrap();
        let (report, trajs) = invariance_rollout(&ctl, &gain, &plant, &inits, 50).unwrap();
        assert_eq!(report.exits(), 0);
        assert_eq!(report.boundary_starts(), 2);
        assert!(report.records.iter().all(|r| r.v_nonincreasing));
        for t in &trajs {
            let audit = lyapunov_audit(t, &gain).unwrap();
            assert!(audit.max_residual <= 1e-12);
            assert!(audit.slack_max <= 1e-12);
        }
        let beta = estimate_beta(&trajs, &gain, BetaKind::Constant, DEFAULT_HEADROOM).unwrap();
        assert!(beta.max_observed_r.abs() < 1e-12);
        assert!(beta.const_bound > beta.max_observed_r);
    }

    #[test]
    fn insufficient_data() {
        let (plant, gain) = toy();
        let ctl = Controller::residual(&ZeroPolicy, gain.f());
        let (_, trajs) = invariance_rollout(&ctl, &gain, &plant, &[Vector::from_vec(alloc::vec![0.1, 0.0])], 20).unwrap();
        assert!(matches!(
            estimate_beta(&trajs, &gain, BetaKind::Constant, 0.05),
            Err(Error::InsufficientData { found: 20, required: 100 })
        ));
    }

    #[test]
    fn adversarial_push_exits() {
        let (plant, gain) = toy();
        let push = ConstantPolicy(100.0);
        let ctl = Controller::residual(&push, gain.f());
        let (report, _) = invariance_rollout(&ctl, &gain, &plant, &[Vector::zeros(2)], 200).unwrap();
        assert!(report.records[0].exit_step.is_some());
        let theorem = check_theorem(&BetaEstimate::constant(0.0, 2), &gain, &[Vector::from_vec(alloc::vec![0.1, 0.1])]);
        assert!(beta_underestimate(&theorem, &report));
    }

    #[test]
    fn quadratic_beta_dominates() {
        let (plant, gain) = toy();
        let push = ConstantPolicy(0.3);
        let ctl = Controller::residual(&push, gain.f());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let env = Envelope::new(gain.p().clone()).unwrap();
        let inits = sample_envelope(&env, 10, 0, &mut rng).unwrap();
        let (_, trajs) = invariance_rollout(&ctl, &gain, &plant, &inits, 30).unwrap();
        let beta = estimate_beta(&trajs, &gain, BetaKind::QuadraticInState, 0.05).unwrap();
        assert!(linalg::psd_margin(&beta.quad_matrix).unwrap() >= -1e-12);
        for (s, r) in r_samples(&trajs, &gain).unwrap() {
            assert!(beta.value(&s) > r);
        }
    }
}
