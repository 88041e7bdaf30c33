//! Envelope and gain synthesis through linear matrix inequalities.
//!
//! With `Q = P⁻¹` and `R = F Q` the design conditions are
//!
//! ```text
//! [ αQ          QAᵀ + RᵀBᵀ ]
//! [ AQ + BR     Q          ]  ≻ 0            (contraction)
//! I - D_upper Q D_upperᵀ      ≻ 0            (box)
//! d_i ([D_lower Q D_lowerᵀ]_ii - 1) >= 0     (per-row diagonal condition)
//! ```
//!
//! and optionally `[[u² I, R], [Rᵀ, Q]] ⪰ 0`, which bounds `|F s| <= u` over
//! the envelope.
//!
//! [`solve`] first maximizes the smallest eigenvalue over all blocks with a
//! barrier path-following method, which also certifies infeasibility, then
//! moves that point to the analytic center of the feasible set (damped Newton
//! on the log-det barrier) whenever the center keeps the required margin.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Cholesky;

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector, SYMMETRY_TOL};
use crate::safety::NormalizedSafety;
use crate::{Error, Result};

pub use crate::linalg::psd_margin;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisProblem {
    a: Mat,
    b: Mat,
    alpha: f64,
    ns: NormalizedSafety,
    force_bound: Option<f64>,
}

impl SynthesisProblem {
    pub fn new(a: Mat, b: Mat, alpha: f64, ns: NormalizedSafety) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                what: "system matrix (square)",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        check_dim("control matrix rows", a.nrows(), b.nrows())?;
        check_dim("safety set dimension", a.nrows(), ns.dim())?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            a,
            b,
            alpha,
            ns,
            force_bound: None,
        })
    }

    /// Adds the actuator constraint `|F s| <= bound` for all `s` in the envelope.
    pub fn with_force_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "force bound must be positive, got {bound}"
            )));
        }
        self.force_bound = Some(bound);
        Ok(self)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn safety(&self) -> &NormalizedSafety {
        &self.ns
    }

    pub fn force_bound(&self) -> Option<f64> {
        self.force_bound
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// The contraction block matrix.
    pub fn contraction_block(&self, q: &Mat, r: &Mat) -> Mat {
        let n = self.n();
        let lower = &self.a * q + &self.b * r;
        let mut out = Mat::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&(q * self.alpha));
        out.view_mut((n, 0), (n, n)).copy_from(&lower);
        out.view_mut((0, n), (n, n)).copy_from(&lower.transpose());
        out.view_mut((n, n), (n, n)).copy_from(q);
        out
    }

    fn force_block(&self, q: &Mat, r: &Mat, bound: f64) -> Mat {
        let n = self.n();
        let m = self.m();
        let mut out = Mat::zeros(m + n, m + n);
        out.view_mut((0, 0), (m, m)).copy_from(&(Mat::identity(m, m) * (bound * bound)));
        out.view_mut((0, m), (m, n)).copy_from(r);
        out.view_mut((m, 0), (n, m)).copy_from(&r.transpose());
        out.view_mut((m, m), (n, n)).copy_from(q);
        out
    }

    /// Every constraint as a symmetric block that must be positive (semi)definite.
    fn blocks(&self, q: &Mat, r: &Mat) -> Vec<Mat> {
        let ns = &self.ns;
        let h = ns.rows();
        let mut out = Vec::with_capacity(3 + h);
        out.push(self.contraction_block(q, r));
        out.push(Mat::identity(h, h) - ns.d_upper() * q * ns.d_upper().transpose());
        let lower = ns.d_lower() * q * ns.d_lower().transpose();
        for i in 0..h {
            out.push(Mat::from_element(1, 1, ns.d()[i] * (lower[(i, i)] - 1.0)));
        }
        if let Some(bound) = self.force_bound {
            out.push(self.force_block(q, r, bound));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSolution {
    pub q: Mat,
    pub r: Mat,
    /// `Q⁻¹`.
    pub p: Mat,
    /// `R Q⁻¹`.
    pub f: Mat,
}

impl SynthesisSolution {
    pub fn from_qr(q: Mat, r: Mat) -> Result<Self> {
        check_dim("gain columns", q.nrows(), r.ncols())?;
        let q = linalg::symmetrize(&q);
        let p = linalg::spd_inverse(&q)?;
        let f = &r * &p;
        Ok(Self { q, r, p, f })
    }

    /// Recovers `(Q, R)` from a given envelope matrix and gain.
    pub fn from_pf(p: Mat, f: Mat) -> Result<Self> {
        check_dim("gain columns", p.nrows(), f.ncols())?;
        let p = linalg::symmetrize(&p);
        let q = linalg::symmetrize(&linalg::spd_inverse(&p)?);
        let r = &f * &q;
        Ok(Self { q, r, p, f })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiReport {
    /// Smallest eigenvalue of the contraction block.
    pub schur_margin: f64,
    /// Smallest eigenvalue of `I - D_upper Q D_upperᵀ`.
    pub box_margin: f64,
    /// `d_i ([D_lower Q D_lowerᵀ]_ii - 1)` per row.
    pub diag_slacks: Vec<f64>,
    /// Smallest eigenvalue of the actuator block, when the problem has one.
    pub force_margin: Option<f64>,
    pub feasible: bool,
}

impl LmiReport {
    pub fn min_margin(&self) -> f64 {
        self.diag_slacks
            .iter()
            .copied()
            .chain(self.force_margin)
            .fold(self.schur_margin.min(self.box_margin), f64::min)
    }
}

/// Evaluates every LMI at `(Q, R)`. `feasible` holds iff all margins are `>= -tol`.
pub fn verify(problem: &SynthesisProblem, q: &Mat, r: &Mat, tol: f64) -> Result<LmiReport> {
    let n = problem.n();
    check_dim("Q rows", n, q.nrows())?;
    check_dim("Q columns", n, q.ncols())?;
    check_dim("R rows", problem.m(), r.nrows())?;
    check_dim("R columns", n, r.ncols())?;
    if !linalg::is_symmetric(q, SYMMETRY_TOL) {
        return Err(Error::NotSymmetric {
            asymmetry: linalg::asymmetry(q),
        });
    }
    let q = linalg::symmetrize(q);
    let blocks = problem.blocks(&q, r);
    let h = problem.ns.rows();
    let schur_margin = linalg::min_eigenvalue(&blocks[0])?;
    let box_margin = linalg::min_eigenvalue(&blocks[1])?;
    let diag_slacks: Vec<f64> = blocks[2..2 + h].iter().map(|b| b[(0, 0)]).collect();
    let force_margin = match problem.force_bound {
        Some(_) => Some(linalg::min_eigenvalue(&blocks[2 + h])?),
        None => None,
    };
    let mut report = LmiReport {
        schur_margin,
        box_margin,
        diag_slacks,
        force_margin,
        feasible: false,
    };
    report.feasible = report.min_margin() >= -tol;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Every returned margin is at least this large.
    pub min_margin: f64,
    /// Outer path-following iterations of the margin-maximization phase.
    pub max_iterations: usize,
    /// Relative duality-gap tolerance at which the maximal margin is accepted.
    pub gap_tolerance: f64,
    /// Move the feasible point to the analytic center of the feasible set.
    pub center: bool,
    pub max_newton_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            min_margin: 1e-6,
            max_iterations: 60,
            gap_tolerance: 1e-6,
            center: true,
            max_newton_steps: 200,
        }
    }
}

/// `Z_b(x) = C_b + Σ_j x_j G_bj` for every constraint block.
struct AffineBlocks {
    constant: Vec<Mat>,
    linear: Vec<Vec<Mat>>,
    n: usize,
    m: usize,
}

impl AffineBlocks {
    fn new(problem: &SynthesisProblem) -> Self {
        let n = problem.n();
        let m = problem.m();
        let nvars = n * (n + 1) / 2 + m * n;
        let constant = problem.blocks(&Mat::zeros(n, n), &Mat::zeros(m, n));
        let mut linear = Vec::with_capacity(nvars);
        let mut x = vec![0.0; nvars];
        for j in 0..nvars {
            x[j] = 1.0;
            let (q, r) = Self::unpack(&x, n, m);
            let blocks = problem.blocks(&q, &r);
            linear.push(blocks.iter().zip(&constant).map(|(z, c)| z - c).collect());
            x[j] = 0.0;
        }
        Self {
            constant,
            linear,
            n,
            m,
        }
    }

    fn nvars(&self) -> usize {
        self.linear.len()
    }

    fn unpack(x: &[f64], n: usize, m: usize) -> (Mat, Mat) {
        let mut q = Mat::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                q[(i, j)] = x[k];
                q[(j, i)] = x[k];
                k += 1;
            }
        }
        let mut r = Mat::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                r[(i, j)] = x[k];
                k += 1;
            }
        }
        (q, r)
    }

    fn pack(q: &Mat, r: &Mat) -> Vec<f64> {
        let n = q.nrows();
        let mut x = Vec::new();
        for i in 0..n {
            for j in i..n {
                x.push(q[(i, j)]);
            }
        }
        for i in 0..r.nrows() {
            for j in 0..n {
                x.push(r[(i, j)]);
            }
        }
        x
    }

    fn eval(&self, x: &[f64]) -> Vec<Mat> {
        let mut out = self.constant.clone();
        for (xj, gj) in x.iter().zip(&self.linear) {
            if *xj != 0.0 {
                for (z, g) in out.iter_mut().zip(gj) {
                    *z += g * *xj;
                }
            }
        }
        out
    }

    /// Appends a variable `t` entering every block as `-t I`.
    fn with_margin_variable(&self) -> Self {
        let mut linear = self.linear.clone();
        linear.push(self.constant.iter().map(|c| -Mat::identity(c.nrows(), c.ncols())).collect());
        Self {
            constant: self.constant.clone(),
            linear,
            n: self.n,
            m: self.m,
        }
    }
}

/// Finds `(Q, R)` satisfying every LMI with margins at least `opts.min_margin`.
pub fn solve(problem: &SynthesisProblem, opts: &SolveOptions) -> Result<SynthesisSolution> {
    let affine = AffineBlocks::new(problem);
    let (x, _) = max_margin_point(&affine, opts)?;
    let x = if opts.center {
        let zeros = vec![0.0; affine.nvars()];
        let centered = centering(&affine, x.clone(), &zeros, opts.max_newton_steps)?;
        if min_block_margin(&affine.eval(&centered))? >= opts.min_margin {
            centered
        } else {
            x
        }
    } else {
        x
    };
    let (q, r) = AffineBlocks::unpack(&x, affine.n, affine.m);
    SynthesisSolution::from_qr(q, r)
}

fn min_block_margin(blocks: &[Mat]) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for b in blocks {
        worst = worst.min(linalg::min_eigenvalue(b)?);
    }
    Ok(worst)
}

/// Phase I: maximizes the common margin `t` with `Z_b(x) - t I ≻ 0` for every
/// block by following the central path of `-κ t - Σ log det(Z_b - t I)`.
/// Returns the maximizing `x` and `t`, or `Infeasible` when the duality-gap
/// bound proves the best margin is below `opts.min_margin`.
fn max_margin_point(affine: &AffineBlocks, opts: &SolveOptions) -> Result<(Vec<f64>, f64)> {
    let n = affine.n;
    let lifted = affine.with_margin_variable();
    let x0 = AffineBlocks::pack(&Mat::identity(n, n), &Mat::zeros(affine.m, n));
    let t0 = min_block_margin(&affine.eval(&x0))? - 1.0;
    let mut y = x0;
    y.push(t0);
    let dim: usize = affine.constant.iter().map(|c| c.nrows()).sum();
    let nvars = lifted.nvars();
    let mut kappa = 1.0;
    for iteration in 0..opts.max_iterations {
        let mut objective = vec![0.0; nvars];
        objective[nvars - 1] = -kappa;
        y = centering(&lifted, y, &objective, opts.max_newton_steps)?;
        let t = y[nvars - 1];
        let gap = dim as f64 / kappa;
        if t + gap < opts.min_margin {
            return Err(Error::Infeasible {
                iterations: iteration + 1,
            });
        }
        if gap <= opts.gap_tolerance * t.abs().max(opts.min_margin) {
            if t < opts.min_margin {
                return Err(Error::Infeasible {
                    iterations: iteration + 1,
                });
            }
            y.pop();
            return Ok((y, t));
        }
        kappa *= 8.0;
    }
    Err(Error::Infeasible {
        iterations: opts.max_iterations,
    })
}

/// `-Σ_b log det Z_b(x)`, or `None` outside the interior.
fn barrier(blocks: &[Mat]) -> Option<f64> {
    let mut total = 0.0;
    for b in blocks {
        let chol = Cholesky::new(linalg::symmetrize(b))?;
        let l = chol.l();
        for i in 0..l.nrows() {
            total -= 2.0 * libm::log(l[(i, i)]);
        }
    }
    Some(total)
}

/// Damped Newton minimization of `c·x - Σ_b log det Z_b(x)` from a strictly feasible `x`.
fn centering(affine: &AffineBlocks, mut x: Vec<f64>, c: &[f64], max_steps: usize) -> Result<Vec<f64>> {
    let nvars = affine.nvars();
    let linear_term = |x: &[f64]| x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    let mut value = match barrier(&affine.eval(&x)) {
        Some(v) => v + linear_term(&x),
        None => return Err(Error::NumericalFailure("centering started outside the interior")),
    };
    for _ in 0..max_steps {
        let blocks = affine.eval(&x);
        let inverses: Vec<Mat> = blocks
            .iter()
            .map(linalg::spd_inverse)
            .collect::<Result<_>>()?;
        // S_bj = Z_b⁻¹ G_bj
        let scaled: Vec<Vec<Mat>> = affine
            .linear
            .iter()
            .map(|gj| gj.iter().zip(&inverses).map(|(g, zi)| zi * g).collect())
            .collect();
        let grad = Vector::from_iterator(
            nvars,
            scaled
                .iter()
                .zip(c)
                .map(|(sj, cj)| cj - sj.iter().map(|s| s.trace()).sum::<f64>()),
        );
        let mut hess = Mat::zeros(nvars, nvars);
        for i in 0..nvars {
            for j in i..nvars {
                let v: f64 = scaled[i]
                    .iter()
                    .zip(&scaled[j])
                    .map(|(a, b)| a.component_mul(&b.transpose()).sum())
                    .sum();
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        // Variables the blocks do not depend on (e.g. R when B = 0) have zero curvature.
        let ridge = 1e-12 * (0..nvars).map(|i| hess[(i, i)]).fold(0.0, f64::max).max(1e-300);
        for i in 0..nvars {
            hess[(i, i)] += ridge;
        }
        let Some(chol) = Cholesky::new(hess) else {
            break;
        };
        let step = -chol.solve(&grad);
        let decrement = -grad.dot(&step);
        if !(decrement > 1e-14) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Some(v) = barrier(&affine.eval(&trial)) {
                let v = v + linear_term(&trial);
                if v <= value - 0.25 * t * decrement {
                    x = trial;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || decrement < 1e-12 {
            break;
        }
    }
    Ok(x)
}
